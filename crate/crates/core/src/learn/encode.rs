//! Observation features: two average-pooled label maps plus proprioception.
//!
//! Layout: `[cur A | cur T | prev A | prev T | ee_x, ee_y | step/T]`, each
//! map channel a row-major `D x D` block. Grids whose sides are not
//! multiples of `D` are padded with Background.

use crate::grid::{CellState, Grid};
use crate::policy::Observation;

pub fn feature_dim(pool: usize) -> usize {
    4 * pool * pool + 3
}

pub fn encode_observation(obs: &Observation, pool: usize, horizon: usize) -> Vec<f32> {
    assert!(pool > 0 && horizon > 0, "pool and horizon must be positive");
    let mut out = Vec::with_capacity(feature_dim(pool));
    pool_map(&obs.cur_map.grid, pool, &mut out);
    pool_map(&obs.prev_map.grid, pool, &mut out);
    let ext = obs.spec().extent();
    let (w, h) = (ext.x, ext.y);
    out.push((obs.ee_pos.x / w).clamp(0.0, 1.0) as f32);
    out.push((obs.ee_pos.y / h).clamp(0.0, 1.0) as f32);
    out.push((obs.step as f64 / horizon as f64).min(1.0) as f32);
    out
}

fn pool_map(grid: &Grid, pool: usize, out: &mut Vec<f32>) {
    let bw = grid.width().div_ceil(pool);
    let bh = grid.height().div_ceil(pool);
    let mut act = vec![0u32; pool * pool];
    let mut trf = vec![0u32; pool * pool];
    for r in 0..grid.height() {
        for c in 0..grid.width() {
            let j = (r / bh) * pool + c / bw;
            match grid.at(c, r) {
                CellState::Actionable => act[j] += 1,
                CellState::Transformed => trf[j] += 1,
                CellState::Background => {}
            }
        }
    }
    let area = (bw * bh) as f32;
    out.extend(act.iter().map(|&n| n as f32 / area));
    out.extend(trf.iter().map(|&n| n as f32 / area));
}
