//! Progress reward, success reward, weighted total and the coverage metric.
//!
//! The progress term is the newly transformed area between two consecutive
//! observed maps divided by the actionable area of the earlier map, so a
//! step that finishes all remaining work earns exactly 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellState, Grid, GridSpec, LabelCounts, Vec2};
use crate::perception::SpocMap;
use crate::world::{home_position, WorldState, SUCCESS_FRACTION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            alpha: 1.0,
            beta: 1.0,
            eta: 0.001,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.alpha, self.beta, self.eta].iter().all(|w| w.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("reward weights"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RewardBreakdown {
    pub r_spoc: f64,
    pub r_succ: f64,
    pub r_entropy: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageReport {
    pub transformed_cells: usize,
    pub actionable_cells: usize,
    pub object_cells: usize,
    pub coverage: f64,
}

/// `(A_trf(cur) - A_trf(prev)) / A_act(prev)`, or 0 when `prev` has no
/// actionable cells left.
pub fn spoc_reward(prev: &SpocMap, cur: &SpocMap) -> f64 {
    debug_assert_eq!(prev.spec(), cur.spec(), "maps must share dimensions");
    let p = prev.counts();
    let c = cur.counts();
    spoc_reward_from_counts(&p, &c)
}

pub fn spoc_reward_from_counts(prev: &LabelCounts, cur: &LabelCounts) -> f64 {
    if prev.actionable == 0 {
        return 0.0;
    }
    (cur.transformed as f64 - prev.transformed as f64) / prev.actionable as f64
}

/// 1 when the map's transformed fraction exceeds 95%, else 0.
pub fn success_reward(cur: &SpocMap) -> f64 {
    let c = cur.counts();
    if c.object() > 0 && c.transformed as f64 > SUCCESS_FRACTION * c.object() as f64 {
        1.0
    } else {
        0.0
    }
}

/// Weighted sum `alpha * r_spoc + beta * r_succ + eta * r_entropy`.
pub fn total_reward(w: &RewardWeights, r_spoc: f64, r_succ: f64, r_entropy: f64) -> Result<RewardBreakdown> {
    w.validate()?;
    for (name, v) in [("r_spoc", r_spoc), ("r_succ", r_succ), ("r_entropy", r_entropy)] {
        if !v.is_finite() {
            log::warn!("rejecting non-finite reward component {name} = {v}");
            return Err(Error::NonFinite("reward component"));
        }
    }
    Ok(RewardBreakdown {
        r_spoc,
        r_succ,
        r_entropy,
        total: w.alpha * r_spoc + w.beta * r_succ + w.eta * r_entropy,
    })
}

/// Anything carrying a labelled grid: observed maps and ground truth.
pub trait Labelled {
    fn labels(&self) -> &Grid;
}

impl Labelled for SpocMap {
    fn labels(&self) -> &Grid {
        &self.grid
    }
}

impl Labelled for WorldState {
    fn labels(&self) -> &Grid {
        &self.grid
    }
}

impl Labelled for Grid {
    fn labels(&self) -> &Grid {
        self
    }
}

pub fn coverage(map: &impl Labelled) -> Result<CoverageReport> {
    let c = map.labels().counts();
    if c.object() == 0 {
        return Err(Error::InvalidArgument("coverage of a map without object cells".into()));
    }
    Ok(CoverageReport {
        transformed_cells: c.transformed,
        actionable_cells: c.actionable,
        object_cells: c.object(),
        coverage: c.transformed as f64 / c.object() as f64,
    })
}

/// Side of the pooled grid used by the goal-distance proxy.
pub const GOALDIST_POOL: usize = 16;
/// Radius (cells) of the tool silhouette around the end-effector.
pub const OCCLUDER_RADIUS: f64 = 4.0;
/// Half-width (cells) of the arm silhouette.
pub const ARM_RADIUS: f64 = 2.0;

/// Cells hidden from an overhead camera with the tool at `ee`: a disc
/// around the tool plus the arm, a capsule from the middle of the far
/// workspace edge (the robot base) to the tool.
pub fn occluded_cells(spec: &GridSpec, ee: Vec2) -> Vec<bool> {
    let cs = spec.cell_size;
    let ext = spec.extent();
    let base = Vec2::new(0.5 * ext.x, ext.y);
    let seg = ee - base;
    let len2 = seg.dot(seg);
    let tool2 = (OCCLUDER_RADIUS * cs).powi(2);
    let arm2 = (ARM_RADIUS * cs).powi(2);
    (0..spec.len())
        .map(|i| {
            let p = spec.cell_center(i);
            if p.dist2(ee) <= tool2 {
                return true;
            }
            let t = if len2 > 0.0 { ((p - base).dot(seg) / len2).clamp(0.0, 1.0) } else { 0.0 };
            p.dist2(base + seg * t) <= arm2
        })
        .collect()
}

/// Whole-frame appearance embedding with three channels per pooled block:
/// visible Actionable fraction, visible Transformed fraction and the
/// fraction covered by the robot silhouette with the tool at `ee`.
pub fn appearance_embedding(map: &Grid, ee: Option<Vec2>, pool: usize) -> Vec<f64> {
    let spec = map.spec();
    let bw = map.width().div_ceil(pool);
    let bh = map.height().div_ceil(pool);
    let unit = 1.0 / (bw * bh) as f64;
    let hidden = match ee {
        Some(p) => occluded_cells(spec, p),
        None => vec![false; spec.len()],
    };
    let p2 = pool * pool;
    let mut e = vec![0.0; 3 * p2];
    for r in 0..map.height() {
        for c in 0..map.width() {
            let i = spec.index(c, r);
            let j = (r / bh) * pool + c / bw;
            if hidden[i] {
                e[2 * p2 + j] += unit;
                continue;
            }
            match map.get(i) {
                CellState::Actionable => e[j] += unit,
                CellState::Transformed => e[p2 + j] += unit,
                CellState::Background => {}
            }
        }
    }
    e
}

/// Mean absolute difference between the embedding of the current frame,
/// robot at `ee`, and that of the goal frame: every object cell
/// Transformed with the robot parked at its home position.
pub fn goal_distance(map: &Grid, ee: Vec2, pool: usize) -> f64 {
    let mut goal = map.clone();
    for i in map.object_cells() {
        goal.set(i, CellState::Transformed);
    }
    let cur = appearance_embedding(map, Some(ee), pool);
    let target = appearance_embedding(&goal, Some(home_position(map.spec())), pool);
    cur.iter().zip(&target).map(|(a, b)| (a - b).abs()).sum::<f64>() / cur.len() as f64
}

/// Decrease in [`goal_distance`] between consecutive frames.
pub fn goaldist_reward(prev: &SpocMap, prev_ee: Vec2, cur: &SpocMap, cur_ee: Vec2) -> f64 {
    goal_distance(&prev.grid, prev_ee, GOALDIST_POOL) - goal_distance(&cur.grid, cur_ee, GOALDIST_POOL)
}
