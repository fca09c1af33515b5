//! Binary PPM (P6) frames of observed maps.
//!
//! Each cell becomes a `scale`x`scale` pixel block. Row 0 of the grid is
//! drawn at the bottom so the image has the workspace's y axis pointing up.

use std::path::{Path, PathBuf};

use super::episode::{write_file, EpisodeLog};
use crate::error::{Error, Result};
use crate::grid::{CellState, Grid, Vec2};

pub const BACKGROUND: [u8; 3] = [128, 128, 128];
pub const ACTIONABLE: [u8; 3] = [220, 60, 60];
pub const TRANSFORMED: [u8; 3] = [60, 180, 75];
pub const END_EFFECTOR: [u8; 3] = [0, 0, 0];

fn colour(s: CellState) -> [u8; 3] {
    match s {
        CellState::Background => BACKGROUND,
        CellState::Actionable => ACTIONABLE,
        CellState::Transformed => TRANSFORMED,
    }
}

/// Encodes `map` as a P6 image; the end-effector cell and its 8
/// neighbours are painted black.
pub fn render_ppm(map: &Grid, ee: Option<Vec2>, scale: usize) -> Vec<u8> {
    let scale = scale.max(1);
    let (w, h) = (map.width(), map.height());
    let marker = ee.map(|p| map.spec().col_row(map.spec().cell_at(p)));
    let header = format!("P6\n{} {}\n255\n", w * scale, h * scale);
    let mut out = Vec::with_capacity(header.len() + 3 * w * h * scale * scale);
    out.extend_from_slice(header.as_bytes());
    for img_row in 0..h * scale {
        let r = h - 1 - img_row / scale;
        for c in 0..w {
            let on_marker = marker.is_some_and(|(mc, mr)| mc.abs_diff(c) <= 1 && mr.abs_diff(r) <= 1);
            let px = if on_marker { END_EFFECTOR } else { colour(map.at(c, r)) };
            for _ in 0..scale {
                out.extend_from_slice(&px);
            }
        }
    }
    out
}

pub fn write_ppm(path: &Path, map: &Grid, ee: Option<Vec2>, scale: usize) -> Result<()> {
    write_file(path, &render_ppm(map, ee, scale))
}

/// Writes `frame_XXX.ppm` for every frame of `log` into `out`.
pub fn render_log(log: &EpisodeLog, out: &Path, scale: usize) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    log.frames
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let path = out.join(format!("frame_{t:03}.ppm"));
            write_ppm(&path, &f.map, Some(f.ee_pos), scale)?;
            Ok(path)
        })
        .collect()
}

/// Renders an episode directory written by [`EpisodeLog::write_dir`]:
/// `frame_XXX.oscg` maps with end-effector positions from `trajectory.csv`.
pub fn render_log_dir(dir: &Path, out: &Path, cell_size: f64, scale: usize) -> Result<Vec<PathBuf>> {
    let traj_path = dir.join("trajectory.csv");
    let traj = std::fs::read_to_string(&traj_path).map_err(|e| Error::io(&traj_path, e))?;
    let ee = parse_positions(&traj)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    for (t, &pos) in ee.iter().enumerate() {
        let frame = dir.join(format!("frame_{t:03}.oscg"));
        let bytes = std::fs::read(&frame).map_err(|e| Error::io(&frame, e))?;
        let map = Grid::from_bytes(&bytes, cell_size)?;
        let path = out.join(format!("frame_{t:03}.ppm"));
        write_ppm(&path, &map, Some(pos), scale)?;
        written.push(path);
    }
    Ok(written)
}

/// `(ee_x, ee_y)` per row of a trajectory CSV.
fn parse_positions(csv: &str) -> Result<Vec<Vec2>> {
    let bad = |reason: String| Error::Format {
        kind: "trajectory",
        reason,
    };
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty file".into()))?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| bad(format!("missing column {name}")))
    };
    let (ix, iy) = (col("ee_x")?, col("ee_y")?);
    lines
        .enumerate()
        .map(|(k, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let num = |i: usize| {
                f.get(i)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| bad(format!("line {}: bad position", k + 2)))
            };
            Ok(Vec2::new(num(ix)?, num(iy)?))
        })
        .collect()
}
