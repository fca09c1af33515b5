//! Procedural objects per task. The first entry of each task is the seen
//! (training) object; the rest are held out for evaluation.

use crate::grid::{GridSpec, Vec2};
use crate::world::{ObjectSpec, TaskKind};

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogueEntry {
    pub name: &'static str,
    pub seen: bool,
    pub spec: ObjectSpec,
}

/// `(name, shape, width, height, blob seed)` with sizes in cells on a 64-cell workspace.
type Row = (&'static str, char, f64, f64, u64);

const SPREAD: [Row; 4] = [
    ("rectangle", 'r', 36.0, 30.0, 0),
    ("ellipse", 'e', 42.0, 33.0, 0),
    ("blob_a", 'b', 54.0, 48.0, 11),
    ("blob_b", 'b', 51.0, 51.0, 23),
];

const MASH: [Row; 4] = [
    ("rectangle", 'r', 36.0, 30.0, 0),
    ("ellipse", 'e', 42.0, 36.0, 0),
    ("blob_a", 'b', 54.0, 48.0, 7),
    ("blob_b", 'b', 48.0, 54.0, 19),
];

const SLICE: [Row; 4] = [
    ("rectangle", 'r', 54.0, 21.0, 0),
    ("ellipse", 'e', 60.0, 24.0, 0),
    ("blob_a", 'b', 60.0, 40.0, 5),
    ("blob_b", 'b', 56.0, 42.0, 13),
];

/// Objects for `task`, centred in the workspace and scaled to its size.
pub fn catalogue(task: TaskKind, grid: &GridSpec) -> Vec<CatalogueEntry> {
    let rows = match task {
        TaskKind::Spread => &SPREAD,
        TaskKind::Mash => &MASH,
        TaskKind::Slice => &SLICE,
    };
    let ext = grid.extent();
    let center = ext * 0.5;
    let sx = ext.x / 64.0;
    let sy = ext.y / 64.0;
    rows.iter()
        .enumerate()
        .map(|(k, &(name, shape, w, h, seed))| {
            let extent = Vec2::new(w * sx, h * sy);
            let spec = match shape {
                'r' => ObjectSpec::rectangle(center, extent),
                'e' => ObjectSpec::ellipse(center, extent),
                _ => ObjectSpec::blob(center, extent, seed),
            };
            CatalogueEntry {
                name,
                seen: k == 0,
                spec,
            }
        })
        .collect()
}

pub fn seen_object(task: TaskKind, grid: &GridSpec) -> CatalogueEntry {
    catalogue(task, grid).swap_remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::spawn_object;

    #[test]
    fn every_object_covers_a_tenth_of_the_grid() {
        let grid = GridSpec::default();
        for task in TaskKind::ALL {
            let entries = catalogue(task, &grid);
            assert_eq!(entries.iter().filter(|e| e.seen).count(), 1);
            for e in entries {
                for seed in 0..5 {
                    let g = spawn_object(&e.spec, &grid, seed).unwrap();
                    let n = g.object_cells().len();
                    assert!(n * 10 >= grid.len(), "{task}/{}: {n} cells", e.name);
                }
            }
        }
    }
}
