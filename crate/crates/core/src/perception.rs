//! Affordance maps observed from ground truth.
//!
//! A classification pass partitions the object into regions by farthest-point
//! sampling and asks a [`RegionClassifier`] to label each one. Between passes
//! a tracker carries the Transformed set forward, adding newly transformed
//! cells. [`NoiseModel`] injects region misclassification, boundary
//! dilation/erosion, and per-frame label flips along the
//! Actionable/Transformed frontier.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellState, Grid, GridSpec, LabelCounts, Mask};
use crate::rng::{rng_from, stream, Rng};
use crate::world::WorldState;

/// Observed segmentation: same grid and label set as ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SpocMap {
    pub grid: Grid,
    pub frame_index: usize,
}

impl SpocMap {
    pub fn new(grid: Grid, frame_index: usize) -> Self {
        SpocMap { grid, frame_index }
    }

    /// Exact observation of the world.
    pub fn from_world(world: &WorldState, frame_index: usize) -> Self {
        SpocMap::new(world.grid.clone(), frame_index)
    }

    pub fn spec(&self) -> &GridSpec {
        self.grid.spec()
    }

    pub fn counts(&self) -> LabelCounts {
        self.grid.counts()
    }

    pub fn label(&self, index: usize) -> CellState {
        self.grid.get(index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    spec: GridSpec,
    /// Seed cells in selection order.
    pub seeds: Vec<usize>,
    /// Object cells, ascending.
    pub cells: Vec<usize>,
    /// Region of `cells[j]`, an index into `seeds`.
    pub region_of: Vec<usize>,
}

impl RegionPartition {
    pub fn k(&self) -> usize {
        self.seeds.len()
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn region_id(&self, cell: usize) -> Option<usize> {
        self.cells
            .binary_search(&cell)
            .ok()
            .map(|j| self.region_of[j])
    }

    /// Cells grouped by region, each group ascending.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut g = vec![Vec::new(); self.k()];
        for (&c, &r) in self.cells.iter().zip(&self.region_of) {
            g[r].push(c);
        }
        g
    }
}

/// Region count used when none is configured: one region per ~50 object
/// cells, at least 4, never more than the object has cells.
pub fn default_region_count(object_cells: usize) -> usize {
    ((object_cells as f64 / 50.0).round() as usize)
        .max(4)
        .min(object_cells)
}

fn cell_xy(spec: &GridSpec, i: usize) -> (i64, i64) {
    let (c, r) = spec.col_row(i);
    (c as i64, r as i64)
}

fn d2(a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - b.0).pow(2) + (a.1 - b.1).pow(2)
}

/// Farthest-point partition of `object_cells` into `k` regions.
///
/// The first seed is the cell nearest the object centroid; each further seed
/// maximises the squared distance to the nearest chosen seed. Ties, both in
/// seed choice and in the final nearest-seed assignment, go to the smallest
/// row-major index.
pub fn partition_regions(spec: &GridSpec, object_cells: &[usize], k: usize) -> Result<RegionPartition> {
    if k == 0 {
        return Err(Error::InvalidArgument("region count must be at least 1".into()));
    }
    if k > object_cells.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot place {k} seeds in {} object cells",
            object_cells.len()
        )));
    }
    let mut cells = object_cells.to_vec();
    cells.sort_unstable();
    cells.dedup();
    let xy: Vec<(i64, i64)> = cells.iter().map(|&i| cell_xy(spec, i)).collect();

    let n = cells.len() as f64;
    let cx = xy.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let cy = xy.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let mut first = 0;
    let mut best = f64::INFINITY;
    for (j, p) in xy.iter().enumerate() {
        let d = (p.0 as f64 - cx).powi(2) + (p.1 as f64 - cy).powi(2);
        if d < best {
            best = d;
            first = j;
        }
    }

    let mut seeds_local = vec![first];
    let mut min_d: Vec<i64> = xy.iter().map(|&p| d2(p, xy[first])).collect();
    while seeds_local.len() < k {
        let mut arg = 0;
        for j in 1..min_d.len() {
            if min_d[j] > min_d[arg] {
                arg = j;
            }
        }
        seeds_local.push(arg);
        for (m, &p) in min_d.iter_mut().zip(&xy) {
            *m = (*m).min(d2(p, xy[arg]));
        }
    }

    let seeds: Vec<usize> = seeds_local.iter().map(|&j| cells[j]).collect();
    let region_of = xy
        .iter()
        .map(|&p| {
            (0..seeds.len())
                .min_by_key(|&r| (d2(p, xy[seeds_local[r]]), seeds[r]))
                .unwrap()
        })
        .collect();
    Ok(RegionPartition {
        spec: *spec,
        seeds,
        cells,
        region_of,
    })
}

/// Labels one region of the object. Stands in for the vision-language model.
pub trait RegionClassifier {
    fn classify(&mut self, region: &[usize], truth: &Grid) -> CellState;
}

/// Majority vote over the ground truth of the region (ties go to
/// Actionable), inverted with probability `error_rate`.
#[derive(Debug, Clone)]
pub struct ClassifierOracle {
    pub error_rate: f64,
    rng: Rng,
}

impl ClassifierOracle {
    pub fn new(error_rate: f64, seed: u64) -> Self {
        ClassifierOracle {
            error_rate,
            rng: rng_from(seed, stream::PERCEPTION ^ 0xC1A5),
        }
    }
}

pub fn majority_label(region: &[usize], truth: &Grid) -> CellState {
    let t = region
        .iter()
        .filter(|&&i| truth.get(i) == CellState::Transformed)
        .count();
    if 2 * t > region.len() {
        CellState::Transformed
    } else {
        CellState::Actionable
    }
}

impl RegionClassifier for ClassifierOracle {
    fn classify(&mut self, region: &[usize], truth: &Grid) -> CellState {
        let label = majority_label(region, truth);
        let flip = if self.error_rate >= 1.0 {
            true
        } else if self.error_rate <= 0.0 {
            false
        } else {
            self.rng.random_bool(self.error_rate)
        };
        if flip {
            label.inverted()
        } else {
            label
        }
    }
}

fn label_groups(groups: &[Vec<usize>], truth: &Grid, classifier: &mut dyn RegionClassifier) -> Grid {
    let mut out = Grid::new(*truth.spec());
    for g in groups.iter().filter(|g| !g.is_empty()) {
        let label = classifier.classify(g, truth);
        for &i in g {
            out.set(i, label);
        }
    }
    out
}

/// One classification pass over an explicit partition: every region gets a
/// single label, Background passes through.
pub fn classify_regions(partition: &RegionPartition, truth: &Grid, classifier: &mut dyn RegionClassifier) -> Grid {
    label_groups(&partition.groups(), truth, classifier)
}

/// Splits every region along the visible Actionable/Transformed boundary, so
/// each sub-region is homogeneous in ground truth. This is what a segmenter
/// that sees the appearance change produces before the regions are
/// classified.
pub fn split_by_appearance(partition: &RegionPartition, truth: &Grid) -> Vec<Vec<usize>> {
    partition
        .groups()
        .into_iter()
        .flat_map(|g| {
            let (t, a): (Vec<usize>, Vec<usize>) =
                g.into_iter().partition(|&i| truth.get(i) == CellState::Transformed);
            [a, t]
        })
        .filter(|g| !g.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Per-frame flip probability for cells on the Actionable/Transformed frontier.
    pub flip_prob: f64,
    /// Dilation (positive) or erosion (negative) applied to newly tracked cells.
    pub dilate_radius: i32,
    /// Frames between full classification passes.
    pub reclassify_period: usize,
    /// Probability that the classifier inverts a region label.
    pub error_rate: f64,
    /// Regions per classification pass; `None` scales with object area.
    pub regions: Option<usize>,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            flip_prob: 0.02,
            dilate_radius: 1,
            reclassify_period: 4,
            error_rate: 0.05,
            regions: None,
        }
    }
}

impl NoiseModel {
    /// Exact perception.
    pub fn none() -> Self {
        NoiseModel {
            flip_prob: 0.0,
            dilate_radius: 0,
            error_rate: 0.0,
            ..NoiseModel::default()
        }
    }

    /// Only frontier flips, everything else exact.
    pub fn boundary_flips(flip_prob: f64) -> Self {
        NoiseModel {
            flip_prob,
            ..NoiseModel::none()
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.flip_prob == 0.0 && self.dilate_radius == 0 && self.error_rate == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.2).contains(&self.flip_prob) {
            return Err(Error::Config(format!("noise.flip_prob must lie in [0, 0.2], got {}", self.flip_prob)));
        }
        if self.dilate_radius.abs() > 2 {
            return Err(Error::Config(format!(
                "noise.dilate_radius must lie in [-2, 2], got {}",
                self.dilate_radius
            )));
        }
        if self.reclassify_period == 0 {
            return Err(Error::Config("noise.reclassify_period must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.error_rate) {
            return Err(Error::Config(format!("noise.error_rate must lie in [0, 1], got {}", self.error_rate)));
        }
        if self.regions == Some(0) {
            return Err(Error::Config("noise.regions must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which path produced a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FramePath {
    Classify,
    Propagate,
}

/// Tracker state carried between frames.
#[derive(Debug, Clone)]
pub struct PerceptionState {
    pub last_map: Option<SpocMap>,
    pub frames_since_reclassify: usize,
    /// Tracked Transformed set, before per-frame flips.
    tracked: Option<Mask>,
    /// Ground-truth Transformed set at the previous frame.
    last_truth: Option<Mask>,
    frame: usize,
    oracle: ClassifierOracle,
    rng: Rng,
}

impl PerceptionState {
    pub fn new(noise: &NoiseModel, seed: u64) -> Self {
        PerceptionState {
            last_map: None,
            frames_since_reclassify: 0,
            tracked: None,
            last_truth: None,
            frame: 0,
            oracle: ClassifierOracle::new(noise.error_rate, seed),
            rng: rng_from(seed, stream::PERCEPTION),
        }
    }

    /// Path the next call to [`PerceptionState::observe`] will take.
    pub fn next_path(&self, noise: &NoiseModel) -> FramePath {
        if self.tracked.is_none() || self.frames_since_reclassify + 1 >= noise.reclassify_period {
            FramePath::Classify
        } else {
            FramePath::Propagate
        }
    }

    /// Produces this frame's observation.
    pub fn observe(&mut self, truth: &WorldState, noise: &NoiseModel) -> SpocMap {
        match self.next_path(noise) {
            FramePath::Classify => self.classify_pass(&truth.grid, noise),
            FramePath::Propagate => self.propagate(&truth.grid, noise),
        }
        self.emit(&truth.grid, noise)
    }

    fn classify_pass(&mut self, truth: &Grid, noise: &NoiseModel) {
        let object = truth.object_cells();
        let k = noise
            .regions
            .unwrap_or_else(|| default_region_count(object.len()))
            .min(object.len())
            .max(1);
        let partition =
            partition_regions(truth.spec(), &object, k).expect("region count bounded by object size");
        let groups = split_by_appearance(&partition, truth);
        let labels = label_groups(&groups, truth, &mut self.oracle);
        self.tracked = Some(Mask::from_grid(&labels, |s| s == CellState::Transformed));
        self.last_truth = Some(Mask::from_grid(truth, |s| s == CellState::Transformed));
        self.frames_since_reclassify = 0;
    }

    /// Union of the tracked set with the cells that became Transformed in
    /// ground truth since the last frame, dilated or eroded by the noise model
    /// and clipped to the object.
    fn propagate(&mut self, truth: &Grid, noise: &NoiseModel) {
        let now = Mask::from_grid(truth, |s| s == CellState::Transformed);
        let fresh = now.and_not(self.last_truth.as_ref().expect("initialised by classify pass"));
        let object = Mask::from_grid(truth, CellState::is_object);
        let r = noise.dilate_radius.unsigned_abs() as usize;
        let perturbed = if noise.dilate_radius >= 0 {
            fresh.dilate(r)
        } else {
            fresh.erode(r)
        }
        .and(&object);
        let tracked = self.tracked.take().expect("initialised by classify pass");
        self.tracked = Some(tracked.or(&perturbed));
        self.last_truth = Some(now);
        self.frames_since_reclassify += 1;
    }

    fn emit(&mut self, truth: &Grid, noise: &NoiseModel) -> SpocMap {
        let spec = *truth.spec();
        let tracked = self.tracked.as_ref().expect("initialised by classify pass");
        let mut grid = Grid::new(spec);
        for i in 0..spec.len() {
            if truth.get(i).is_object() {
                grid.set(
                    i,
                    if tracked.get(i) {
                        CellState::Transformed
                    } else {
                        CellState::Actionable
                    },
                );
            }
        }
        if noise.flip_prob > 0.0 {
            let band = frontier_band(&grid);
            for i in band {
                if self.rng.random_bool(noise.flip_prob) {
                    grid.set(i, grid.get(i).inverted());
                }
            }
        }
        let map = SpocMap::new(grid, self.frame);
        self.frame += 1;
        self.last_map = Some(map.clone());
        map
    }
}

/// Object cells with a 4-neighbour object cell of the other label.
pub fn frontier_band(grid: &Grid) -> Vec<usize> {
    let spec = grid.spec();
    (0..spec.len())
        .filter(|&i| {
            let s = grid.get(i);
            s.is_object()
                && spec
                    .neighbors4(i)
                    .any(|j| grid.get(j).is_object() && grid.get(j) != s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Vec2;
    use crate::world::{Action, EnvConfig, ObjectSpec, TaskKind, ToolConfig};

    fn strip_spec() -> GridSpec {
        GridSpec::new(16, 8, 1.0).unwrap()
    }

    #[test]
    fn single_region_covers_object() {
        let spec = strip_spec();
        let cells: Vec<usize> = (0..10).map(|c| spec.index(c + 2, 3)).collect();
        let p = partition_regions(&spec, &cells, 1).unwrap();
        assert_eq!(p.k(), 1);
        assert!(p.region_of.iter().all(|&r| r == 0));
    }

    #[test]
    fn second_seed_is_far_endpoint() {
        let spec = strip_spec();
        // 1x10 strip, cells 0..10 along a row; centroid 4.5 ties between 4 and 5.
        let cells: Vec<usize> = (0..10).map(|c| spec.index(c, 0)).collect();
        let p = partition_regions(&spec, &cells, 2).unwrap();
        assert_eq!(p.seeds[0], spec.index(4, 0));
        assert_eq!(p.seeds[1], spec.index(9, 0));
        // with the first seed forced to cell 5 the far endpoint is cell 0
        let shifted: Vec<usize> = (0..11).map(|c| spec.index(c, 0)).collect();
        let p = partition_regions(&spec, &shifted, 2).unwrap();
        assert_eq!(p.seeds[0], spec.index(5, 0));
        assert_eq!(p.seeds[1], spec.index(0, 0));
    }

    #[test]
    fn too_many_regions_rejected() {
        let spec = strip_spec();
        let cells = vec![1, 2, 3];
        assert!(partition_regions(&spec, &cells, 4).is_err());
        assert!(partition_regions(&spec, &cells, 0).is_err());
    }

    fn two_region_truth(t_in_first: usize) -> (Grid, RegionPartition) {
        let spec = strip_spec();
        let mut g = Grid::new(spec);
        let cells: Vec<usize> = (0..10).map(|c| spec.index(c, 2)).collect();
        for &i in &cells {
            g.set(i, CellState::Actionable);
        }
        let p = partition_regions(&spec, &cells, 2).unwrap();
        let groups = p.groups();
        for &i in groups[0].iter().take(t_in_first) {
            g.set(i, CellState::Transformed);
        }
        (g, p)
    }

    #[test]
    fn majority_vote_and_tie_break() {
        let (g, p) = two_region_truth(4);
        let groups = p.groups();
        assert_eq!(groups[0].len(), 7);
        let mut oracle = ClassifierOracle::new(0.0, 0);
        let out = classify_regions(&p, &g, &mut oracle);
        assert!(groups[0].iter().all(|&i| out.get(i) == CellState::Transformed));
        assert!(groups[1].iter().all(|&i| out.get(i) == CellState::Actionable));

        // 2 of 4 transformed is a tie, so Actionable wins
        let spec = strip_spec();
        let mut g = Grid::new(spec);
        let cells: Vec<usize> = (0..4).map(|c| spec.index(c, 0)).collect();
        for (n, &i) in cells.iter().enumerate() {
            g.set(i, if n < 2 { CellState::Transformed } else { CellState::Actionable });
        }
        let p = partition_regions(&spec, &cells, 1).unwrap();
        let out = classify_regions(&p, &g, &mut ClassifierOracle::new(0.0, 0));
        assert!(cells.iter().all(|&i| out.get(i) == CellState::Actionable));
        assert_eq!(out.get(spec.index(10, 5)), CellState::Background);
    }

    #[test]
    fn forced_error_inverts_every_region() {
        let (g, p) = two_region_truth(5);
        let out = classify_regions(&p, &g, &mut ClassifierOracle::new(1.0, 0));
        let groups = p.groups();
        assert!(groups[0].iter().all(|&i| out.get(i) == CellState::Actionable));
        assert!(groups[1].iter().all(|&i| out.get(i) == CellState::Transformed));
    }

    fn world(initial: f64) -> WorldState {
        let env = EnvConfig {
            grid: GridSpec::default(),
            task: TaskKind::Mash,
            object: ObjectSpec::rectangle(Vec2::new(32.0, 32.0), Vec2::new(24.0, 20.0))
                .with_initial_coverage(initial),
            tool: ToolConfig::default(),
        };
        WorldState::reset(&env, 0).unwrap()
    }

    #[test]
    fn noiseless_observation_equals_truth() {
        let noise = NoiseModel::none();
        let mut w = world(0.3);
        let mut ps = PerceptionState::new(&noise, 1);
        for k in 0..9 {
            let m = ps.observe(&w, &noise);
            assert_eq!(m.grid, w.grid, "frame {k}");
            assert_eq!(m.frame_index, k);
            w.apply_primitive(Action::new(9.0, 7.0));
        }
    }

    #[test]
    fn scheduling_follows_period() {
        let noise = NoiseModel {
            reclassify_period: 4,
            ..NoiseModel::none()
        };
        let w = world(0.0);
        let mut ps = PerceptionState::new(&noise, 1);
        let mut paths = vec![];
        for _ in 0..9 {
            paths.push(ps.next_path(&noise));
            ps.observe(&w, &noise);
        }
        use FramePath::*;
        assert_eq!(
            paths,
            vec![Classify, Propagate, Propagate, Propagate, Classify, Propagate, Propagate, Propagate, Classify]
        );
    }

    #[test]
    fn tracking_is_monotone_without_flips() {
        let noise = NoiseModel {
            flip_prob: 0.0,
            dilate_radius: -1,
            reclassify_period: 100,
            error_rate: 0.3,
            regions: None,
        };
        let mut w = world(0.2);
        let mut ps = PerceptionState::new(&noise, 5);
        let mut prev = ps.observe(&w, &noise);
        for _ in 0..5 {
            w.apply_primitive(Action::new(6.0, 5.0));
            let cur = ps.observe(&w, &noise);
            for i in 0..prev.grid.cells().len() {
                if prev.label(i) == CellState::Transformed {
                    assert_eq!(cur.label(i), CellState::Transformed);
                }
            }
            prev = cur;
        }
    }

    #[test]
    fn dilation_of_new_block_clipped_to_object() {
        // object 20x20, a fresh 10x10 transformed block touching the object edge
        let spec = GridSpec::new(32, 32, 1.0).unwrap();
        let env = EnvConfig {
            grid: spec,
            task: TaskKind::Mash,
            object: ObjectSpec::rectangle(Vec2::new(16.0, 16.0), Vec2::new(20.0, 20.0)),
            tool: ToolConfig::default(),
        };
        let mut w = WorldState::reset(&env, 0).unwrap();
        let noise = NoiseModel {
            dilate_radius: 1,
            ..NoiseModel::none()
        };
        let mut ps = PerceptionState::new(&noise, 0);
        ps.observe(&w, &noise);
        let mut block = Mask::new(32, 32);
        for r in 6..16 {
            for c in 6..16 {
                let i = spec.index(c, r);
                w.grid.set(i, CellState::Transformed);
                block.set(i, true);
            }
        }
        let m = ps.observe(&w, &noise);
        let object = Mask::from_grid(&w.grid, CellState::is_object);
        // independent oracle: cells within distance 1 of the block, inside the object
        let mut expected = Mask::new(32, 32);
        for i in 0..spec.len() {
            let (c, r) = spec.col_row(i);
            let near = block.iter_set().any(|j| {
                let (bc, br) = spec.col_row(j);
                (c as i64 - bc as i64).pow(2) + (r as i64 - br as i64).pow(2) <= 1
            });
            expected.set(i, near && object.get(i));
        }
        let observed = Mask::from_grid(&m.grid, |s| s == CellState::Transformed);
        assert_eq!(observed, expected);
        assert_eq!(observed.count(), 120);
    }

    #[test]
    fn flips_stay_on_frontier() {
        let noise = NoiseModel {
            flip_prob: 0.2,
            ..NoiseModel::none()
        };
        let w = world(0.5);
        let mut ps = PerceptionState::new(&noise, 9);
        let band = frontier_band(&w.grid);
        let mut flipped_any = false;
        for _ in 0..6 {
            let m = ps.observe(&w, &noise);
            for i in 0..w.grid.cells().len() {
                if m.label(i) != w.grid.get(i) {
                    assert!(band.contains(&i));
                    flipped_any = true;
                }
            }
        }
        assert!(flipped_any);
    }

    #[test]
    fn observation_is_deterministic() {
        let noise = NoiseModel::default();
        let run = || {
            let mut w = world(0.1);
            let mut ps = PerceptionState::new(&noise, 42);
            let mut maps = vec![];
            for _ in 0..8 {
                maps.push(ps.observe(&w, &noise));
                w.apply_primitive(Action::new(7.0, 6.0));
            }
            maps
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseModel::default().validate().is_ok());
        assert!(NoiseModel { flip_prob: 0.3, ..NoiseModel::none() }.validate().is_err());
        assert!(NoiseModel { dilate_radius: 3, ..NoiseModel::none() }.validate().is_err());
        assert!(NoiseModel { reclassify_period: 0, ..NoiseModel::none() }.validate().is_err());
    }
}
