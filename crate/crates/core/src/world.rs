//! Ground-truth workspace: a single object on a cell grid, an end-effector
//! that moves in the plane, and the task-specific tool primitives that turn
//! Actionable cells into Transformed ones.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellState, Grid, GridSpec, Vec2};
use crate::rng::{derive_seed, rng_from, stream};

/// Success threshold on the transformed fraction of the object (strict).
pub const SUCCESS_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Spread,
    Mash,
    Slice,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Spread, TaskKind::Mash, TaskKind::Slice];

    /// Episode length used when the config does not override it.
    pub fn default_horizon(self) -> usize {
        match self {
            TaskKind::Spread => 10,
            TaskKind::Mash | TaskKind::Slice => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Spread => "spread",
            TaskKind::Mash => "mash",
            TaskKind::Slice => "slice",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spread" => Ok(TaskKind::Spread),
            "mash" => Ok(TaskKind::Mash),
            "slice" => Ok(TaskKind::Slice),
            other => Err(Error::InvalidArgument(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Rectangle,
    Ellipse,
    Blob,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub shape: Shape,
    /// Workspace coordinates.
    pub center: Vec2,
    /// Full width and height in workspace units.
    pub extent: Vec2,
    #[serde(default)]
    pub blob_seed: u64,
    #[serde(default)]
    pub initial_coverage: f64,
}

impl ObjectSpec {
    pub fn rectangle(center: Vec2, extent: Vec2) -> Self {
        ObjectSpec {
            shape: Shape::Rectangle,
            center,
            extent,
            blob_seed: 0,
            initial_coverage: 0.0,
        }
    }

    pub fn ellipse(center: Vec2, extent: Vec2) -> Self {
        ObjectSpec {
            shape: Shape::Ellipse,
            ..ObjectSpec::rectangle(center, extent)
        }
    }

    pub fn blob(center: Vec2, extent: Vec2, blob_seed: u64) -> Self {
        ObjectSpec {
            shape: Shape::Blob,
            blob_seed,
            ..ObjectSpec::rectangle(center, extent)
        }
    }

    pub fn with_initial_coverage(mut self, fraction: f64) -> Self {
        self.initial_coverage = fraction;
        self
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(0.0..1.0).contains(&self.initial_coverage) {
            return Err(Error::InvalidObject(format!(
                "initial coverage must lie in [0, 1), got {}",
                self.initial_coverage
            )));
        }
        if !(self.extent.x > 0.0 && self.extent.y > 0.0) {
            return Err(Error::InvalidObject(format!(
                "extent must be positive, got ({}, {})",
                self.extent.x, self.extent.y
            )));
        }
        let margin = grid.cell_size;
        let ext = grid.extent();
        let half = self.extent * 0.5;
        let lo = self.center - half;
        let hi = self.center + half;
        if lo.x < margin || lo.y < margin || hi.x > ext.x - margin || hi.y > ext.y - margin {
            return Err(Error::InvalidObject(format!(
                "object box ({:.3}, {:.3})..({:.3}, {:.3}) leaves less than one cell of margin inside the {:.3}x{:.3} workspace",
                lo.x, lo.y, hi.x, hi.y, ext.x, ext.y
            )));
        }
        Ok(())
    }

    /// Whether the cell center `p` lies inside the shape. `blob` carries the
    /// per-episode radial profile for [`Shape::Blob`].
    fn contains(&self, p: Vec2, blob: &BlobProfile) -> bool {
        let d = p - self.center;
        let (hw, hh) = (self.extent.x * 0.5, self.extent.y * 0.5);
        match self.shape {
            Shape::Rectangle => 2.0 * d.x.abs() <= self.extent.x && 2.0 * d.y.abs() <= self.extent.y,
            Shape::Ellipse => (d.x / hw).powi(2) + (d.y / hh).powi(2) <= 1.0,
            Shape::Blob => {
                let q = Vec2::new(d.x / hw, d.y / hh);
                q.norm() <= blob.radius(q.y.atan2(q.x))
            }
        }
    }
}

/// Star-shaped radial profile in the object's normalised frame; always
/// inside the unit circle so the blob stays inside its extent.
#[derive(Debug, Clone)]
struct BlobProfile {
    rotation: f64,
    harmonics: [(f64, f64); 3],
}

impl BlobProfile {
    const BASE: f64 = 0.72;
    const MAX_AMP: f64 = 0.12;

    fn new(seed: u64) -> Self {
        let mut rng = rng_from(seed, stream::WORLD);
        let rotation = rng.random_range(0.0..2.0 * PI);
        let mut harmonics = [(0.0, 0.0); 3];
        for h in &mut harmonics {
            *h = (
                rng.random_range(0.0..Self::MAX_AMP),
                rng.random_range(0.0..2.0 * PI),
            );
        }
        BlobProfile {
            rotation,
            harmonics,
        }
    }

    fn radius(&self, theta: f64) -> f64 {
        let t = theta + self.rotation;
        let wobble: f64 = self
            .harmonics
            .iter()
            .enumerate()
            .map(|(k, &(a, ph))| a * ((k as f64 + 2.0) * t + ph).cos())
            .sum();
        Self::BASE * (1.0 + wobble)
    }
}

/// Tool geometry, in cells, plus the action bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub brush_length: f64,
    pub brush_width: f64,
    pub mash_radius: f64,
    pub slice_width: f64,
    /// Strokes a freshly loaded brush can make at full length.
    pub brush_capacity: u32,
    /// The brush is reloaded after every `refill_period`-th step.
    pub refill_period: u32,
    /// Per-axis action bound as a fraction of the shorter workspace side.
    pub a_max_fraction: f64,
}

impl Default for ToolConfig {
    fn default() -> Self {
        ToolConfig {
            brush_length: 18.0,
            brush_width: 6.0,
            mash_radius: 9.0,
            slice_width: 5.0,
            brush_capacity: 2,
            refill_period: 2,
            a_max_fraction: 0.25,
        }
    }
}

impl ToolConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("brush_length", self.brush_length),
            ("brush_width", self.brush_width),
            ("mash_radius", self.mash_radius),
            ("slice_width", self.slice_width),
            ("a_max_fraction", self.a_max_fraction),
        ];
        for (name, v) in dims {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("tool.{name} must be positive, got {v}")));
            }
        }
        if self.refill_period == 0 {
            return Err(Error::Config("tool.refill_period must be at least 1".into()));
        }
        Ok(())
    }

    pub fn a_max(&self, grid: &GridSpec) -> f64 {
        let e = grid.extent();
        self.a_max_fraction * e.x.min(e.y)
    }

    /// Radius (cells) of a disc with roughly the area one primitive covers.
    pub fn equivalent_radius(&self, task: TaskKind) -> f64 {
        match task {
            TaskKind::Spread => (self.brush_length * self.brush_width / PI).sqrt(),
            TaskKind::Mash => self.mash_radius,
            // A slice spans the object, so only its width is tool-specific;
            // the radius covers the cut plus one cell either side.
            TaskKind::Slice => self.slice_width + 1.0,
        }
    }
}

/// Everything needed to spawn an episode's world.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub grid: GridSpec,
    pub task: TaskKind,
    pub object: ObjectSpec,
    pub tool: ToolConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub dx: f64,
    pub dy: f64,
}

impl Action {
    pub const ZERO: Action = Action { dx: 0.0, dy: 0.0 };

    pub fn new(dx: f64, dy: f64) -> Self {
        Action { dx, dy }
    }

    /// Clamps each component to `[-a_max, a_max]`; non-finite components become 0.
    pub fn clamped(self, a_max: f64) -> Action {
        let c = |v: f64| if v.is_finite() { v.clamp(-a_max, a_max) } else { 0.0 };
        Action::new(c(self.dx), c(self.dy))
    }

    pub fn as_vec(self) -> Vec2 {
        Vec2::new(self.dx, self.dy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveOutcome {
    pub cells_transformed: usize,
    pub new_ee: Vec2,
    pub footprint: Vec<usize>,
}

/// Inclusive cell-index bounding box of the object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellBox {
    pub col_min: usize,
    pub row_min: usize,
    pub col_max: usize,
    pub row_max: usize,
}

impl CellBox {
    pub fn contains(&self, col: usize, row: usize) -> bool {
        (self.col_min..=self.col_max).contains(&col) && (self.row_min..=self.row_max).contains(&row)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub grid: Grid,
    pub ee_pos: Vec2,
    pub step: usize,
    pub task: TaskKind,
    pub brush_charge: u32,
    pub tool: ToolConfig,
    pub object_box: CellBox,
    /// Seed the object geometry was drawn with.
    pub seed: u64,
}

/// Rasterises `spec` onto `grid`. Blob geometry is drawn from
/// `(spec.blob_seed, seed)`; other shapes ignore `seed`.
/// Fixed start corner of the end-effector, one cell in from the origin.
pub fn home_position(grid: &GridSpec) -> Vec2 {
    Vec2::new(grid.cell_size, grid.cell_size)
}

pub fn spawn_object(spec: &ObjectSpec, grid: &GridSpec, seed: u64) -> Result<Grid> {
    grid.validate()?;
    spec.validate(grid)?;
    let profile = BlobProfile::new(derive_seed(spec.blob_seed, seed));
    let mut g = Grid::new(*grid);
    for i in 0..grid.len() {
        if spec.contains(grid.cell_center(i), &profile) {
            g.set(i, CellState::Actionable);
        }
    }
    let object = g.object_cells();
    if object.is_empty() {
        return Err(Error::InvalidObject("object covers no cell centers".into()));
    }
    let n_init = (spec.initial_coverage * object.len() as f64).round() as usize;
    for i in grow_from_corner(&g, &object, n_init) {
        g.set(i, CellState::Transformed);
    }
    Ok(g)
}

/// Picks `n` object cells grown as a 4-connected region from the
/// lowest-column (then lowest-row) object cell, always extending the frontier
/// by its lowest-column cell. The result is a column sweep that stays
/// contiguous on non-convex shapes.
fn grow_from_corner(grid: &Grid, object: &[usize], n: usize) -> Vec<usize> {
    let spec = *grid.spec();
    let key = |i: usize| {
        let (c, r) = spec.col_row(i);
        Reverse((c, r, i))
    };
    let mut taken = vec![false; spec.len()];
    let mut queued = vec![false; spec.len()];
    let mut out = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();
    let mut remaining: Vec<usize> = object.to_vec();
    remaining.sort_by_key(|&i| spec.col_row(i));
    let mut next_root = remaining.into_iter();
    while out.len() < n {
        if heap.is_empty() {
            // disconnected piece: restart from the next untaken corner cell
            match next_root.find(|&i| !taken[i]) {
                Some(root) => {
                    queued[root] = true;
                    heap.push(key(root));
                }
                None => break,
            }
        }
        let Reverse((_, _, i)) = heap.pop().unwrap();
        taken[i] = true;
        out.push(i);
        for j in spec.neighbors4(i) {
            if !queued[j] && grid.get(j).is_object() {
                queued[j] = true;
                heap.push(key(j));
            }
        }
    }
    out
}

/// Cells touched by one primitive at `pos` moving along `dir`.
///
/// - Spread: a `brush_length x brush_width` rectangle centred at `pos`, long
///   axis along `dir`; half length when the brush is empty.
/// - Mash: a disc of `mash_radius` centred at `pos`.
/// - Slice: a `slice_width` band through `pos` perpendicular to `dir`,
///   clipped to the object's bounding box. A press outside the box cuts
///   nothing.
///
/// Rectangle and band tests are half-open so an axis-aligned footprint at a
/// grid corner covers exactly `length x width` cells. Returned indices are
/// sorted.
pub fn footprint_cells(
    task: TaskKind,
    tool: &ToolConfig,
    grid: &GridSpec,
    object_box: &CellBox,
    pos: Vec2,
    dir: Vec2,
    brush_charge: u32,
) -> Vec<usize> {
    let cs = grid.cell_size;
    let dir = dir.normalized_or_x();
    let across = dir.perp();
    let in_band = |p: Vec2, half_along: f64, half_across: f64| {
        let d = p - pos;
        let u = d.dot(dir);
        let v = d.dot(across);
        -half_along <= u && u < half_along && -half_across <= v && v < half_across
    };
    let mut cells = match task {
        TaskKind::Spread => {
            let len = if brush_charge > 0 {
                tool.brush_length
            } else {
                tool.brush_length * 0.5
            };
            let (ha, hc) = (0.5 * len * cs, 0.5 * tool.brush_width * cs);
            grid.cells_within(pos, ha.hypot(hc))
                .filter(|&i| in_band(grid.cell_center(i), ha, hc))
                .collect::<Vec<_>>()
        }
        TaskKind::Mash => grid.cells_within(pos, tool.mash_radius * cs).collect(),
        TaskKind::Slice => {
            let (pc, pr) = grid.col_row(grid.cell_at(pos));
            if !object_box.contains(pc, pr) {
                return Vec::new();
            }
            let half_w = 0.5 * tool.slice_width * cs;
            let b = object_box;
            let mut v = Vec::new();
            for r in b.row_min..=b.row_max {
                for c in b.col_min..=b.col_max {
                    let i = grid.index(c, r);
                    let u = (grid.cell_center(i) - pos).dot(dir);
                    if -half_w <= u && u < half_w {
                        v.push(i);
                    }
                }
            }
            v
        }
    };
    cells.sort_unstable();
    cells
}

impl WorldState {
    /// Fresh episode: object spawned, end-effector at the workspace corner
    /// inset by one cell.
    pub fn reset(env: &EnvConfig, seed: u64) -> Result<Self> {
        env.tool.validate()?;
        let grid = spawn_object(&env.object, &env.grid, seed)?;
        let object_box = bounding_box(&grid);
        Ok(WorldState {
            grid,
            ee_pos: home_position(&env.grid),
            step: 0,
            task: env.task,
            brush_charge: if env.task == TaskKind::Spread {
                env.tool.brush_capacity
            } else {
                0
            },
            tool: env.tool,
            object_box,
            seed,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        self.grid.spec()
    }

    pub fn a_max(&self) -> f64 {
        self.tool.a_max(self.grid.spec())
    }

    pub fn footprint(&self, pos: Vec2, dir: Vec2) -> Vec<usize> {
        footprint_cells(
            self.task,
            &self.tool,
            self.grid.spec(),
            &self.object_box,
            pos,
            dir,
            self.brush_charge,
        )
    }

    /// Moves the end-effector by the clamped action and executes the task
    /// primitive at the new position.
    pub fn apply_primitive(&mut self, action: Action) -> PrimitiveOutcome {
        let a = action.clamped(self.a_max());
        let spec = *self.grid.spec();
        self.ee_pos = spec.clamp(self.ee_pos + a.as_vec());
        let footprint = self.footprint(self.ee_pos, a.as_vec());
        let mut changed = 0;
        for &i in &footprint {
            if self.grid.get(i) == CellState::Actionable {
                self.grid.set(i, CellState::Transformed);
                changed += 1;
            }
        }
        self.step += 1;
        if self.task == TaskKind::Spread {
            self.brush_charge = self.brush_charge.saturating_sub(1);
            if self.step.is_multiple_of(self.tool.refill_period as usize) {
                self.brush_charge = self.tool.brush_capacity;
            }
        }
        PrimitiveOutcome {
            cells_transformed: changed,
            new_ee: self.ee_pos,
            footprint,
        }
    }

    /// Transformed fraction of the object strictly above 95%.
    pub fn is_success(&self) -> bool {
        let c = self.grid.counts();
        c.object() > 0 && c.transformed as f64 > SUCCESS_FRACTION * c.object() as f64
    }
}

fn bounding_box(grid: &Grid) -> CellBox {
    let spec = grid.spec();
    let mut b = CellBox {
        col_min: usize::MAX,
        row_min: usize::MAX,
        col_max: 0,
        row_max: 0,
    };
    for i in grid.object_cells() {
        let (c, r) = spec.col_row(i);
        b.col_min = b.col_min.min(c);
        b.row_min = b.row_min.min(r);
        b.col_max = b.col_max.max(c);
        b.row_max = b.row_max.max(r);
    }
    b
}
