//! Non-learned controllers and the interface every controller implements.
//!
//! The greedy controller scores a ring of candidate displacements by how many
//! Actionable cells lie near each candidate endpoint and moves to the best
//! one. The object-mask variant scores all object cells instead, ignoring
//! which ones are already transformed.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellState, GridSpec, Vec2};
use crate::perception::SpocMap;
use crate::rng::{rng_from, stream, Rng};
use crate::world::{Action, TaskKind, ToolConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub cur_map: SpocMap,
    /// Equal to `cur_map` at step 0.
    pub prev_map: SpocMap,
    pub ee_pos: Vec2,
    pub step: usize,
}

impl Observation {
    pub fn first(map: SpocMap, ee_pos: Vec2) -> Self {
        Observation {
            prev_map: map.clone(),
            cur_map: map,
            ee_pos,
            step: 0,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        self.cur_map.spec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
    SeededRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyConfig {
    pub num_directions: usize,
    /// Candidate displacement length; `None` uses the action bound.
    pub step_mag: Option<f64>,
    /// Neighbourhood radius in cells; `None` uses the task footprint's
    /// equivalent radius.
    pub neighborhood_radius: Option<f64>,
    pub tie_break: TieBreak,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            num_directions: 8,
            step_mag: None,
            neighborhood_radius: None,
            tie_break: TieBreak::LowestIndex,
        }
    }
}

/// [`GreedyConfig`] with every default resolved against a task and grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedGreedy {
    pub num_directions: usize,
    pub step_mag: f64,
    /// Workspace units.
    pub radius: f64,
    pub tie_break: TieBreak,
}

impl GreedyConfig {
    pub fn resolve(&self, task: TaskKind, tool: &ToolConfig, grid: &GridSpec) -> Result<ResolvedGreedy> {
        let a_max = tool.a_max(grid);
        let step_mag = self.step_mag.unwrap_or(a_max);
        let radius_cells = self
            .neighborhood_radius
            .unwrap_or_else(|| tool.equivalent_radius(task));
        if self.num_directions < 2 {
            return Err(Error::Config(format!(
                "greedy.num_directions must be at least 2, got {}",
                self.num_directions
            )));
        }
        if !(step_mag > 0.0 && step_mag <= a_max) {
            return Err(Error::Config(format!(
                "greedy.step_mag must lie in (0, {a_max}], got {step_mag}"
            )));
        }
        if !(radius_cells >= 1.0) {
            return Err(Error::Config(format!(
                "greedy.neighborhood_radius must be at least 1 cell, got {radius_cells}"
            )));
        }
        Ok(ResolvedGreedy {
            num_directions: self.num_directions,
            step_mag,
            radius: radius_cells * grid.cell_size,
            tie_break: self.tie_break,
        })
    }
}

impl ResolvedGreedy {
    /// Candidate `i`: `step_mag * (cos 2*pi*i/n, sin 2*pi*i/n)`.
    pub fn candidate(&self, i: usize) -> Action {
        let th = 2.0 * PI * i as f64 / self.num_directions as f64;
        Action::new(self.step_mag * th.cos(), self.step_mag * th.sin())
    }

    pub fn endpoint(&self, spec: &GridSpec, ee: Vec2, i: usize) -> Vec2 {
        spec.clamp(ee + self.candidate(i).as_vec())
    }
}

/// Per-candidate neighbourhood counts of cells matching `counted`.
pub fn candidate_scores(
    obs: &Observation,
    cfg: &ResolvedGreedy,
    counted: impl Fn(CellState) -> bool,
) -> Vec<usize> {
    let spec = obs.spec();
    (0..cfg.num_directions)
        .map(|i| {
            let p = cfg.endpoint(spec, obs.ee_pos, i);
            spec.cells_within(p, cfg.radius)
                .filter(|&j| counted(obs.cur_map.label(j)))
                .count()
        })
        .collect()
}

/// Index of the chosen candidate, or `None` when no counted cell exists.
fn choose_direction(
    obs: &Observation,
    cfg: &ResolvedGreedy,
    counted: impl Fn(CellState) -> bool + Copy,
    rng: Option<&mut Rng>,
) -> Option<usize> {
    let scores = candidate_scores(obs, cfg, counted);
    let best = *scores.iter().max().unwrap();
    if best > 0 {
        let ties: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
        return Some(match (cfg.tie_break, rng) {
            (TieBreak::SeededRandom, Some(rng)) => *ties.choose(rng).unwrap(),
            _ => ties[0],
        });
    }
    // Nothing in reach: head for the candidate whose endpoint is closest to
    // any counted cell.
    let spec = obs.spec();
    let targets: Vec<Vec2> = (0..spec.len())
        .filter(|&j| counted(obs.cur_map.label(j)))
        .map(|j| spec.cell_center(j))
        .collect();
    if targets.is_empty() {
        return None;
    }
    let dist = |i: usize| {
        let p = cfg.endpoint(spec, obs.ee_pos, i);
        targets.iter().map(|t| t.dist2(p)).fold(f64::INFINITY, f64::min)
    };
    let mut best_i = 0;
    let mut best_d = dist(0);
    for i in 1..cfg.num_directions {
        let d = dist(i);
        if d < best_d {
            best_d = d;
            best_i = i;
        }
    }
    Some(best_i)
}

fn is_actionable(s: CellState) -> bool {
    s == CellState::Actionable
}

/// Greedy step toward the densest Actionable neighbourhood.
pub fn greedy_action(obs: &Observation, cfg: &ResolvedGreedy, rng: Option<&mut Rng>) -> Action {
    choose_direction(obs, cfg, is_actionable, rng).map_or(Action::ZERO, |i| cfg.candidate(i))
}

/// Like [`greedy_action`] but counts every object cell, Actionable or not.
pub fn objmask_action(obs: &Observation, cfg: &ResolvedGreedy, rng: Option<&mut Rng>) -> Action {
    choose_direction(obs, cfg, CellState::is_object, rng).map_or(Action::ZERO, |i| cfg.candidate(i))
}

/// Each component uniform on `[-a_max, a_max]`.
pub fn random_action(rng: &mut Rng, a_max: f64) -> Action {
    Action::new(rng.random_range(-a_max..=a_max), rng.random_range(-a_max..=a_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Random,
    SpartaG,
    Objmask,
    SpartaL,
    SparseL,
    GoaldistL,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Random,
        PolicyKind::SpartaG,
        PolicyKind::Objmask,
        PolicyKind::SpartaL,
        PolicyKind::SparseL,
        PolicyKind::GoaldistL,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::SpartaG => "sparta_g",
            PolicyKind::Objmask => "objmask",
            PolicyKind::SpartaL => "sparta_l",
            PolicyKind::SparseL => "sparse_l",
            PolicyKind::GoaldistL => "goaldist_l",
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, PolicyKind::SpartaL | PolicyKind::SparseL | PolicyKind::GoaldistL)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown policy `{s}`")))
    }
}

/// A controller's choice for one step. `log_prob` is set by stochastic
/// learned policies and feeds the entropy reward term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub action: Action,
    pub log_prob: Option<f64>,
}

impl From<Action> for Decision {
    fn from(action: Action) -> Self {
        Decision {
            action,
            log_prob: None,
        }
    }
}

pub trait Controller {
    fn name(&self) -> &str;

    /// Called before each episode with that episode's seed.
    fn begin_episode(&mut self, _seed: u64) {}

    fn act(&mut self, obs: &Observation) -> Result<Decision>;
}

pub struct GreedyController {
    cfg: ResolvedGreedy,
    objmask: bool,
    rng: Rng,
}

impl GreedyController {
    pub fn sparta_g(cfg: ResolvedGreedy) -> Self {
        GreedyController {
            cfg,
            objmask: false,
            rng: rng_from(0, stream::POLICY),
        }
    }

    pub fn objmask(cfg: ResolvedGreedy) -> Self {
        GreedyController {
            objmask: true,
            ..GreedyController::sparta_g(cfg)
        }
    }
}

impl Controller for GreedyController {
    fn name(&self) -> &str {
        if self.objmask {
            "objmask"
        } else {
            "sparta_g"
        }
    }

    fn begin_episode(&mut self, seed: u64) {
        self.rng = rng_from(seed, stream::POLICY);
    }

    fn act(&mut self, obs: &Observation) -> Result<Decision> {
        let a = if self.objmask {
            objmask_action(obs, &self.cfg, Some(&mut self.rng))
        } else {
            greedy_action(obs, &self.cfg, Some(&mut self.rng))
        };
        Ok(a.into())
    }
}

pub struct RandomController {
    a_max: f64,
    rng: Rng,
}

impl RandomController {
    pub fn new(a_max: f64) -> Self {
        RandomController {
            a_max,
            rng: rng_from(0, stream::POLICY),
        }
    }
}

impl Controller for RandomController {
    fn name(&self) -> &str {
        "random"
    }

    fn begin_episode(&mut self, seed: u64) {
        self.rng = rng_from(seed, stream::POLICY);
    }

    fn act(&mut self, _obs: &Observation) -> Result<Decision> {
        Ok(random_action(&mut self.rng, self.a_max).into())
    }
}

/// Open-loop boustrophedon sweep over the object's bounding box as seen in
/// the first observation. Tile spacing follows the tool footprint so the
/// sweep covers the whole box given enough steps.
pub struct ScriptedSweep {
    task: TaskKind,
    tool: ToolConfig,
    a_max: f64,
    waypoints: Vec<Vec2>,
    next: usize,
}

impl ScriptedSweep {
    pub fn new(task: TaskKind, tool: ToolConfig, grid: &GridSpec) -> Self {
        ScriptedSweep {
            task,
            tool,
            a_max: tool.a_max(grid),
            waypoints: Vec::new(),
            next: 0,
        }
    }

    fn plan(&mut self, map: &SpocMap) {
        let spec = *map.spec();
        let cs = spec.cell_size;
        let object = map.grid.object_cells();
        let (mut c0, mut r0, mut c1, mut r1) = (usize::MAX, usize::MAX, 0, 0);
        for &i in &object {
            let (c, r) = spec.col_row(i);
            c0 = c0.min(c);
            r0 = r0.min(r);
            c1 = c1.max(c);
            r1 = r1.max(r);
        }
        // (step along a row, step between rows), in cells
        let (sx, sy) = match self.task {
            TaskKind::Spread => (self.tool.brush_length, self.tool.brush_width),
            TaskKind::Mash => {
                let s = (self.tool.mash_radius * std::f64::consts::SQRT_2).floor().max(1.0);
                (s, s)
            }
            TaskKind::Slice => (self.tool.slice_width, (r1 + 1 - r0) as f64),
        };
        let x0 = c0 as f64 + 0.5 * sx.min((c1 + 1 - c0) as f64);
        let y0 = r0 as f64 + 0.5 * sy.min((r1 + 1 - r0) as f64);
        let mut ys = vec![];
        let mut y = y0;
        while y < (r1 + 1) as f64 + 1e-9 {
            ys.push(y);
            y += sy;
        }
        let mut xs = vec![];
        let mut x = x0;
        while x < (c1 + 1) as f64 + 1e-9 {
            xs.push(x);
            x += sx;
        }
        self.waypoints.clear();
        for (row, &y) in ys.iter().enumerate() {
            let mut line: Vec<Vec2> = xs.iter().map(|&x| Vec2::new(x * cs, y * cs)).collect();
            if row % 2 == 1 {
                line.reverse();
            }
            self.waypoints.extend(line);
        }
        self.next = 0;
    }
}

impl Controller for ScriptedSweep {
    fn name(&self) -> &str {
        "scripted"
    }

    fn begin_episode(&mut self, _seed: u64) {
        self.waypoints.clear();
        self.next = 0;
    }

    fn act(&mut self, obs: &Observation) -> Result<Decision> {
        if obs.step == 0 || self.waypoints.is_empty() {
            self.plan(&obs.cur_map);
        }
        while self.next < self.waypoints.len() && self.waypoints[self.next].dist2(obs.ee_pos) < 1e-12 {
            self.next += 1;
        }
        let Some(&target) = self.waypoints.get(self.next) else {
            return Ok(Action::ZERO.into());
        };
        let d = target - obs.ee_pos;
        Ok(Action::new(d.x, d.y).clamped(self.a_max).into())
    }
}
