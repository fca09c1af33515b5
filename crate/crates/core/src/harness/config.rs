//! Experiment configuration, read from TOML with strict key checking.
//!
//! Every section is optional and falls back to its defaults:
//!
//! ```toml
//! [task]
//! kind = "mash"
//! objects = ["rectangle", "ellipse"]
//!
//! [policy]
//! kind = "sparta_g"
//!
//! [experiment]
//! seeds = 3
//! eval_rollouts = 5
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::catalogue::{catalogue, CatalogueEntry};
use crate::env::RewardMode;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::learn::{checkpoint, feature_dim, LearnedController, SacConfig};
use crate::perception::NoiseModel;
use crate::policy::{Controller, GreedyConfig, GreedyController, PolicyKind, RandomController};
use crate::reward::RewardWeights;
use crate::world::{EnvConfig, TaskKind, ToolConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    pub kind: TaskKind,
    /// Overrides the task's default episode length.
    pub horizon: Option<usize>,
    /// Catalogue entries to use; empty means all of them.
    pub objects: Vec<String>,
    /// Fraction of each object transformed at reset.
    pub initial_coverage: f64,
}

impl Default for TaskSection {
    fn default() -> Self {
        TaskSection {
            kind: TaskKind::Spread,
            horizon: None,
            objects: Vec::new(),
            initial_coverage: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    pub kind: PolicyKind,
    /// Learned policies act with the mean action.
    pub deterministic: bool,
    /// Checkpoint for a learned policy in `run` and `render`.
    pub checkpoint: Option<PathBuf>,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            kind: PolicyKind::SpartaG,
            deterministic: true,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Training episodes per seed.
    pub episodes: usize,
    pub eval_rollouts: usize,
    /// Number of seeds; seed `i` is the command-line seed plus `i`.
    pub seeds: usize,
    /// Tasks for `matrix` and `ablate-efficiency`; empty means `[task].kind`.
    pub tasks: Vec<TaskKind>,
    /// Policies for `matrix`.
    pub policies: Vec<PolicyKind>,
    /// Where `matrix` looks for learned-policy checkpoints.
    pub checkpoint_dir: Option<PathBuf>,
    pub efficiency_episodes: usize,
    pub efficiency_initial_coverage: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            episodes: 500,
            eval_rollouts: 5,
            seeds: 3,
            tasks: Vec::new(),
            policies: vec![PolicyKind::Random, PolicyKind::SpartaG],
            checkpoint_dir: None,
            efficiency_episodes: 30,
            efficiency_initial_coverage: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSection {
    /// Pixels per cell edge.
    pub scale: usize,
}

impl Default for RenderSection {
    fn default() -> Self {
        RenderSection { scale: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskSection,
    pub grid: GridSpec,
    pub tool: ToolConfig,
    pub noise: NoiseModel,
    pub reward: RewardWeights,
    pub policy: PolicySection,
    pub greedy: GreedyConfig,
    pub learn: SacConfig,
    pub experiment: ExperimentSection,
    pub render: RenderSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.tool.validate()?;
        self.noise.validate()?;
        self.reward.validate()?;
        self.learn.validate()?;
        if self.horizon() == 0 {
            return Err(Error::Config("task.horizon must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.task.initial_coverage) {
            return Err(Error::Config("task.initial_coverage must lie in [0, 1]".into()));
        }
        let ex = &self.experiment;
        if ex.seeds == 0 {
            return Err(Error::Config("experiment.seeds must be positive".into()));
        }
        if ex.eval_rollouts == 0 {
            return Err(Error::Config("experiment.eval_rollouts must be positive".into()));
        }
        if !(0.0..=1.0).contains(&ex.efficiency_initial_coverage) {
            return Err(Error::Config("experiment.efficiency_initial_coverage must lie in [0, 1]".into()));
        }
        if self.render.scale == 0 {
            return Err(Error::Config("render.scale must be positive".into()));
        }
        for task in self.tasks() {
            let names: Vec<_> = catalogue(task, &self.grid).iter().map(|e| e.name).collect();
            for o in &self.task.objects {
                if !names.contains(&o.as_str()) {
                    return Err(Error::Config(format!("unknown {task} object `{o}`; expected one of {names:?}")));
                }
            }
            self.greedy.resolve(task, &self.tool, &self.grid)?;
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.task.horizon.unwrap_or(self.task.kind.default_horizon())
    }

    /// Horizon for `task`: the override applies only to `[task].kind`.
    pub fn horizon_for(&self, task: TaskKind) -> usize {
        if task == self.task.kind {
            self.horizon()
        } else {
            task.default_horizon()
        }
    }

    pub fn tasks(&self) -> Vec<TaskKind> {
        if self.experiment.tasks.is_empty() {
            vec![self.task.kind]
        } else {
            self.experiment.tasks.clone()
        }
    }

    pub fn seed_list(&self, base: u64) -> Vec<u64> {
        (0..self.experiment.seeds as u64).map(|i| base.wrapping_add(i)).collect()
    }

    /// Selected catalogue entries for `task`, with the configured initial
    /// coverage applied.
    pub fn objects(&self, task: TaskKind) -> Vec<CatalogueEntry> {
        catalogue(task, &self.grid)
            .into_iter()
            .filter(|e| self.task.objects.is_empty() || self.task.objects.iter().any(|o| o == e.name))
            .map(|mut e| {
                e.spec = e.spec.with_initial_coverage(self.task.initial_coverage);
                e
            })
            .collect()
    }

    pub fn env_config(&self, task: TaskKind, entry: &CatalogueEntry) -> EnvConfig {
        EnvConfig {
            grid: self.grid,
            task,
            object: entry.spec.clone(),
            tool: self.tool,
        }
    }

    pub fn a_max(&self) -> f64 {
        self.tool.a_max(&self.grid)
    }

    /// Builds the controller for `kind`. Learned policies load `checkpoint`.
    pub fn controller(&self, kind: PolicyKind, task: TaskKind, checkpoint: Option<&Path>) -> Result<Box<dyn Controller>> {
        Ok(match kind {
            PolicyKind::Random => Box::new(RandomController::new(self.a_max())),
            PolicyKind::SpartaG => Box::new(GreedyController::sparta_g(self.greedy.resolve(task, &self.tool, &self.grid)?)),
            PolicyKind::Objmask => Box::new(GreedyController::objmask(self.greedy.resolve(task, &self.tool, &self.grid)?)),
            learned => {
                let path = checkpoint
                    .ok_or_else(|| Error::Config(format!("policy {learned} needs a checkpoint")))?;
                let agent = checkpoint::load(path, &self.learn, feature_dim(self.learn.pool))?;
                Box::new(LearnedController::new(
                    learned.name(),
                    agent,
                    self.horizon_for(task),
                    self.a_max(),
                    self.policy.deterministic,
                ))
            }
        })
    }
}

/// Reward signal a learned policy kind is trained on.
pub fn reward_mode(kind: PolicyKind) -> Option<RewardMode> {
    match kind {
        PolicyKind::SpartaL => Some(RewardMode::Dense),
        PolicyKind::SparseL => Some(RewardMode::Sparse),
        PolicyKind::GoaldistL => Some(RewardMode::GoalDist),
        _ => None,
    }
}

/// File name of the checkpoint trained for `(kind, task, seed)`.
pub fn checkpoint_name(kind: PolicyKind, task: TaskKind, seed: u64) -> String {
    format!("{kind}_{task}_s{seed}.oscl")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.horizon(), 10);
        assert_eq!(cfg.seed_list(7), vec![7, 8, 9]);
        assert_eq!(cfg.objects(TaskKind::Spread).len(), 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "[task]\nknd = \"mash\"",
            "[noise]\nflip = 0.1",
            "[bogus]\nx = 1",
            "top = 1",
            "[learn]\nhiden = [8]",
        ] {
            let err = ExperimentConfig::from_toml(text).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err}");
        }
    }

    #[test]
    fn sections_parse() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [task]
            kind = "slice"
            objects = ["ellipse"]
            initial_coverage = 0.5
            [noise]
            flip_prob = 0.0
            [policy]
            kind = "objmask"
            [experiment]
            seeds = 2
            tasks = ["mash", "slice"]
            policies = ["random", "sparta_l"]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.task.kind, TaskKind::Slice);
        assert_eq!(cfg.horizon(), 5);
        let objs = cfg.objects(TaskKind::Slice);
        assert_eq!(objs.len(), 1);
        assert_eq!(objs[0].spec.initial_coverage, 0.5);
        assert_eq!(cfg.tasks(), vec![TaskKind::Mash, TaskKind::Slice]);
        assert_eq!(cfg.noise.dilate_radius, 1);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "[experiment]\nseeds = 0",
            "[noise]\nflip_prob = 0.5",
            "[task]\nobjects = [\"banana\"]",
            "[task]\nhorizon = 0",
            "[greedy]\nnum_directions = 1",
        ] {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn learned_policy_needs_checkpoint() {
        let cfg = ExperimentConfig::default();
        assert!(cfg.controller(PolicyKind::SpartaL, TaskKind::Spread, None).is_err());
        assert!(cfg.controller(PolicyKind::SpartaL, TaskKind::Spread, Some(Path::new("/nonexistent.oscl"))).is_err());
        assert!(cfg.controller(PolicyKind::Random, TaskKind::Spread, None).is_ok());
    }
}
