//! One episode of world + perception, stepped by actions.
//!
//! Termination follows the observed success signal (the detector the
//! controller sees) or the horizon, whichever comes first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perception::{NoiseModel, PerceptionState};
use crate::policy::Observation;
use crate::reward::{goaldist_reward, spoc_reward, success_reward, total_reward, RewardBreakdown, RewardWeights};
use crate::world::{Action, EnvConfig, PrimitiveOutcome, WorldState};

/// Which signal a learner is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Weighted progress + success + entropy.
    #[default]
    Dense,
    /// `beta` times the ground-truth success indicator.
    Sparse,
    /// Decrease of the pooled goal distance.
    GoalDist,
}

#[derive(Debug, Clone)]
pub struct EpisodeEnv {
    cfg: EnvConfig,
    noise: NoiseModel,
    horizon: usize,
    world: WorldState,
    perception: PerceptionState,
    obs: Observation,
    initial_transformed: usize,
    done: bool,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub action: Action,
    pub outcome: PrimitiveOutcome,
    pub r_spoc: f64,
    /// Success indicator on the observed map.
    pub r_succ: f64,
    pub goaldist: f64,
    pub truth_success: bool,
    pub done: bool,
}

impl EpisodeEnv {
    pub fn reset(cfg: &EnvConfig, noise: &NoiseModel, horizon: usize, seed: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        noise.validate()?;
        let world = WorldState::reset(cfg, seed)?;
        let mut perception = PerceptionState::new(noise, seed);
        let map = perception.observe(&world, noise);
        let obs = Observation::first(map, world.ee_pos);
        let initial_transformed = world.grid.counts().transformed;
        Ok(EpisodeEnv {
            cfg: cfg.clone(),
            noise: *noise,
            horizon,
            world,
            perception,
            obs,
            initial_transformed,
            done: false,
        })
    }

    pub fn observation(&self) -> &Observation {
        &self.obs
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn initial_transformed(&self) -> usize {
        self.initial_transformed
    }

    pub fn a_max(&self) -> f64 {
        self.world.a_max()
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::InvalidArgument("step after episode end".into()));
        }
        let action = action.clamped(self.a_max());
        let prev_ee = self.world.ee_pos;
        let outcome = self.world.apply_primitive(action);
        let map = self.perception.observe(&self.world, &self.noise);
        let prev = std::mem::replace(&mut self.obs.cur_map, map);
        self.obs.prev_map = prev;
        self.obs.ee_pos = self.world.ee_pos;
        self.obs.step = self.world.step;
        let r_spoc = spoc_reward(&self.obs.prev_map, &self.obs.cur_map);
        let r_succ = success_reward(&self.obs.cur_map);
        let goaldist = goaldist_reward(&self.obs.prev_map, prev_ee, &self.obs.cur_map, self.obs.ee_pos);
        self.done = r_succ == 1.0 || self.world.step >= self.horizon;
        Ok(StepResult {
            action,
            outcome,
            r_spoc,
            r_succ,
            goaldist,
            truth_success: self.world.is_success(),
            done: self.done,
        })
    }
}

impl StepResult {
    /// Logged breakdown: the weighted dense reward with `r_entropy` set
    /// from the controller's log-density (0 for non-learned controllers).
    pub fn breakdown(&self, w: &RewardWeights, log_prob: Option<f64>) -> Result<RewardBreakdown> {
        total_reward(w, self.r_spoc, self.r_succ, log_prob.map_or(0.0, |lp| -lp))
    }

    /// Scalar training signal for a learner.
    pub fn learner_reward(&self, mode: RewardMode, w: &RewardWeights, log_prob: Option<f64>) -> Result<f64> {
        match mode {
            RewardMode::Dense => Ok(self.breakdown(w, log_prob)?.total),
            RewardMode::Sparse => Ok(w.beta * if self.truth_success { 1.0 } else { 0.0 }),
            RewardMode::GoalDist => Ok(self.goaldist),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, Vec2};
    use crate::world::{ObjectSpec, TaskKind, ToolConfig};

    fn cfg() -> EnvConfig {
        EnvConfig {
            grid: GridSpec::default(),
            task: TaskKind::Mash,
            object: ObjectSpec::rectangle(Vec2::new(32.0, 32.0), Vec2::new(20.0, 16.0)),
            tool: ToolConfig::default(),
        }
    }

    #[test]
    fn horizon_terminates() {
        let mut env = EpisodeEnv::reset(&cfg(), &NoiseModel::none(), 3, 1).unwrap();
        let mut n = 0;
        while !env.is_done() {
            env.step(Action::new(1.0, 0.0)).unwrap();
            n += 1;
        }
        assert_eq!(n, 3);
        assert!(env.step(Action::ZERO).is_err());
    }

    #[test]
    fn previous_map_shifts() {
        let mut env = EpisodeEnv::reset(&cfg(), &NoiseModel::none(), 5, 1).unwrap();
        assert_eq!(env.observation().prev_map, env.observation().cur_map);
        let before = env.observation().cur_map.clone();
        env.step(Action::new(16.0, 16.0)).unwrap();
        assert_eq!(env.observation().prev_map, before);
        assert_eq!(env.observation().step, 1);
    }
}
