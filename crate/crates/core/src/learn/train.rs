//! Interleaved data collection and SAC updates.

use std::path::PathBuf;

use super::buffer::{ReplayBuffer, Transition};
use super::checkpoint;
use super::encode::{encode_observation, feature_dim};
use super::gaussian::ACTION_DIM;
use super::sac::{SacAgent, SacConfig};
use crate::env::{EpisodeEnv, RewardMode};
use crate::error::Result;
use crate::perception::NoiseModel;
use crate::policy::{Controller, Decision, GreedyConfig, GreedyController, Observation};
use crate::reward::{coverage, RewardWeights};
use crate::rng::{derive_seed, rng_from, stream, Rng};
use crate::world::{Action, EnvConfig};

/// Stream offset separating seeding-rollout episodes from training episodes.
const SEED_ROLLOUT_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone)]
pub struct TrainSetup {
    pub env: EnvConfig,
    pub noise: NoiseModel,
    pub horizon: usize,
    pub weights: RewardWeights,
    pub mode: RewardMode,
    pub sac: SacConfig,
    pub greedy: GreedyConfig,
    pub episodes: usize,
    pub seed: u64,
    /// Where the agent is written if training diverges.
    pub dump_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub episode: usize,
    pub env_steps: usize,
    /// Ground-truth coverage at episode end.
    pub coverage: f64,
    pub success: bool,
    /// Means over the episode's updates; `None` when no update ran.
    pub actor_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub alpha_ent: f64,
}

impl CurveRow {
    pub const CSV_HEADER: &'static str = "episode,env_steps,coverage,success,actor_loss,critic_loss,alpha_ent";

    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "{},{},{:.6},{},{},{},{:.6}",
            self.episode,
            self.env_steps,
            self.coverage,
            self.success as u8,
            opt(self.actor_loss),
            opt(self.critic_loss),
            self.alpha_ent
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub curve: Vec<CurveRow>,
    pub agent: SacAgent,
}

/// Maps an environment action back to the normalised squashed action and
/// its pre-squash value.
fn normalise(action: Action, a_max: f64) -> ([f32; ACTION_DIM], [f32; ACTION_DIM]) {
    let lim = 1.0 - 1e-6;
    let a = [
        (action.dx / a_max).clamp(-lim, lim),
        (action.dy / a_max).clamp(-lim, lim),
    ];
    ([a[0] as f32, a[1] as f32], [a[0].atanh() as f32, a[1].atanh() as f32])
}

/// Rolls out `n` greedy episodes and stores their transitions, rewarded by
/// the learner's own reward mode. Returns the number of transitions added.
pub fn seed_buffer_with_greedy(setup: &TrainSetup, buffer: &mut ReplayBuffer, n: usize) -> Result<usize> {
    let resolved = setup.greedy.resolve(setup.env.task, &setup.env.tool, &setup.env.grid)?;
    let mut ctl = GreedyController::sparta_g(resolved);
    let pool = setup.sac.pool;
    let mut added = 0;
    for i in 0..n {
        let ep_seed = derive_seed(setup.seed, SEED_ROLLOUT_STREAM + i as u64);
        let mut env = EpisodeEnv::reset(&setup.env, &setup.noise, setup.horizon, ep_seed)?;
        ctl.begin_episode(ep_seed);
        let a_max = env.a_max();
        let mut feats = encode_observation(env.observation(), pool, setup.horizon);
        while !env.is_done() {
            let d = ctl.act(env.observation())?;
            let step = env.step(d.action)?;
            let reward = step.learner_reward(setup.mode, &setup.weights, d.log_prob)?;
            let next = encode_observation(env.observation(), pool, setup.horizon);
            let (action, pre_squash) = normalise(step.action, a_max);
            buffer.push(Transition {
                obs: std::mem::replace(&mut feats, next.clone()),
                action,
                pre_squash,
                reward,
                next_obs: next,
                done: step.done,
            });
            added += 1;
        }
    }
    Ok(added)
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn add(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn get(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

pub fn train(setup: &TrainSetup) -> Result<TrainOutcome> {
    setup.sac.validate()?;
    setup.weights.validate()?;
    let pool = setup.sac.pool;
    let mut agent = SacAgent::new(setup.sac.clone(), feature_dim(pool), setup.seed)?;
    let mut buffer = ReplayBuffer::new(setup.sac.buffer_capacity);
    let mut curve = Vec::with_capacity(setup.episodes);
    if setup.episodes == 0 {
        return Ok(TrainOutcome { curve, agent });
    }
    let seeded = seed_buffer_with_greedy(setup, &mut buffer, setup.sac.seed_rollouts)?;
    log::info!("seeded replay with {seeded} greedy transitions");
    let mut act_rng = rng_from(setup.seed, stream::POLICY);
    let mut env_steps = 0;
    for episode in 0..setup.episodes {
        let mut env = EpisodeEnv::reset(&setup.env, &setup.noise, setup.horizon, derive_seed(setup.seed, episode as u64))?;
        let a_max = env.a_max();
        let mut feats = encode_observation(env.observation(), pool, setup.horizon);
        let (mut actor_loss, mut critic_loss) = (Mean::default(), Mean::default());
        while !env.is_done() {
            let s = agent.act(&feats, &mut act_rng, false)?;
            let step = env.step(Action::new(a_max * s.a[0], a_max * s.a[1]))?;
            let reward = step.learner_reward(setup.mode, &setup.weights, Some(s.log_prob))?;
            let next = encode_observation(env.observation(), pool, setup.horizon);
            buffer.push(Transition {
                obs: std::mem::replace(&mut feats, next.clone()),
                action: [s.a[0] as f32, s.a[1] as f32],
                pre_squash: [s.u[0] as f32, s.u[1] as f32],
                reward,
                next_obs: next,
                done: step.done,
            });
            env_steps += 1;
            for _ in 0..setup.sac.utd {
                match agent.update(&buffer) {
                    Ok(Some(r)) => {
                        critic_loss.add(r.critic_loss);
                        if let Some(a) = r.actor_loss {
                            actor_loss.add(a);
                        }
                    }
                    Ok(None) => {}
                    Err(e) => {
                        log::error!("training diverged at episode {episode}: {e}");
                        if let Some(path) = &setup.dump_path {
                            checkpoint::save(&agent, path)?;
                            log::error!("agent state written to {}", path.display());
                        }
                        return Err(e);
                    }
                }
            }
        }
        let row = CurveRow {
            episode,
            env_steps,
            coverage: coverage(env.world())?.coverage,
            success: env.world().is_success(),
            actor_loss: actor_loss.get(),
            critic_loss: critic_loss.get(),
            alpha_ent: agent.entropy_coef(),
        };
        log::debug!("{}", row.csv_line());
        curve.push(row);
    }
    Ok(TrainOutcome { curve, agent })
}

/// A trained actor acting through the [`Controller`] interface.
pub struct LearnedController {
    name: String,
    agent: SacAgent,
    horizon: usize,
    a_max: f64,
    deterministic: bool,
    rng: Rng,
}

impl LearnedController {
    pub fn new(name: impl Into<String>, agent: SacAgent, horizon: usize, a_max: f64, deterministic: bool) -> Self {
        LearnedController {
            name: name.into(),
            agent,
            horizon,
            a_max,
            deterministic,
            rng: rng_from(0, stream::POLICY),
        }
    }
}

impl Controller for LearnedController {
    fn name(&self) -> &str {
        &self.name
    }

    fn begin_episode(&mut self, seed: u64) {
        self.rng = rng_from(seed, stream::POLICY);
    }

    fn act(&mut self, obs: &Observation) -> Result<Decision> {
        let feats = encode_observation(obs, self.agent.cfg.pool, self.horizon);
        let s = self.agent.act(&feats, &mut self.rng, self.deterministic)?;
        Ok(Decision {
            action: Action::new(self.a_max * s.a[0], self.a_max * s.a[1]),
            log_prob: Some(s.log_prob),
        })
    }
}
