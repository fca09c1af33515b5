//! Soft actor-critic with twin critics, target networks and a tuned
//! entropy coefficient.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::buffer::ReplayBuffer;
use super::gaussian::{head_backward, head_sample, sample_head, standard_normal_pair, PolicySample, ACTION_DIM, HEAD_DIM};
use super::mlp::{Mlp, MlpLayout};
use super::Scalar;
use crate::error::{Error, Result};
use crate::rng::{rng_from, stream, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub lr: f64,
    /// Updates over which the learning rate ramps linearly from 0.
    pub warmup_updates: u64,
    pub gamma: f64,
    pub batch: usize,
    pub tau: f64,
    /// Critic updates per actor update.
    pub actor_critic_ratio: u64,
    /// Tune the entropy coefficient toward `target_entropy`; fixed otherwise.
    pub auto_entropy: bool,
    pub init_entropy_coef: f64,
    pub target_entropy: f64,
    pub buffer_capacity: usize,
    pub seed_rollouts: usize,
    /// Gradient updates per environment step.
    pub utd: usize,
    /// Side of the pooled observation maps.
    pub pool: usize,
    pub hidden: Vec<usize>,
    pub critic_layer_norm: bool,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            lr: 3e-4,
            warmup_updates: 1000,
            gamma: 0.95,
            batch: 256,
            tau: 0.005,
            actor_critic_ratio: 10,
            auto_entropy: true,
            init_entropy_coef: 0.01,
            target_entropy: -(ACTION_DIM as f64),
            buffer_capacity: 100_000,
            seed_rollouts: 5,
            utd: 4,
            pool: 16,
            hidden: vec![256, 256],
            critic_layer_norm: true,
        }
    }
}

impl SacConfig {
    /// Smaller, faster learner sized for a single CPU core: coarser maps,
    /// narrower layers, a smaller batch and a higher peak learning rate.
    pub fn desk() -> Self {
        SacConfig {
            lr: 1e-3,
            batch: 128,
            target_entropy: -4.0,
            pool: 8,
            hidden: vec![128, 128],
            ..SacConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.lr > 0.0
            && self.gamma >= 0.0
            && self.gamma <= 1.0
            && self.batch > 0
            && self.tau > 0.0
            && self.tau <= 1.0
            && self.actor_critic_ratio >= 1
            && self.init_entropy_coef > 0.0
            && self.target_entropy.is_finite()
            && self.buffer_capacity > 0
            && self.utd > 0
            && self.pool > 0
            && !self.hidden.is_empty()
            && !self.hidden.contains(&0);
        if positive {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid learner settings: {self:?}")))
        }
    }

    fn lr_at(&self, step: u64) -> f64 {
        if self.warmup_updates == 0 {
            self.lr
        } else {
            self.lr * ((step + 1) as f64 / self.warmup_updates as f64).min(1.0)
        }
    }
}

/// Losses from one [`SacAgent::update`]. `actor_loss` is set on the
/// updates that also stepped the actor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub critic_loss: f64,
    pub actor_loss: Option<f64>,
    pub entropy_coef: f64,
}

/// `y = r + gamma (1 - done) (min Q'(s', a') - alpha log pi(a'|s'))`.
pub fn critic_targets(
    rewards: &[f64],
    dones: &[bool],
    next_min_q: &[f64],
    next_log_prob: &[f64],
    alpha: f64,
    gamma: f64,
) -> Vec<f64> {
    (0..rewards.len())
        .map(|i| {
            let cont = if dones[i] { 0.0 } else { 1.0 };
            rewards[i] + gamma * cont * (next_min_q[i] - alpha * next_log_prob[i])
        })
        .collect()
}

/// Rows `[features | action]`.
pub fn critic_inputs<F: Scalar>(feats: ArrayView2<'_, F>, actions: &[[f64; ACTION_DIM]]) -> Array2<F> {
    let (n, d) = feats.dim();
    let mut x = Array2::zeros((n, d + ACTION_DIM));
    x.slice_mut(s![.., ..d]).assign(&feats);
    for (i, a) in actions.iter().enumerate() {
        for k in 0..ACTION_DIM {
            x[[i, d + k]] = F::from_f64(a[k]).unwrap();
        }
    }
    x
}

/// Mean squared Bellman error and its parameter gradient.
pub fn critic_loss_grad<F: Scalar>(critic: &Mlp<F>, inputs: ArrayView2<'_, F>, targets: &[f64]) -> Result<(f64, Vec<F>)> {
    let (q, cache) = critic.forward(inputs)?;
    let b = targets.len() as f64;
    let mut up = Array2::zeros((targets.len(), 1));
    let mut loss = 0.0;
    for (i, &y) in targets.iter().enumerate() {
        let d = q[[i, 0]].to_f64().unwrap() - y;
        loss += d * d / b;
        up[[i, 0]] = F::from_f64(2.0 * d / b).unwrap();
    }
    let (g, _) = critic.backward(&cache, up.view(), false);
    Ok((loss, g))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorLoss {
    pub loss: f64,
    pub mean_log_prob: f64,
}

fn head_rows<F: Scalar>(out: &Array2<F>, eps: &[[f64; ACTION_DIM]]) -> Vec<(Vec<f64>, PolicySample)> {
    out.rows()
        .into_iter()
        .zip(eps)
        .map(|(row, &e)| {
            let o: Vec<f64> = row.iter().map(|v| v.to_f64().unwrap()).collect();
            let s = head_sample(&o, e);
            (o, s)
        })
        .collect()
}

/// `mean(alpha log pi(a|s) - min(Q1, Q2)(s, a))` with `a` reparameterised by
/// the fixed noise `eps`, and its gradient with respect to the actor.
pub fn actor_loss_grad<F: Scalar>(
    actor: &Mlp<F>,
    critics: [&Mlp<F>; 2],
    feats: ArrayView2<'_, F>,
    eps: &[[f64; ACTION_DIM]],
    alpha: f64,
) -> Result<(ActorLoss, Vec<F>)> {
    let (out, acache) = actor.forward(feats)?;
    let n = out.nrows();
    let b = n as f64;
    let heads = head_rows(&out, eps);
    let actions: Vec<[f64; ACTION_DIM]> = heads.iter().map(|h| h.1.a).collect();
    let x = critic_inputs(feats, &actions);
    let (q1, c1) = critics[0].forward(x.view())?;
    let (q2, c2) = critics[1].forward(x.view())?;
    let mut up1 = Array2::zeros((n, 1));
    let mut up2 = Array2::zeros((n, 1));
    let mut loss = 0.0;
    let mut mean_lp = 0.0;
    let g = F::from_f64(-1.0 / b).unwrap();
    for i in 0..n {
        let (a, c) = (q1[[i, 0]].to_f64().unwrap(), q2[[i, 0]].to_f64().unwrap());
        let lp = heads[i].1.log_prob;
        loss += (alpha * lp - a.min(c)) / b;
        mean_lp += lp / b;
        if a <= c {
            up1[[i, 0]] = g;
        } else {
            up2[[i, 0]] = g;
        }
    }
    let (_, dx1) = critics[0].backward(&c1, up1.view(), true);
    let (_, dx2) = critics[1].backward(&c2, up2.view(), true);
    let (dx1, dx2) = (dx1.unwrap(), dx2.unwrap());
    let d = feats.ncols();
    let mut dout = Array2::zeros((n, HEAD_DIM));
    for i in 0..n {
        let da = [
            (dx1[[i, d]] + dx2[[i, d]]).to_f64().unwrap(),
            (dx1[[i, d + 1]] + dx2[[i, d + 1]]).to_f64().unwrap(),
        ];
        let gh = head_backward(&heads[i].1, &heads[i].0, alpha / b, da);
        for k in 0..HEAD_DIM {
            dout[[i, k]] = F::from_f64(gh[k]).unwrap();
        }
    }
    let (grads, _) = actor.backward(&acache, dout.view(), false);
    Ok((
        ActorLoss {
            loss,
            mean_log_prob: mean_lp,
        },
        grads,
    ))
}

#[derive(Debug, Clone)]
pub struct SacAgent {
    pub cfg: SacConfig,
    feature_dim: usize,
    pub actor: Mlp<f32>,
    pub critics: [Mlp<f32>; 2],
    pub targets: [Mlp<f32>; 2],
    actor_opt: Adam<f32>,
    critic_opts: [Adam<f32>; 2],
    pub log_alpha: f64,
    alpha_opt: Adam<f64>,
    critic_updates: u64,
    actor_updates: u64,
    rng: Rng,
}

impl SacAgent {
    pub fn actor_layout(cfg: &SacConfig, feature_dim: usize) -> Result<MlpLayout> {
        let mut sizes = vec![feature_dim];
        sizes.extend(&cfg.hidden);
        sizes.push(HEAD_DIM);
        MlpLayout::new(&sizes, false)
    }

    pub fn critic_layout(cfg: &SacConfig, feature_dim: usize) -> Result<MlpLayout> {
        let mut sizes = vec![feature_dim + ACTION_DIM];
        sizes.extend(&cfg.hidden);
        sizes.push(1);
        MlpLayout::new(&sizes, cfg.critic_layer_norm)
    }

    pub fn new(cfg: SacConfig, feature_dim: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut init = rng_from(seed, stream::INIT);
        let actor = Mlp::init(Self::actor_layout(&cfg, feature_dim)?, &mut init, 1e-2);
        let cl = Self::critic_layout(&cfg, feature_dim)?;
        let critics = [Mlp::init(cl.clone(), &mut init, 1.0), Mlp::init(cl, &mut init, 1.0)];
        let targets = critics.clone();
        Ok(SacAgent {
            feature_dim,
            actor_opt: Adam::new(actor.params.len()),
            critic_opts: [Adam::new(critics[0].params.len()), Adam::new(critics[1].params.len())],
            log_alpha: cfg.init_entropy_coef.ln(),
            alpha_opt: Adam::new(1),
            actor,
            critics,
            targets,
            critic_updates: 0,
            actor_updates: 0,
            rng: rng_from(seed, stream::LEARNER),
            cfg,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn entropy_coef(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn critic_updates(&self) -> u64 {
        self.critic_updates
    }

    pub fn actor_updates(&self) -> u64 {
        self.actor_updates
    }

    /// Samples a normalised action for one feature vector.
    pub fn act(&self, feats: &[f32], rng: &mut Rng, deterministic: bool) -> Result<PolicySample> {
        let out = self.actor.forward_one(feats)?;
        let o: Vec<f64> = out.iter().map(|&v| v as f64).collect();
        Ok(sample_head(&o, rng, deterministic))
    }

    /// One critic step, plus an actor and entropy-coefficient step every
    /// `actor_critic_ratio` critic steps, then target averaging.
    pub fn update(&mut self, buffer: &ReplayBuffer) -> Result<Option<LossReport>> {
        if buffer.len() < self.cfg.batch {
            if buffer.is_empty() {
                log::warn!("update requested on an empty replay buffer; skipping");
            }
            return Ok(None);
        }
        let n = self.cfg.batch;
        let d = self.feature_dim;
        let idx = buffer.sample_indices(&mut self.rng, n);
        let mut s = Array2::<f32>::zeros((n, d));
        let mut s2 = Array2::<f32>::zeros((n, d));
        let mut actions = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        let mut dones = Vec::with_capacity(n);
        for (row, &i) in idx.iter().enumerate() {
            let t = buffer.get(i);
            if t.obs.len() != d || t.next_obs.len() != d {
                return Err(Error::ShapeMismatch {
                    expected: d,
                    actual: t.obs.len(),
                });
            }
            s.row_mut(row).assign(&ndarray::ArrayView1::from(&t.obs[..]));
            s2.row_mut(row).assign(&ndarray::ArrayView1::from(&t.next_obs[..]));
            actions.push([t.action[0] as f64, t.action[1] as f64]);
            rewards.push(t.reward);
            dones.push(t.done);
        }
        let alpha = self.entropy_coef();

        let (out2, _) = self.actor.forward(s2.view())?;
        let eps2: Vec<_> = (0..n).map(|_| standard_normal_pair(&mut self.rng)).collect();
        let heads2 = head_rows(&out2, &eps2);
        let a2: Vec<_> = heads2.iter().map(|h| h.1.a).collect();
        let lp2: Vec<f64> = heads2.iter().map(|h| h.1.log_prob).collect();
        let x2 = critic_inputs(s2.view(), &a2);
        let (t1, _) = self.targets[0].forward(x2.view())?;
        let (t2, _) = self.targets[1].forward(x2.view())?;
        let min_q: Vec<f64> = t1.iter().zip(t2.iter()).map(|(&a, &b)| a.min(b) as f64).collect();
        let y = critic_targets(&rewards, &dones, &min_q, &lp2, alpha, self.cfg.gamma);

        let x = critic_inputs(s.view(), &actions);
        let mut critic_loss = 0.0;
        for k in 0..2 {
            let (loss, g) = critic_loss_grad(&self.critics[k], x.view(), &y)?;
            let lr = self.cfg.lr_at(self.critic_updates);
            self.critic_opts[k].step(&mut self.critics[k].params, &g, lr);
            critic_loss += 0.5 * loss;
        }
        self.critic_updates += 1;

        let mut actor_loss = None;
        if self.critic_updates.is_multiple_of(self.cfg.actor_critic_ratio) {
            let eps: Vec<_> = (0..n).map(|_| standard_normal_pair(&mut self.rng)).collect();
            let (al, g) = actor_loss_grad(&self.actor, [&self.critics[0], &self.critics[1]], s.view(), &eps, alpha)?;
            let lr = self.cfg.lr_at(self.actor_updates);
            self.actor_opt.step(&mut self.actor.params, &g, lr);
            if self.cfg.auto_entropy {
                let mut la = [self.log_alpha];
                let g = [-(al.mean_log_prob + self.cfg.target_entropy)];
                self.alpha_opt.step(&mut la, &g, lr);
                self.log_alpha = la[0];
            }
            self.actor_updates += 1;
            actor_loss = Some(al.loss);
        }

        let tau = self.cfg.tau as f32;
        for k in 0..2 {
            self.targets[k].soft_update(&self.critics[k], tau);
        }

        if !critic_loss.is_finite() || actor_loss.is_some_and(|l| !l.is_finite()) || !self.log_alpha.is_finite() {
            return Err(Error::Diverged {
                update: self.critic_updates,
                reason: format!("critic loss {critic_loss}, actor loss {actor_loss:?}, log alpha {}", self.log_alpha),
            });
        }
        Ok(Some(LossReport {
            critic_loss,
            actor_loss,
            entropy_coef: self.entropy_coef(),
        }))
    }
}
