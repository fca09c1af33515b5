//! Tanh-squashed diagonal Gaussian policy head.
//!
//! The actor emits `[mean_x, mean_y, raw_x, raw_y]`. `raw` maps smoothly
//! onto `log_std` in `[LOG_STD_MIN, LOG_STD_MAX]`. Actions are returned
//! normalised to `[-1, 1]`; callers scale by `a_max`.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::Rng;

pub const ACTION_DIM: usize = 2;
/// Actor output width.
pub const HEAD_DIM: usize = 2 * ACTION_DIM;
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

pub fn squash_log_std(raw: f64) -> f64 {
    LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (raw.tanh() + 1.0)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(1 - tanh(u)^2)` without cancellation for large `|u|`.
pub fn log1m_tanh2(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySample {
    pub mean: [f64; ACTION_DIM],
    pub log_std: [f64; ACTION_DIM],
    pub eps: [f64; ACTION_DIM],
    /// Pre-squash sample `mean + std * eps`.
    pub u: [f64; ACTION_DIM],
    /// `tanh(u)`.
    pub a: [f64; ACTION_DIM],
    pub log_prob: f64,
}

pub fn standard_normal_pair(rng: &mut Rng) -> [f64; ACTION_DIM] {
    [rng.sample(StandardNormal), rng.sample(StandardNormal)]
}

/// Evaluates the head at `out` with fixed standard-normal noise `eps`.
pub fn head_sample(out: &[f64], eps: [f64; ACTION_DIM]) -> PolicySample {
    debug_assert_eq!(out.len(), HEAD_DIM);
    let mut s = PolicySample {
        mean: [out[0], out[1]],
        log_std: [squash_log_std(out[2]), squash_log_std(out[3])],
        eps,
        u: [0.0; ACTION_DIM],
        a: [0.0; ACTION_DIM],
        log_prob: 0.0,
    };
    for i in 0..ACTION_DIM {
        s.u[i] = s.mean[i] + s.log_std[i].exp() * eps[i];
        s.a[i] = s.u[i].tanh();
        s.log_prob += -0.5 * eps[i] * eps[i] - s.log_std[i] - HALF_LN_2PI - log1m_tanh2(s.u[i]);
    }
    s
}

/// Log-density of the squashed action whose pre-squash value is `u`.
pub fn head_log_prob(out: &[f64], u: [f64; ACTION_DIM]) -> f64 {
    let mut lp = 0.0;
    for i in 0..ACTION_DIM {
        let ls = squash_log_std(out[2 + i]);
        let e = (u[i] - out[i]) / ls.exp();
        lp += -0.5 * e * e - ls - HALF_LN_2PI - log1m_tanh2(u[i]);
    }
    lp
}

/// Gradient with respect to the raw head outputs of
/// `d_logp * log_prob + sum_i d_a[i] * a[i]`, holding `eps` fixed.
pub fn head_backward(s: &PolicySample, out: &[f64], d_logp: f64, d_a: [f64; ACTION_DIM]) -> [f64; HEAD_DIM] {
    let mut g = [0.0; HEAD_DIM];
    let half_range = 0.5 * (LOG_STD_MAX - LOG_STD_MIN);
    for i in 0..ACTION_DIM {
        let a = s.a[i];
        // d log_prob / du = 2 tanh(u); d a / du = 1 - a^2
        let du = d_a[i] * (1.0 - a * a) + d_logp * 2.0 * a;
        let sigma = s.log_std[i].exp();
        let dls = du * sigma * s.eps[i] - d_logp;
        let t = out[2 + i].tanh();
        g[i] = du;
        g[2 + i] = dls * half_range * (1.0 - t * t);
    }
    g
}

/// Draws a sample; `deterministic` returns `tanh(mean)` with zero noise.
pub fn sample_head(out: &[f64], rng: &mut Rng, deterministic: bool) -> PolicySample {
    let eps = if deterministic {
        [0.0; ACTION_DIM]
    } else {
        standard_normal_pair(rng)
    };
    head_sample(out, eps)
}
