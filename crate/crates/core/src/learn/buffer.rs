//! Replay storage.

use rand::Rng as _;

use super::gaussian::ACTION_DIM;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f32>,
    /// Squashed action in `[-1, 1]`.
    pub action: [f32; ACTION_DIM],
    /// Pre-squash sample, kept for exact log-density recomputation.
    pub pre_squash: [f32; ACTION_DIM],
    pub reward: f64,
    pub next_obs: Vec<f32>,
    pub done: bool,
}

impl Transition {
    /// `u32 dim | obs | action | pre_squash | f64 reward | next_obs | u8 done`, little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let dim = self.obs.len();
        let mut b = Vec::with_capacity(4 + 8 * dim + 16 + 8 + 1);
        b.extend_from_slice(&(dim as u32).to_le_bytes());
        let floats = |v: &[f32], b: &mut Vec<u8>| v.iter().for_each(|x| b.extend_from_slice(&x.to_le_bytes()));
        floats(&self.obs, &mut b);
        floats(&self.action, &mut b);
        floats(&self.pre_squash, &mut b);
        b.extend_from_slice(&self.reward.to_le_bytes());
        floats(&self.next_obs, &mut b);
        b.push(self.done as u8);
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |reason: &str| Error::Format {
            kind: "transition",
            reason: reason.to_string(),
        };
        if bytes.len() < 4 {
            return Err(bad("truncated header"));
        }
        let dim = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        let expected = 4 + 4 * (2 * dim + 2 * ACTION_DIM) + 8 + 1;
        if bytes.len() != expected {
            return Err(bad(&format!("expected {expected} bytes, got {}", bytes.len())));
        }
        let mut at = 4;
        let mut floats = |n: usize| {
            let v: Vec<f32> = bytes[at..at + 4 * n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            at += 4 * n;
            v
        };
        let obs = floats(dim);
        let action = floats(ACTION_DIM);
        let pre = floats(ACTION_DIM);
        let reward_at = 4 + 4 * (dim + 2 * ACTION_DIM);
        let reward = f64::from_le_bytes(bytes[reward_at..reward_at + 8].try_into().unwrap());
        let next_at = reward_at + 8;
        let next_obs: Vec<f32> = bytes[next_at..next_at + 4 * dim]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let done = match bytes[expected - 1] {
            0 => false,
            1 => true,
            _ => return Err(bad("done flag must be 0 or 1")),
        };
        Ok(Transition {
            obs,
            action: [action[0], action[1]],
            pre_squash: [pre[0], pre[1]],
            reward,
            next_obs,
            done,
        })
    }
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::new(),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform indices, with replacement.
    pub fn sample_indices(&self, rng: &mut Rng, n: usize) -> Vec<usize> {
        assert!(!self.is_empty(), "sampling from an empty buffer");
        (0..n).map(|_| rng.random_range(0..self.items.len())).collect()
    }
}
