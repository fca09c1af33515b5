//! Learner checkpoints.
//!
//! `"OSCL" | u32 version | u32 blob count | (u32 len | len x f32)*`, all
//! little-endian. Blobs are the tensors of the actor, both critics and both
//! targets in layer order (weight, bias, norm gain, norm shift), followed by
//! a one-element blob holding the log entropy coefficient.

use std::path::Path;

use super::mlp::Mlp;
use super::sac::{SacAgent, SacConfig};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OSCL";
pub const VERSION: u32 = 1;

fn nets(agent: &SacAgent) -> [&Mlp<f32>; 5] {
    [
        &agent.actor,
        &agent.critics[0],
        &agent.critics[1],
        &agent.targets[0],
        &agent.targets[1],
    ]
}

pub fn to_bytes(agent: &SacAgent) -> Vec<u8> {
    let mut blobs: Vec<&[f32]> = Vec::new();
    for net in nets(agent) {
        for (at, len) in net.layout().tensors() {
            blobs.push(&net.params[at..at + len]);
        }
    }
    let alpha = [agent.log_alpha as f32];
    blobs.push(&alpha);
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(blobs.len() as u32).to_le_bytes());
    for b in blobs {
        out.extend_from_slice(&(b.len() as u32).to_le_bytes());
        for v in b {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Rebuilds an agent for `cfg` and `feature_dim` and overwrites its
/// parameters; every blob length must match the configured layout.
pub fn from_bytes(bytes: &[u8], cfg: &SacConfig, feature_dim: usize) -> Result<SacAgent> {
    let bad = |reason: String| Error::Format {
        kind: "checkpoint",
        reason,
    };
    let mut at = 0usize;
    let u32_at = |at: &mut usize| -> Result<u32> {
        let b = bytes
            .get(*at..*at + 4)
            .ok_or_else(|| bad("truncated".into()))?;
        *at += 4;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    };
    if bytes.get(..4) != Some(MAGIC.as_slice()) {
        return Err(bad("missing OSCL magic".into()));
    }
    at += 4;
    let version = u32_at(&mut at)?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let count = u32_at(&mut at)? as usize;
    let mut blobs = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u32_at(&mut at)? as usize;
        let raw = bytes
            .get(at..at + 4 * len)
            .ok_or_else(|| bad("truncated blob".into()))?;
        at += 4 * len;
        blobs.push(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect::<Vec<f32>>(),
        );
    }
    if at != bytes.len() {
        return Err(bad("trailing bytes".into()));
    }
    let mut agent = SacAgent::new(cfg.clone(), feature_dim, 0)?;
    let mut it = blobs.into_iter();
    fill(&mut agent.actor, &mut it)?;
    for k in 0..2 {
        fill(&mut agent.critics[k], &mut it)?;
    }
    for k in 0..2 {
        fill(&mut agent.targets[k], &mut it)?;
    }
    let alpha = it.next().ok_or_else(|| bad("missing entropy coefficient".into()))?;
    if alpha.len() != 1 || it.next().is_some() {
        return Err(bad("unexpected trailing blobs".into()));
    }
    agent.log_alpha = alpha[0] as f64;
    Ok(agent)
}

fn fill(net: &mut Mlp<f32>, blobs: &mut impl Iterator<Item = Vec<f32>>) -> Result<()> {
    for (start, len) in net.layout().tensors() {
        let blob = blobs.next().ok_or_else(|| Error::Format {
            kind: "checkpoint",
            reason: "too few blobs".into(),
        })?;
        if blob.len() != len {
            return Err(Error::Format {
                kind: "checkpoint",
                reason: format!("blob of {} values where {len} expected", blob.len()),
            });
        }
        net.params[start..start + len].copy_from_slice(&blob);
    }
    Ok(())
}

pub fn save(agent: &SacAgent, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(agent)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path, cfg: &SacConfig, feature_dim: usize) -> Result<SacAgent> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, cfg, feature_dim)
}
