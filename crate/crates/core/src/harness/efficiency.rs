//! Per-action yield on partially transformed objects: SPARTA-G against
//! the state-agnostic ObjMask variant.

use super::config::ExperimentConfig;
use super::episode::run_episode;
use crate::error::{Error, Result};
use crate::policy::PolicyKind;
use crate::rng::derive_seed;
use crate::world::TaskKind;

#[derive(Debug, Clone, PartialEq)]
pub struct YieldRow {
    pub policy: PolicyKind,
    pub episodes: usize,
    pub actions: usize,
    pub cells_transformed: usize,
}

impl YieldRow {
    /// Newly transformed cells per action.
    pub fn per_action(&self) -> f64 {
        if self.actions == 0 {
            0.0
        } else {
            self.cells_transformed as f64 / self.actions as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport {
    pub task: TaskKind,
    pub initial_coverage: f64,
    pub sparta_g: YieldRow,
    pub objmask: YieldRow,
}

impl EfficiencyReport {
    pub const CSV_HEADER: &'static str = "task,initial_coverage,policy,episodes,actions,cells_transformed,cells_per_action";

    /// SPARTA-G yield over ObjMask yield; infinite if ObjMask transformed nothing.
    pub fn ratio(&self) -> f64 {
        let d = self.objmask.per_action();
        if d == 0.0 {
            f64::INFINITY
        } else {
            self.sparta_g.per_action() / d
        }
    }

    pub fn csv_rows(&self) -> String {
        [&self.sparta_g, &self.objmask]
            .iter()
            .map(|r| {
                format!(
                    "{},{:.3},{},{},{},{},{:.6}\n",
                    self.task,
                    self.initial_coverage,
                    r.policy,
                    r.episodes,
                    r.actions,
                    r.cells_transformed,
                    r.per_action()
                )
            })
            .collect()
    }
}

/// Runs `episodes` seeded episodes per policy on the task's seen object,
/// reset with `initial_coverage` of it already transformed.
pub fn run_efficiency_ablation(
    cfg: &ExperimentConfig,
    task: TaskKind,
    initial_coverage: f64,
    episodes: usize,
    seed: u64,
) -> Result<EfficiencyReport> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("efficiency ablation needs at least one episode".into()));
    }
    let mut entry = super::catalogue::seen_object(task, &cfg.grid);
    entry.spec = entry.spec.with_initial_coverage(initial_coverage);
    let env = cfg.env_config(task, &entry);
    let horizon = cfg.horizon_for(task);
    let run = |policy: PolicyKind| -> Result<YieldRow> {
        let mut ctl = cfg.controller(policy, task, None)?;
        let mut row = YieldRow {
            policy,
            episodes,
            actions: 0,
            cells_transformed: 0,
        };
        for ep in 0..episodes {
            let log = run_episode(&env, &cfg.noise, horizon, &cfg.reward, ctl.as_mut(), derive_seed(seed, ep as u64))?;
            row.actions += log.steps.len();
            row.cells_transformed += log.final_transformed - log.initial_transformed;
        }
        Ok(row)
    };
    Ok(EfficiencyReport {
        task,
        initial_coverage,
        sparta_g: run(PolicyKind::SpartaG)?,
        objmask: run(PolicyKind::Objmask)?,
    })
}
