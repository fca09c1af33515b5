//! Evaluation matrix: final ground-truth coverage per (task, object, policy).

use std::path::Path;

use super::config::{checkpoint_name, ExperimentConfig};
use super::episode::run_episode;
use crate::error::Result;
use crate::policy::PolicyKind;
use crate::rng::derive_seed;
use crate::world::TaskKind;

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    /// A learned policy had no checkpoint for some seed.
    MissingCheckpoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCell {
    pub task: TaskKind,
    pub object: String,
    pub seen: bool,
    pub policy: PolicyKind,
    pub mean: f64,
    /// Sample standard deviation; 0 when `n < 2`.
    pub std: f64,
    pub n: usize,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatrixTable {
    pub cells: Vec<MatrixCell>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Episode seed of rollout `r` under experiment seed `seed`.
pub fn rollout_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, r as u64)
}

/// Runs every configured task, object and policy over `seeds` x
/// `eval_rollouts` episodes. Learned policies load
/// `checkpoint_dir/<policy>_<task>_s<seed>.oscl`.
pub fn run_matrix(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<MatrixTable> {
    let mut cells = Vec::new();
    for task in cfg.tasks() {
        let horizon = cfg.horizon_for(task);
        for entry in cfg.objects(task) {
            let env = cfg.env_config(task, &entry);
            for &policy in &cfg.experiment.policies {
                let mut coverages = Vec::new();
                let mut status = CellStatus::Ok;
                for &seed in seeds {
                    let ckpt = cfg
                        .experiment
                        .checkpoint_dir
                        .as_deref()
                        .unwrap_or(Path::new("."))
                        .join(checkpoint_name(policy, task, seed));
                    if policy.is_learned() && !ckpt.exists() {
                        log::warn!("no checkpoint {}; skipping {policy} on {task}/{}", ckpt.display(), entry.name);
                        status = CellStatus::MissingCheckpoint;
                        break;
                    }
                    let mut ctl = cfg.controller(policy, task, Some(&ckpt))?;
                    for r in 0..cfg.experiment.eval_rollouts {
                        let log = run_episode(&env, &cfg.noise, horizon, &cfg.reward, ctl.as_mut(), rollout_seed(seed, r))?;
                        coverages.push(log.final_coverage);
                    }
                }
                if status != CellStatus::Ok {
                    coverages.clear();
                }
                let (mean, std) = mean_std(&coverages);
                cells.push(MatrixCell {
                    task,
                    object: entry.name.to_string(),
                    seen: entry.seen,
                    policy,
                    mean,
                    std,
                    n: coverages.len(),
                    status,
                });
            }
        }
    }
    Ok(MatrixTable { cells })
}

impl MatrixTable {
    pub const CSV_HEADER: &'static str = "task,object,seen,policy,mean,std,n,status";

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, task: TaskKind, object: &str, policy: PolicyKind) -> Option<&MatrixCell> {
        self.cells
            .iter()
            .find(|c| c.task == task && c.object == object && c.policy == policy)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for c in &self.cells {
            let status = match c.status {
                CellStatus::Ok => "ok",
                CellStatus::MissingCheckpoint => "missing_checkpoint",
            };
            s.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{},{}\n",
                c.task, c.object, c.seen as u8, c.policy, c.mean, c.std, c.n, status
            ));
        }
        s
    }

    /// Aligned text table: one row per (task, object), one column per
    /// policy, cells as `mean ± std (n)` in percent; `--` marks a skipped cell.
    pub fn to_text(&self) -> String {
        let mut policies: Vec<PolicyKind> = Vec::new();
        let mut rows: Vec<(TaskKind, &str, bool)> = Vec::new();
        for c in &self.cells {
            if !policies.contains(&c.policy) {
                policies.push(c.policy);
            }
            if !rows.iter().any(|r| r.0 == c.task && r.1 == c.object) {
                rows.push((c.task, &c.object, c.seen));
            }
        }
        let mut table: Vec<Vec<String>> = vec![];
        let mut header = vec!["task".to_string(), "object".to_string()];
        header.extend(policies.iter().map(|p| p.to_string()));
        table.push(header);
        for &(task, object, seen) in &rows {
            let mut line = vec![task.to_string(), format!("{object}{}", if seen { " (seen)" } else { "" })];
            for &p in &policies {
                line.push(match self.get(task, object, p) {
                    Some(c) if c.status == CellStatus::Ok => {
                        format!("{:.1} ± {:.1} ({})", 100.0 * c.mean, 100.0 * c.std, c.n)
                    }
                    _ => "--".to_string(),
                });
            }
            table.push(line);
        }
        let cols = table.first().map_or(0, Vec::len);
        let widths: Vec<usize> = (0..cols)
            .map(|j| table.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        for row in &table {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(v, &w)| format!("{v}{}", " ".repeat(w - v.chars().count())))
                .collect();
            s.push_str(cells.join("  ").trim_end());
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(policies: &[PolicyKind]) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.task.kind = TaskKind::Mash;
        cfg.task.objects = vec!["rectangle".into()];
        cfg.experiment.seeds = 1;
        cfg.experiment.eval_rollouts = 2;
        cfg.experiment.policies = policies.to_vec();
        cfg
    }

    #[test]
    fn statistics() {
        assert_eq!(mean_std(&[]), (0.0, 0.0));
        assert_eq!(mean_std(&[0.4]), (0.4, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_config_set_gives_empty_table() {
        let cfg = small(&[]);
        let t = run_matrix(&cfg, &[0]).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.to_csv(), format!("{}\n", MatrixTable::CSV_HEADER));
        assert_eq!(t.to_text(), "task  object\n");
    }

    #[test]
    fn cells_carry_counts_and_skip_markers() {
        let mut cfg = small(&[PolicyKind::Random, PolicyKind::SpartaG, PolicyKind::SpartaL]);
        cfg.experiment.checkpoint_dir = Some(std::env::temp_dir().join("osc-no-such-dir"));
        let t = run_matrix(&cfg, &[3, 4]).unwrap();
        assert_eq!(t.cells.len(), 3);
        let g = t.get(TaskKind::Mash, "rectangle", PolicyKind::SpartaG).unwrap();
        assert_eq!(g.n, 4);
        assert!(g.mean > t.get(TaskKind::Mash, "rectangle", PolicyKind::Random).unwrap().mean);
        let l = t.get(TaskKind::Mash, "rectangle", PolicyKind::SpartaL).unwrap();
        assert_eq!(l.status, CellStatus::MissingCheckpoint);
        assert_eq!(l.n, 0);
        assert!(t.to_csv().contains("sparta_l,0.000000,0.000000,0,missing_checkpoint"));
        let text = t.to_text();
        assert!(text.contains("--"));
        assert!(text.contains("rectangle (seen)"));
        assert_eq!(run_matrix(&cfg, &[3, 4]).unwrap().to_csv(), t.to_csv());
    }
}
