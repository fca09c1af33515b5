//! One function per command-line verb. Each writes its outputs under an
//! output directory and returns a short human-readable summary.

use std::path::{Path, PathBuf};

use super::catalogue::seen_object;
use super::config::{checkpoint_name, reward_mode, ExperimentConfig};
use super::efficiency::{run_efficiency_ablation, EfficiencyReport};
use super::episode::{run_episode, write_file, EpisodeLog};
use super::matrix::{mean_std, rollout_seed, run_matrix, MatrixTable};
use super::render::{render_log, render_log_dir};
use crate::error::{Error, Result};
use crate::learn::{checkpoint, train, CurveRow, TrainOutcome, TrainSetup};
use crate::world::TaskKind;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn policy_checkpoint(cfg: &ExperimentConfig) -> Option<&Path> {
    cfg.policy.checkpoint.as_deref()
}

pub const RUN_SUMMARY_HEADER: &str = "task,object,seed,rollout,episode_seed,steps,final_coverage,success,terminated_early";

/// `[policy].kind` on every selected object of `[task].kind`, for each
/// seed and rollout. Episode logs go to `out/episodes/<object>/s<seed>_r<k>/`.
pub fn run(cfg: &ExperimentConfig, base_seed: u64, out: &Path) -> Result<String> {
    let task = cfg.task.kind;
    let policy = cfg.policy.kind;
    let mut ctl = cfg.controller(policy, task, policy_checkpoint(cfg))?;
    let mut csv = format!("{RUN_SUMMARY_HEADER}\n");
    let mut report = String::new();
    for entry in cfg.objects(task) {
        let env = cfg.env_config(task, &entry);
        let mut cov = Vec::new();
        for seed in cfg.seed_list(base_seed) {
            for r in 0..cfg.experiment.eval_rollouts {
                let ep_seed = rollout_seed(seed, r);
                let log = run_episode(&env, &cfg.noise, cfg.horizon(), &cfg.reward, ctl.as_mut(), ep_seed)?;
                log.write_dir(&out.join("episodes").join(entry.name).join(format!("s{seed}_r{r}")))?;
                csv.push_str(&format!(
                    "{task},{},{seed},{r},{ep_seed},{},{:.6},{},{}\n",
                    entry.name,
                    log.steps.len(),
                    log.final_coverage,
                    log.success as u8,
                    log.terminated_early as u8
                ));
                cov.push(log.final_coverage);
            }
        }
        let (m, s) = mean_std(&cov);
        report.push_str(&format!(
            "{task}/{} {policy}: coverage {:.1} ± {:.1} % (n = {})\n",
            entry.name,
            100.0 * m,
            100.0 * s,
            cov.len()
        ));
    }
    create_dir(out)?;
    write_file(&out.join("summary.csv"), csv.as_bytes())?;
    Ok(report)
}

pub fn matrix(cfg: &ExperimentConfig, base_seed: u64, out: &Path) -> Result<MatrixTable> {
    let table = run_matrix(cfg, &cfg.seed_list(base_seed))?;
    create_dir(out)?;
    write_file(&out.join("matrix.csv"), table.to_csv().as_bytes())?;
    write_file(&out.join("matrix.txt"), table.to_text().as_bytes())?;
    Ok(table)
}

pub fn ablate_efficiency(cfg: &ExperimentConfig, base_seed: u64, out: &Path) -> Result<Vec<EfficiencyReport>> {
    let ex = &cfg.experiment;
    let reports = cfg
        .tasks()
        .into_iter()
        .map(|task| run_efficiency_ablation(cfg, task, ex.efficiency_initial_coverage, ex.efficiency_episodes, base_seed))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = format!("{}\n", EfficiencyReport::CSV_HEADER);
    let mut ratios = String::from("task,ratio\n");
    for r in &reports {
        csv.push_str(&r.csv_rows());
        ratios.push_str(&format!("{},{:.6}\n", r.task, r.ratio()));
    }
    create_dir(out)?;
    write_file(&out.join("efficiency.csv"), csv.as_bytes())?;
    write_file(&out.join("efficiency_ratio.csv"), ratios.as_bytes())?;
    Ok(reports)
}

pub fn train_setup(cfg: &ExperimentConfig, task: TaskKind, seed: u64, out: &Path) -> Result<TrainSetup> {
    let mode = reward_mode(cfg.policy.kind)
        .ok_or_else(|| Error::Config(format!("policy {} is not trainable", cfg.policy.kind)))?;
    Ok(TrainSetup {
        env: cfg.env_config(task, &seen_object(task, &cfg.grid)),
        noise: cfg.noise,
        horizon: cfg.horizon_for(task),
        weights: cfg.reward,
        mode,
        sac: cfg.learn.clone(),
        greedy: cfg.greedy,
        episodes: cfg.experiment.episodes,
        seed,
        dump_path: Some(out.join(format!("diverged_s{seed}.oscl"))),
    })
}

pub fn curve_csv(curve: &[CurveRow]) -> String {
    let mut s = format!("{}\n", CurveRow::CSV_HEADER);
    for row in curve {
        s.push_str(&row.csv_line());
        s.push('\n');
    }
    s
}

/// Trains `[policy].kind` on the seen object of `[task].kind` once per
/// seed, writing `curve_s<seed>.csv` and the checkpoint named by
/// [`checkpoint_name`].
pub fn train_all(cfg: &ExperimentConfig, base_seed: u64, out: &Path) -> Result<Vec<(u64, TrainOutcome)>> {
    create_dir(out)?;
    let task = cfg.task.kind;
    let mut outcomes = Vec::new();
    for seed in cfg.seed_list(base_seed) {
        let outcome = train(&train_setup(cfg, task, seed, out)?)?;
        write_file(&out.join(format!("curve_s{seed}.csv")), curve_csv(&outcome.curve).as_bytes())?;
        checkpoint::save(&outcome.agent, &out.join(checkpoint_name(cfg.policy.kind, task, seed)))?;
        outcomes.push((seed, outcome));
    }
    Ok(outcomes)
}

/// Mean ground-truth coverage over the last `window` episodes of a curve.
pub fn final_window_coverage(curve: &[CurveRow], window: usize) -> f64 {
    let tail = &curve[curve.len().saturating_sub(window)..];
    mean_std(&tail.iter().map(|r| r.coverage).collect::<Vec<_>>()).0
}

/// Renders an existing episode directory, or when `log_dir` is `None`,
/// runs one episode of `[policy].kind` on the first selected object with
/// `seed` and renders that.
pub fn render(cfg: &ExperimentConfig, seed: u64, out: &Path, log_dir: Option<&Path>) -> Result<Vec<PathBuf>> {
    if let Some(dir) = log_dir {
        return render_log_dir(dir, out, cfg.grid.cell_size, cfg.render.scale);
    }
    let log = single_episode(cfg, seed)?;
    log.write_dir(out)?;
    render_log(&log, out, cfg.render.scale)
}

fn single_episode(cfg: &ExperimentConfig, seed: u64) -> Result<EpisodeLog> {
    let task = cfg.task.kind;
    let entry = cfg
        .objects(task)
        .into_iter()
        .next()
        .ok_or_else(|| Error::Config("no object selected".into()))?;
    let mut ctl = cfg.controller(cfg.policy.kind, task, policy_checkpoint(cfg))?;
    run_episode(&cfg.env_config(task, &entry), &cfg.noise, cfg.horizon(), &cfg.reward, ctl.as_mut(), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicyKind;

    fn read(p: &Path) -> Vec<u8> {
        std::fs::read(p).unwrap()
    }

    #[test]
    fn run_writes_summary_and_logs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.task.kind = TaskKind::Mash;
        cfg.task.objects = vec!["ellipse".into()];
        cfg.experiment.seeds = 2;
        cfg.experiment.eval_rollouts = 2;
        let report = run(&cfg, 5, dir.path()).unwrap();
        assert!(report.contains("mash/ellipse sparta_g"));
        let summary = String::from_utf8(read(&dir.path().join("summary.csv"))).unwrap();
        assert_eq!(summary.lines().count(), 5);
        assert!(summary.lines().nth(1).unwrap().starts_with("mash,ellipse,5,0,"));
        assert!(dir.path().join("episodes/ellipse/s6_r1/rewards.csv").exists());
    }

    #[test]
    fn render_from_log_matches_direct_render() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.task.kind = TaskKind::Slice;
        cfg.policy.kind = PolicyKind::Random;
        let direct = render(&cfg, 3, &dir.path().join("a"), None).unwrap();
        assert_eq!(direct.len(), cfg.horizon() + 1);
        let again = render(&cfg, 3, &dir.path().join("b"), Some(&dir.path().join("a"))).unwrap();
        for (p, q) in direct.iter().zip(&again) {
            assert_eq!(read(p), read(q));
        }
    }

    #[test]
    fn training_rejects_non_learned_policies() {
        let cfg = ExperimentConfig::default();
        assert!(train_setup(&cfg, TaskKind::Spread, 0, Path::new(".")).is_err());
    }

    #[test]
    fn tiny_training_run_writes_loadable_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.policy.kind = PolicyKind::SpartaL;
        cfg.experiment.seeds = 1;
        cfg.experiment.episodes = 2;
        cfg.learn.hidden = vec![8, 8];
        cfg.learn.pool = 4;
        cfg.learn.batch = 8;
        cfg.learn.utd = 1;
        let out = train_all(&cfg, 1, dir.path()).unwrap();
        assert_eq!(out[0].1.curve.len(), 2);
        let curve = String::from_utf8(read(&dir.path().join("curve_s1.csv"))).unwrap();
        assert_eq!(curve.lines().count(), 3);
        let ckpt = dir.path().join("sparta_l_spread_s1.oscl");
        assert!(cfg.controller(PolicyKind::SpartaL, TaskKind::Spread, Some(&ckpt)).is_ok());
        assert!(final_window_coverage(&out[0].1.curve, 100) >= 0.0);
    }
}
