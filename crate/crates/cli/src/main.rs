//! `osc`: command-line front end for the object state-change simulator.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use osc_core::harness::config::ExperimentConfig;
use osc_core::harness::experiment;

#[derive(Parser)]
#[command(name = "osc", version, about = "Object state-change simulator and experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Base seed; seed i of the experiment is this plus i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out one policy on the configured task and objects.
    Run(Common),
    /// Coverage table over tasks, objects and policies.
    Matrix(Common),
    /// Per-action yield of SPARTA-G against ObjMask on half-done objects.
    AblateEfficiency(Common),
    /// Train a learned policy with soft actor-critic.
    Train(Common),
    /// Write PPM frames for an episode.
    Render {
        #[command(flatten)]
        common: Common,
        /// Episode directory from `run`; if omitted, one episode is run.
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

fn load(path: &Path) -> anyhow::Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(c) => {
            let cfg = load(&c.config)?;
            print!("{}", experiment::run(&cfg, c.seed, &c.out)?);
        }
        Command::Matrix(c) => {
            let cfg = load(&c.config)?;
            print!("{}", experiment::matrix(&cfg, c.seed, &c.out)?.to_text());
        }
        Command::AblateEfficiency(c) => {
            let cfg = load(&c.config)?;
            for r in experiment::ablate_efficiency(&cfg, c.seed, &c.out)? {
                println!(
                    "{}: sparta_g {:.2} cells/action, objmask {:.2} cells/action, ratio {:.2}",
                    r.task,
                    r.sparta_g.per_action(),
                    r.objmask.per_action(),
                    r.ratio()
                );
            }
        }
        Command::Train(c) => {
            let cfg = load(&c.config)?;
            for (seed, outcome) in experiment::train_all(&cfg, c.seed, &c.out)? {
                println!(
                    "seed {seed}: final-100 coverage {:.3}",
                    experiment::final_window_coverage(&outcome.curve, 100)
                );
            }
        }
        Command::Render { common: c, log } => {
            let cfg = load(&c.config)?;
            let frames = experiment::render(&cfg, c.seed, &c.out, log.as_deref())?;
            println!("wrote {} frames to {}", frames.len(), c.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
