//! `rift-sim`: scenario generation, closed-loop simulation, training, metric reports and plots.

mod commands;
mod config;
mod error;
mod plot;

use clap::{Args, Parser, Subcommand};
use config::{Overrides, RunConfig};
use error::{CliError, CliResult};
use rift_core::reward::Style;
use rift_core::trainer::Objective;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const THREADS_ENV: &str = "RIFT_SIM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "rift-sim",
    version,
    about = "Closed-loop traffic simulation and scoring-head fine-tuning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the built-in four-way intersection scenario as JSON.
    Scenario {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "normal")]
        style: Style,
    },
    /// Run episodes without updates and write their logs.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Fine-tune the scoring head and write the checkpoint and per-epoch stats.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        objective: Option<Objective>,
        /// Start from this checkpoint instead of the uniform policy.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compute the metric report for a directory of episode logs.
    Metrics {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render speed and acceleration histograms and the training-return curve.
    Plot {
        /// `train_stats.jsonl` written by `train`.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Directory of episode logs written by `simulate`.
        #[arg(long)]
        logs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    style: Option<Style>,
    #[arg(long)]
    out: PathBuf,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            scenario: self.scenario.clone(),
            style: self.style,
            ..Overrides::default()
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "{THREADS_ENV} must be a positive integer, got '{raw}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Scenario { out, seed, style } => commands::cmd_scenario(&out, seed, style),
        Command::Simulate {
            run,
            checkpoint,
            episodes,
        } => {
            let cfg = RunConfig::resolve(
                run.config.as_deref(),
                Overrides {
                    checkpoint,
                    episodes,
                    ..run.overrides()
                },
            )?;
            commands::cmd_simulate(&cfg, &run.out)
        }
        Command::Train {
            run,
            objective,
            checkpoint,
        } => {
            let cfg = RunConfig::resolve(
                run.config.as_deref(),
                Overrides {
                    objective,
                    checkpoint,
                    ..run.overrides()
                },
            )?;
            commands::cmd_train(&cfg, &run.out)
        }
        Command::Metrics { logs, out, config } => {
            let cfg = RunConfig::resolve(config.as_deref(), Overrides::default())?;
            commands::cmd_metrics(&cfg, &logs, &out)
        }
        Command::Plot { stats, logs, out } => {
            plot::cmd_plot(stats.as_deref(), logs.as_deref(), Path::new(&out))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
