//! `vocbf`: run circle-swap episodes, sweep controllers and plot traces.

mod commands;
mod config_file;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vocbf::ControllerKind;

use crate::config_file::Overrides;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "vocbf", version, about = "Multi-agent collision avoidance benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file; keys left out take the defaults of its dynamics.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed of the episode (run) or of the first episode (compare).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one episode and write trace.csv, metrics.json and manifest.json.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controller: Option<ControllerKind>,
        #[arg(long)]
        agents: Option<usize>,
    },
    /// Run every (agents, controller) cell over several seeds and write table.csv.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated controllers.
        #[arg(long, value_delimiter = ',', default_value = "ours,vo,rvo,hvo,ovvo")]
        controller: Vec<ControllerKind>,
        /// Comma-separated agent counts.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,12")]
        agents: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
    },
    /// Render a trace as an SVG of the trajectories.
    Plot {
        trace: PathBuf,
        /// Output file; defaults to trajectories.svg next to the trace.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

/// Sizes the global pool from `NAV_THREADS` when set.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("NAV_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("NAV_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Run {
            common,
            controller,
            agents,
        } => {
            let overrides = Overrides {
                seed: common.seed,
                controller,
                agents,
            };
            commands::cmd_run(common.config.as_deref(), &overrides, &common.out_dir)
        }
        Command::Compare {
            common,
            controller,
            agents,
            seeds,
        } => {
            let overrides = Overrides {
                seed: common.seed,
                ..Overrides::default()
            };
            let sweep = commands::Sweep {
                controllers: controller,
                agents,
                seeds,
            };
            commands::cmd_compare(common.config.as_deref(), &overrides, &sweep, &common.out_dir)
        }
        Command::Plot { trace, output } => {
            let output = output.unwrap_or_else(|| trace.with_file_name("trajectories.svg"));
            commands::cmd_plot(&trace, &output)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
