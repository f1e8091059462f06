//! Configuration-driven experiment runner for raf-lab.
//!
//! Each subcommand reads one JSON experiment file, runs every seed as an
//! independent job and writes `curves_<seed>.csv`, `certificates/*.json` and
//! `report.json` into the output directory.

pub mod config;
pub mod error;
pub mod report;
pub mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{parse_config, parse_config_str, Command, ExperimentConfig};
pub use error::CliError;
pub use report::RunReport;
pub use run::{execute, RunOptions};

/// Output directory used when neither the flag nor the config names one.
pub const DEFAULT_OUT_DIR: &str = "raf-lab-out";

#[derive(Debug, Parser)]
#[command(name = "raf-lab", version, about = "Reproducing activation function experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Train a network on a catalog PDE or regression problem.
    Train(RunArgs),
    /// Kernel conditioning at initialization.
    Ntk(RunArgs),
    /// Build exact constructive networks and certify them.
    Reproduce(RunArgs),
    /// Fit a coordinate network to an image or series.
    FitSignal(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out_dir: Option<PathBuf>,
    /// Run only this seed.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub quiet: bool,
}

impl CliCommand {
    pub fn split(&self) -> (Command, &RunArgs) {
        match self {
            CliCommand::Train(a) => (Command::Train, a),
            CliCommand::Ntk(a) => (Command::Ntk, a),
            CliCommand::Reproduce(a) => (Command::Reproduce, a),
            CliCommand::FitSignal(a) => (Command::FitSignal, a),
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run_cli(cli: &Cli) -> i32 {
    let (command, args) = cli.command.split();
    match run_command(command, args) {
        Ok(report) => match report.numeric_abort() {
            Some(a) => {
                eprintln!("error: training aborted at iteration {}: {}", a.iteration, a.error);
                3
            }
            None => 0,
        },
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_command(command: Command, args: &RunArgs) -> Result<RunReport, CliError> {
    let mut cfg = parse_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.override_seed(seed);
    }
    let out_dir = args.out_dir.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| DEFAULT_OUT_DIR.into());
    let opts = RunOptions { out_dir, quiet: args.quiet, threads: None };
    execute(command, &cfg, &opts)
}
