use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cgmc_cli::commands::{
    cmd_compare, cmd_exit_times, cmd_mean_field, cmd_oracle_check, cmd_simulate,
};
use cgmc_cli::Overrides;
use cgmc_core::kmc::TimeStepMode;

/// Coarse-grained kinetic Monte Carlo for 1-D adsorption/desorption
/// lattice dynamics.
#[derive(Parser)]
#[command(name = "cgmc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores; CGMC_WORKERS as fallback).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Waiting-time convention override.
    #[arg(long, global = true, value_enum)]
    time_step: Option<TimeStepArg>,

    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TimeStepArg {
    Paper,
    Exponential,
}

#[derive(Subcommand)]
enum Command {
    /// Write coverage trajectories (and optional snapshots) per level.
    Simulate,
    /// Weak/strong errors of coarse levels against the q=1 reference.
    Compare,
    /// Exit-time statistics and PDFs per level.
    ExitTimes,
    /// Mean-field equilibrium coverage curve over an external-field grid.
    MeanField,
    /// Exhaustive-oracle self check on built-in tiny instances.
    OracleCheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        seed: cli.seed,
        workers: cli.workers,
        time_step: cli.time_step.map(|t| match t {
            TimeStepArg::Paper => TimeStepMode::Paper,
            TimeStepArg::Exponential => TimeStepMode::Exponential,
        }),
        out: cli.out.clone(),
    };

    let need_config = || {
        cli.config
            .clone()
            .ok_or_else(|| "this command needs --config <path>".to_string())
    };

    let outcome = match cli.command {
        Command::Simulate => need_config()
            .map_err(|e| e.to_string())
            .and_then(|c| cmd_simulate(&c, &overrides).map_err(|e| e.to_string())),
        Command::Compare => need_config()
            .map_err(|e| e.to_string())
            .and_then(|c| cmd_compare(&c, &overrides).map_err(|e| e.to_string())),
        Command::ExitTimes => need_config()
            .map_err(|e| e.to_string())
            .and_then(|c| cmd_exit_times(&c, &overrides).map_err(|e| e.to_string())),
        Command::MeanField => need_config()
            .map_err(|e| e.to_string())
            .and_then(|c| cmd_mean_field(&c, &overrides).map_err(|e| e.to_string())),
        Command::OracleCheck => match cmd_oracle_check(cli.out.as_deref()) {
            Ok(true) => Ok(()),
            Ok(false) => Err("oracle check reported violations".to_string()),
            Err(e) => Err(e.to_string()),
        },
    };

    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("cgmc: {message}");
            ExitCode::FAILURE
        }
    }
}
