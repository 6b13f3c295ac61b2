mod artifacts;
mod commands;
mod config;
mod error;

use artifacts::Artifacts;
use clap::{Args, Parser, Subcommand};
use error::{CliError, Result};
use std::path::PathBuf;
use std::process::ExitCode;

/// Nearly-unstable Hawkes models and their rough-volatility limits.
#[derive(Parser)]
#[command(name = "roughhawkes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the scaling-limit assumptions of the configured model.
    Check(RunArgs),
    /// Simulate the microscopic Hawkes model at each horizon in T_list.
    SimMicro(RunArgs),
    /// Simulate the limiting rough-volatility model.
    SimMacro(RunArgs),
    /// Compare micro ensembles against the macro expectation across T_list.
    Converge(RunArgs),
    /// Eigen-structure of the sector model's price covariance.
    Spectrum(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides master_seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides output_dir from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cli: Cli) -> Result<Option<String>> {
    let (name, args) = match &cli.command {
        Command::Check(a) => ("check", a),
        Command::SimMicro(a) => ("sim-micro", a),
        Command::SimMacro(a) => ("sim-macro", a),
        Command::Converge(a) => ("converge", a),
        Command::Spectrum(a) => ("spectrum", a),
    };
    let loaded = config::load(&args.config)?;
    let cfg = &loaded.config;
    let seed = args.seed.unwrap_or(cfg.master_seed);
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let root = args.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    // commands validate before their first write, so a bad config leaves no output behind
    let mut out = Artifacts::new(&root);
    let outcome = match &cli.command {
        Command::Check(_) => commands::check(cfg, &mut out),
        Command::SimMicro(_) => commands::sim_micro(cfg, seed, &mut out),
        Command::SimMacro(_) => commands::sim_macro(cfg, seed, &mut out),
        Command::Converge(_) => commands::converge(cfg, seed, &mut out),
        Command::Spectrum(_) => commands::spectrum(cfg, &mut out),
    }?;
    out.finish(name, &loaded.bytes, seed)?;
    Ok(outcome)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(reason)) => {
            eprintln!("error: check failed: {reason}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
