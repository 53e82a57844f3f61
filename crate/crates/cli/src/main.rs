//! fockmet: reproducible phase-estimation experiments from JSON configs.
//!
//! Each subcommand reads an optional JSON config, writes its artifacts plus
//! a fully resolved copy of the config into the output directory, then
//! re-reads and validates everything it wrote. Exit status 0 certifies the
//! output directory is complete and well-formed.

mod commands;
mod config;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "fockmet",
    version,
    about = "Simulates and scores single-mode bosonic phase-estimation schemes"
)]
struct Cli {
    /// JSON config for the subcommand (defaults apply when omitted).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Overrides the config's seed for stochastic steps.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads for parallel sweeps (defaults to the CPU count).
    #[arg(long, global = true, value_name = "INT")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Wigner-function grids of the maximum-variance states.
    Wigner,
    /// Probability-versus-phase scan with fringe fit and precision.
    Fringe,
    /// Precision-versus-N table, power-law fit, and baselines.
    Scaling,
    /// Hybrid-scheme parameter optimization per N.
    Optimize,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("building the thread pool")?;
    }

    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating output directory {}", cli.out.display()))?;

    let config_path = cli.config.as_deref();
    match cli.command {
        Command::Wigner => {
            let cfg: config::WignerConfig = config::load(config_path)?;
            commands::run_wigner(cfg, &cli.out)
        }
        Command::Fringe => {
            let cfg: config::FringeConfig = config::load(config_path)?;
            commands::run_fringe(cfg, &cli.out, cli.seed)
        }
        Command::Scaling => {
            let cfg: config::ScalingConfig = config::load(config_path)?;
            commands::run_scaling(cfg, &cli.out, cli.seed)
        }
        Command::Optimize => {
            let cfg: config::OptimizeConfig = config::load(config_path)?;
            commands::run_optimize(cfg, &cli.out)
        }
    }
}
