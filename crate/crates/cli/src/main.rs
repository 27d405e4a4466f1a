//! `klab`: command-line driver for the lattice experiments.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use klab_core::config::OutputFormat;

#[derive(Debug, Parser)]
#[command(name = "klab", version, about = "Hyperspherical lattice field experiments")]
pub struct Cli {
    /// JSON run configuration (unknown keys are rejected).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Global seed; overrides the config. Every chain seed is derived from it.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true, env = "KLAB_WORKERS", value_name = "N",
          value_parser = clap::value_parser!(u32).range(1..))]
    pub workers: Option<u32>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Both => OutputFormat::Both,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Power-counting regime of a |φ|^p interaction in n dimensions.
    Classify {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        n: u32,
    },
    /// Exact uniform-sphere moments, optionally checked by Monte Carlo.
    Moments(MomentsArgs),
    /// One lattice, one measure: chain estimates of the configured observables.
    Run,
    /// A grid of lattices and measures with power-law fits.
    Sweep,
    /// Divergence comparison of both measures; exits 3 if any check fails.
    Report,
    /// Characteristic functional, mass divergence and moments of the
    /// generalized-Poisson model.
    Poisson,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("moment").required(true).args(["pair", "single", "exponents"])))]
pub struct MomentsArgs {
    /// Number of sphere coordinates.
    #[arg(long = "N", value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub sites: u64,
    /// `⟨η_k² η_l²⟩` with k = l (same) or k ≠ l (different).
    #[arg(long, value_enum)]
    pub pair: Option<Pair>,
    /// `⟨η_k^E⟩`
    #[arg(long, value_name = "E")]
    pub single: Option<u32>,
    /// Comma-separated exponents over distinct coordinates, e.g. `4,2`.
    #[arg(long, value_name = "LIST")]
    pub exponents: Option<String>,
    /// Monte Carlo cross-check with this many samples.
    #[arg(long, value_name = "SAMPLES")]
    pub mc: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pair {
    Same,
    Different,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
