//! `lqbe`: batch driver for the linearized phonon Boltzmann laboratory.
//!
//! Exit codes: 0 success, 1 output I/O failure, 2 config error, 3 numerical
//! failure, 4 acceptance failure.

mod commands;
mod config;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Command, RunConfig};
use failure::CliResult;
use output::OutDir;

const DEFAULT_OUT: &str = "lqbe-out";

#[derive(Parser)]
#[command(name = "lqbe", version, about = "Linearized phonon Boltzmann operator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration; missing sections take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized data; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Tabulate φ, φ₀, Γ and the kernel row norms; study C₀ under cutoff changes.
    Kernels,
    /// Spectral gap and nullspace diagnostics over a ladder of grids.
    Spectrum,
    /// Evolve the configured initial data and record diagnostics.
    Evolve,
    /// Fit the algebraic decay rate and measure half-decay times of bumps.
    DecayStudy,
    /// Evolve a spherical-harmonic field toward its stationary state.
    #[command(name = "3d")]
    ThreeD,
    /// Run the acceptance suite.
    Verify,
}

impl Cmd {
    fn kind(self) -> Command {
        match self {
            Cmd::Kernels => Command::Kernels,
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Evolve => Command::Evolve,
            Cmd::DecayStudy => Command::DecayStudy,
            Cmd::ThreeD => Command::ThreeD,
            Cmd::Verify => Command::Verify,
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = Some(out);
    }
    let cfg = cfg.resolve(cli.command.kind())?;
    let root = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let out = OutDir::create(&root)?;
    out.json("config.json", &cfg)?;
    match cli.command {
        Cmd::Kernels => commands::kernels(&cfg, &out),
        Cmd::Spectrum => commands::spectrum(&cfg, &out),
        Cmd::Evolve => commands::evolve(&cfg, &out),
        Cmd::DecayStudy => commands::decay_study(&cfg, &out),
        Cmd::ThreeD => commands::three_d(&cfg, &out),
        Cmd::Verify => commands::verify(&cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
