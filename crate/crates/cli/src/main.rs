//! Command-line front end: micrograph simulation, reconstruction, picking,
//! and evaluation driven by one JSON experiment config.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use micrem_core::error::{Error, Result};

use crate::commands::pick::PickArgs;
use crate::config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "micrem",
    version,
    about = "Simulate cryo-EM micrographs and reconstruct 3-D volumes from their patches"
)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker thread count; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Basis cache directory; falls back to MICREM_CACHE_DIR.
    #[arg(long, global = true, value_name = "DIR")]
    cache_dir: Option<PathBuf>,

    /// Override sim.seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override sim.snr from the config.
    #[arg(long, global = true)]
    snr: Option<f64>,

    /// Override sim.gamma from the config.
    #[arg(long, global = true)]
    gamma: Option<f64>,

    /// Override em.seed from the config.
    #[arg(long, global = true)]
    em_seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate micrographs, a manifest, and the ground truth behind them.
    Simulate {
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Estimate volume coefficients from a simulated dataset.
    Reconstruct {
        /// Manifest written by `simulate`.
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
        /// Checkpoint to resume from; refused if the config hash differs.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Pick per-patch shifts against a known or estimated volume and score
    /// them against the simulator's ground truth.
    Pick {
        /// Manifest written by `simulate`.
        #[arg(long)]
        manifest: PathBuf,
        /// Volume coefficients JSON (implies a uniform shift prior).
        #[arg(long)]
        coefficients: Option<PathBuf>,
        /// Reconstruction checkpoint supplying volume and shift prior.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Empty-patch energy threshold; overrides pick.energy_fraction.
        #[arg(long)]
        energy_fraction: Option<f64>,
        /// Output JSON file.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Fourier shell correlation of a volume against a reference.
    Evaluate {
        /// Volume under test (MRC).
        volume: PathBuf,
        /// Reference volume (MRC).
        reference: PathBuf,
        /// Search rotations, reflection, and integer shifts first.
        #[arg(long)]
        align: bool,
        /// Write the curve here as CSV instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit nonzero unless resolved through this shell; overrides
        /// evaluate.resolved_through_shell.
        #[arg(long)]
        resolved_through: Option<usize>,
    },
    /// Project a coefficient volume at given Euler angles to an MRC image.
    RenderProjection {
        /// Volume coefficients JSON.
        #[arg(long)]
        coefficients: PathBuf,
        /// Intrinsic z-y-z Euler angles in radians: "a,b,g".
        #[arg(long)]
        euler: String,
        /// Output MRC image.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Build (or verify) the basis cache entry for the configured parameters.
    CacheBasis,
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::MemoryBudget { .. } => 1,
        Error::Numerical(_) => 2,
        Error::Io(_) | Error::Format(_) => 3,
    }
}

/// Config plus overrides, validated after the overrides land.
fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::validation("this subcommand needs --config"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(v) = cli.seed {
        cfg.sim.config.seed = v;
    }
    if let Some(v) = cli.snr {
        cfg.sim.config.snr = v;
    }
    if let Some(v) = cli.gamma {
        cfg.sim.config.gamma = v;
    }
    if let Some(v) = cli.em_seed {
        cfg.em.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let cache = cli
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os("MICREM_CACHE_DIR").map(PathBuf::from));
    let cache = cache.as_deref();

    match &cli.command {
        Command::Simulate { out } => commands::simulate::run(&load_config(cli)?, out, cache),
        Command::Reconstruct { manifest, out, resume } => commands::reconstruct::run(
            &load_config(cli)?,
            manifest,
            out,
            resume.as_deref(),
            cache,
        ),
        Command::Pick { manifest, coefficients, checkpoint, energy_fraction, out } => {
            commands::pick::run(
                &load_config(cli)?,
                PickArgs {
                    manifest,
                    coefficients: coefficients.as_deref(),
                    checkpoint: checkpoint.as_deref(),
                    energy_fraction: *energy_fraction,
                    out,
                },
            )
        }
        Command::Evaluate { volume, reference, align, out, resolved_through } => {
            // evaluate works without a config; load one only when given.
            let cfg = match &cli.config {
                Some(_) => Some(load_config(cli)?),
                None => None,
            };
            commands::evaluate::run(
                volume,
                reference,
                *align,
                out.as_deref(),
                *resolved_through,
                cfg.as_ref(),
            )
        }
        Command::RenderProjection { coefficients, euler, out } => {
            commands::render::run(&load_config(cli)?, coefficients, euler, out, cache)
        }
        Command::CacheBasis => commands::cache::run(&load_config(cli)?, cache),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: could not size the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code.clamp(0, 255) as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
