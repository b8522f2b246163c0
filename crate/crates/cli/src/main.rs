//! Command-line front end: phantoms, force-field dumps, burning balloon
//! snakes and the two-stage level set.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use config::RunConfig;
use firefront::Error;
use run::{Pipeline, Status};

#[derive(Parser)]
#[command(name = "firefront", version, about = "Active contour segmentation of grayscale images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration; omitted sections take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Write an overlay frame every N steps.
    #[arg(long, global = true)]
    overlay_every: Option<usize>,
    /// Noise seed for generated phantoms.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Dump the edge map, potential and force of the input.
    ForceField,
    /// Balloon snake with burning topology splitting.
    SnakeMulti,
    /// Two-stage narrow-band geodesic active contour.
    Gac,
    /// Render a synthetic test scene and its ground truth.
    Phantom,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_IO: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::ImageRead { .. } | Error::ImageWrite { .. } => EXIT_IO,
        Error::InvalidParameter { .. }
        | Error::ImageTooSmall { .. }
        | Error::DimensionMismatch { .. }
        | Error::CflViolation { .. }
        | Error::PhantomOutOfBounds(_)
        | Error::Csv { .. } => EXIT_CONFIG,
        Error::ContourVanished | Error::ReleaseIncomplete { .. } => EXIT_NOT_CONVERGED,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let pipeline = match cli.command {
        Command::ForceField => Pipeline::ForceField,
        Command::SnakeMulti => Pipeline::SnakeMulti,
        Command::Gac => Pipeline::Gac,
        Command::Phantom => Pipeline::Phantom,
    };
    let mut cfg = match &cli.config {
        None => RunConfig::default(),
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    error!("cannot read {}: {e}", path.display());
                    return ExitCode::from(EXIT_IO);
                }
            };
            match RunConfig::parse(&text) {
                Ok(c) => c,
                Err(e) => {
                    error!("config {}: {e}", path.display());
                    return ExitCode::from(EXIT_CONFIG);
                }
            }
        }
    };
    if let Some(n) = cli.overlay_every {
        cfg.output.overlay_every = n;
    }
    if let Some(s) = cli.seed {
        cfg.input.noise_seed = s;
    }
    match run::run(pipeline, cfg, &cli.out) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            error!("{}: did not converge; partial results written", pipeline.name());
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(e) => {
            error!("{}: {e}", pipeline.name());
            ExitCode::from(exit_code(&e))
        }
    }
}
