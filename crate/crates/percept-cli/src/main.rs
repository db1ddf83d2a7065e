//! `percept` — train and inspect the eye-state, facial-expression, and
//! speaker classifiers from TOML run configs.
//!
//! Every run is driven by a config file plus a mandatory seed, and every
//! artifact writer is deterministic, so rerunning a command with the same
//! inputs reproduces its outputs byte for byte. Exit codes partition
//! failures: 2 for configuration, 3 for data or model files, 4 for
//! numerical failure (NaN) after artifacts are flushed.

mod artifacts;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{load_config, Overrides};
use error::CliError;

#[derive(Parser)]
#[command(name = "percept", version, about = "Train and inspect perception classifiers")]
struct Cli {
    /// Suppress progress output on stdout (warnings still go to stderr).
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract and cache MFCC features for a speaker dataset.
    Featurize {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed (overrides `seed` in the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a classifier and write model + report artifacts.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a saved model on the config's dataset.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Model file written by `train` (default: <out>/model.prcp).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render waveform, spectrogram, and MFCC views of one WAV file.
    Plot {
        #[arg(long)]
        wav: PathBuf,
        /// Output directory for the rendered files.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Featurize { config, out, seed } => {
            let run = load_config(
                &config,
                &Overrides {
                    out,
                    seed,
                    quiet: cli.quiet,
                },
            )?;
            commands::cmd_featurize(&run)
        }
        Command::Train { config, out, seed } => {
            let run = load_config(
                &config,
                &Overrides {
                    out,
                    seed,
                    quiet: cli.quiet,
                },
            )?;
            commands::cmd_train(&run)
        }
        Command::Eval {
            config,
            model,
            out,
            seed,
        } => {
            let run = load_config(
                &config,
                &Overrides {
                    out,
                    seed,
                    quiet: cli.quiet,
                },
            )?;
            let model = model.unwrap_or_else(|| run.out_dir.join("model.prcp"));
            commands::cmd_eval(&run, &model)
        }
        Command::Plot { wav, out } => commands::cmd_plot(&wav, &out, cli.quiet),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
