//! `percept-synth` — generate the synthetic demo datasets: pure-tone
//! "speakers", bright/dark-center eye blobs, and oriented-grating
//! expression CSVs. Output is fully determined by the seed, so two runs
//! with the same arguments produce identical files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use percept_core::synth::{
    write_eye_dataset, write_fer_csv, write_speaker_dataset, SpeakerSynth, SynthError,
};

#[derive(Parser)]
#[command(
    name = "percept-synth",
    version,
    about = "Generate synthetic demo datasets for the percept classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Five pure-tone "speakers" as WAV clips plus a manifest.csv.
    Speaker {
        /// Dataset directory to create.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        clips_per_class: usize,
        #[arg(long, default_value_t = 16_000)]
        sample_rate: u32,
        #[arg(long, default_value_t = 1.0)]
        seconds: f64,
    },
    /// Bright-center vs dark-center 64x64 blobs plus a manifest.csv.
    Eye {
        /// Dataset directory to create.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 13)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        per_class: usize,
    },
    /// Seven oriented-grating classes as a pixel CSV.
    Fer {
        /// CSV file to create.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 21)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        per_class: usize,
    },
}

fn run(cli: Cli) -> Result<(), SynthError> {
    match cli.command {
        Command::Speaker {
            out,
            seed,
            clips_per_class,
            sample_rate,
            seconds,
        } => {
            let cfg = SpeakerSynth {
                clips_per_class,
                sample_rate,
                seconds,
                ..SpeakerSynth::default()
            };
            let manifest = write_speaker_dataset(&out, &cfg, seed)?;
            println!(
                "wrote {} clips for 5 tone classes; manifest at {}",
                5 * clips_per_class,
                manifest.display()
            );
        }
        Command::Eye {
            out,
            seed,
            per_class,
        } => {
            let manifest = write_eye_dataset(&out, per_class, seed)?;
            println!(
                "wrote {} blob images for 2 classes; manifest at {}",
                2 * per_class,
                manifest.display()
            );
        }
        Command::Fer {
            out,
            seed,
            per_class,
        } => {
            write_fer_csv(&out, per_class, seed)?;
            println!(
                "wrote {} grating images for 7 classes to {}",
                7 * per_class,
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
