use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgGroup, Parser, Subcommand};
use m2bm_core::beamform::DEFAULT_MVDR_LOADING;

use crate::commands::{self, BeamformArgs, EstimateSource};
use crate::error::Result;
use crate::wav::SampleFormat;

/// Weakly-supervised multichannel speech enhancement with beamformed
/// training targets.
#[derive(Debug, Parser)]
#[command(name = "m2bm", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scene config to mixture.wav, target.wav and noise.wav.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: SampleFormat,
    },
    /// Compute the MVDR-beamformed mixture of a multichannel recording.
    #[command(group(ArgGroup::new("source").required(true).args(["oracle", "estimates", "checkpoint"])))]
    Beamform {
        mixture: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ref_mic: usize,
        /// Use target.wav and noise.wav next to the mixture.
        #[arg(long)]
        oracle: bool,
        /// Directory holding per-mic target.wav and noise.wav estimates.
        #[arg(long)]
        estimates: Option<PathBuf>,
        /// Enhance every selected mic with a trained model.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated microphone subset; defaults to all.
        #[arg(long, value_delimiter = ',')]
        mics: Option<Vec<usize>>,
        #[arg(long)]
        win: Option<usize>,
        #[arg(long)]
        hop: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MVDR_LOADING)]
        loading: f64,
        #[arg(long, value_enum, default_value_t)]
        format: SampleFormat,
    },
    /// Train a model from a JSON config.
    Train {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a checkpoint on a mixture and write the reference-mic estimate.
    Enhance {
        checkpoint: PathBuf,
        mixture: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ref_mic: Option<usize>,
        #[arg(long, value_enum, default_value_t)]
        format: SampleFormat,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on scenes, or run the training-mode benchmark.
    Eval {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(command: Command) -> Result<PathBuf> {
    match command {
        Command::Simulate { config, out, format } => commands::simulate(&config, &out, format),
        Command::Beamform { mixture, out, ref_mic, oracle, estimates, checkpoint, mics, win, hop, loading, format } => {
            let estimates = match (oracle, estimates, checkpoint) {
                (_, Some(dir), _) => EstimateSource::Directory(dir),
                (_, _, Some(p)) => EstimateSource::Checkpoint(p),
                _ => EstimateSource::Oracle,
            };
            let args = BeamformArgs { mixture, estimates, ref_mic, mics, win, hop, loading, format };
            commands::beamform(&args, &out)
        }
        Command::Train { config, out } => commands::train(&config, &out),
        Command::Enhance { checkpoint, mixture, out, ref_mic, format } => {
            commands::enhance(&checkpoint, &mixture, &out, ref_mic, format)
        }
        Command::Gradcheck { config, out } => commands::gradcheck(&config, &out),
        Command::Eval { config, out } => commands::eval(&config, &out),
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(manifest) => {
            println!("wrote {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
