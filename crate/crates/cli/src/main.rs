//! `dpda` command-line entry point.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpda::DpdaError;

#[derive(Parser, Debug)]
#[command(name = "dpda", version, about = "Dual-path augmented training with gradient alignment")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.lr=0.01`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub sets: Vec<String>,
    /// Output directory. Defaults to `$DPDA_OUT/<command>-seed<seed>`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and evaluate it on the test split.
    Train,
    /// Probe the loss surface around a checkpoint.
    Surface {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Summarise and compare finished training runs.
    Compare {
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
    },
    /// Generate the synthetic corpus manifest, or dump it as WAV files.
    Dataset {
        action: DatasetAction,
        /// Restrict to one split.
        #[arg(long)]
        split: Option<dpda::audio::Split>,
        /// At most this many utterances per split.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Write clean and augmented WAVs for a few training utterances.
    AugmentPreview {
        #[arg(long, default_value_t = 4)]
        count: usize,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum DatasetAction {
    Generate,
    Dump,
}

fn exit_code(e: &DpdaError) -> u8 {
    match e {
        DpdaError::Config(_) | DpdaError::Input(_) | DpdaError::Json(_) | DpdaError::DimensionMismatch { .. } => 2,
        e if e.is_numeric() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let c = &cli.common;
    let result = match cli.command {
        Command::Train => commands::train(c),
        Command::Surface { checkpoint } => commands::surface(c, &checkpoint),
        Command::Compare { runs } => commands::compare(c, &runs),
        Command::Dataset { action, split, limit } => {
            commands::dataset(c, matches!(action, DatasetAction::Dump), split, limit)
        }
        Command::AugmentPreview { count } => commands::augment_preview(c, count),
    };
    match result {
        Ok(out) => {
            println!("{}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
