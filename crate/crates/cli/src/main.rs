//! `sbd` — unsupervised stereotypical-behaviour detection over pose
//! keypoint sequences: synthesize data, train the three streams, score,
//! evaluate, and run the ablation and weight-search harnesses.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use sbd_core::Error;

#[derive(Parser)]
#[command(name = "sbd", version, about = "Pose-based behavioural anomaly detection pipeline")]
struct Cli {
    /// Run configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the seeded synthetic dataset into the run directory.
    Synth,
    /// Train streams on the (unlabeled) train split and write checkpoints.
    Train {
        /// Comma-separated subset of {pr, pp, rd}.
        #[arg(long, default_value = "pr,pp,rd")]
        streams: String,
    },
    /// Score the test split with the trained checkpoints.
    Score,
    /// Compute micro/macro AUROC from the score CSV.
    Eval,
    /// Run the T / dimensionality / stream-subset ablation grid.
    Ablate,
    /// Grid-search the fusion weights on the scored validation data.
    Gridsearch,
}

/// Stable exit codes: 0 success, 1 usage, 2 I/O, 3 contract, 4 training,
/// 5 compatibility, 6 missing data.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Usage(_) | Error::Config(_) => 1,
        Error::Io(_) | Error::Parse { .. } | Error::DegeneratePose { .. } => 2,
        Error::Contract(_) => 3,
        Error::Training { .. } => 4,
        Error::Incompatible(_) | Error::Dimension(_) => 5,
        Error::MissingData(_) | Error::UndefinedMetric(_) => 6,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match RunConfig::load(cli.config.as_deref(), cli.seed, cli.out) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("sbd: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let (name, result) = match &cli.cmd {
        Cmd::Synth => ("synth", commands::cmd_synth(&cfg)),
        Cmd::Train { streams } => ("train", commands::cmd_train(&cfg, streams)),
        Cmd::Score => ("score", commands::cmd_score(&cfg)),
        Cmd::Eval => ("eval", commands::cmd_eval(&cfg)),
        Cmd::Ablate => ("ablate", commands::cmd_ablate(&cfg)),
        Cmd::Gridsearch => ("gridsearch", commands::cmd_gridsearch(&cfg)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sbd {name}: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
