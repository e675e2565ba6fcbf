use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod artifacts;
mod commands;
mod config;

use commands::Ctx;
use config::{Overrides, RunConfig};

/// Substructure-aware graph OOD detection.
#[derive(Parser, Debug)]
#[command(name = "sgood", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["modularity", "lp"])]
    detector: Option<String>,
    #[arg(long, global = true, value_parser = ["nearest", "literal-max"])]
    score_mode: Option<String>,
    /// Rerun even when the manifest says outputs are current.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse the ID and OOD TUDataset directories and split the ID graphs.
    Ingest,
    /// Detect substructures and build super graphs.
    Partition,
    /// Pretrain, fine-tune and fit the class Gaussians.
    Train,
    /// Score the test set and compute metrics.
    Eval {
        /// Directory holding a trained model; defaults to `<out>/model`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Share of OOD test graphs with a substructure unseen among ID graphs.
    AnalyzeNovelty,
    /// Compare 1-WL and random-init encoder embeddings on hard graph pairs.
    WlBench,
    /// Write synthetic motif datasets in TUDataset format.
    Synth,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::load(
        cli.config.as_deref(),
        Overrides {
            seed: cli.seed,
            out: cli.out,
            detector: cli.detector,
            score_mode: cli.score_mode,
        },
    )?;
    let ctx = Ctx::new(cfg, cli.force);
    match cli.command {
        Command::Ingest => commands::ingest(&ctx),
        Command::Partition => commands::partition(&ctx),
        Command::Train => commands::train_cmd(&ctx),
        Command::Eval { checkpoint } => commands::eval(&ctx, checkpoint.as_deref()),
        Command::AnalyzeNovelty => commands::analyze_novelty(&ctx),
        Command::WlBench => commands::wl_bench(&ctx),
        Command::Synth => commands::synth(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
