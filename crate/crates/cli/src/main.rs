//! Pipeline driver: preprocess -> lda-fit -> tree-fit -> validate -> report.
//!
//! Every stage reads one JSON config (`--config`) and exchanges data through
//! files in the output directory, so stages can be rerun independently.
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

mod artifacts;
mod commands;
mod config;

use clap::{Parser, Subcommand};
use config::PipelineConfig;
use std::path::PathBuf;
use tmtree::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tmtree",
    version,
    about = "Interpretable segmentation of text + count records: topic preprocessing, negative binomial model trees, stability validation"
)]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap the worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override the artifact directory from the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the vocabulary and per-document term counts from the input table.
    Preprocess,
    /// Fit the topic model and write hard assignments and topic terms.
    LdaFit,
    /// Grow the negative binomial model tree over the split candidates.
    TreeFit,
    /// Resampling stability study and per-segment fit diagnostics.
    Validate,
    /// Render a markdown summary of the fitted artifacts.
    Report,
}

fn run(cli: Cli) -> Result<()> {
    let config_path = cli
        .config
        .ok_or_else(|| Error::Config("--config <file> is required".into()))?;
    let mut cfg = PipelineConfig::load(&config_path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    if let Some(out_dir) = cli.out_dir {
        cfg.out_dir = out_dir;
    }
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }

    match cli.command {
        Command::Preprocess => commands::preprocess(&cfg),
        Command::LdaFit => commands::lda_fit(&cfg),
        Command::TreeFit => commands::tree_fit(&cfg),
        Command::Validate => commands::validate(&cfg),
        Command::Report => commands::report(&cfg),
    }
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
