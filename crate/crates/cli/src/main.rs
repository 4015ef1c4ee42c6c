use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dlae_core::experiment::{run_experiment, run_stage, ExperimentConfig, Stage};
use dlae_core::finders::Method;

/// Locate and classify critical points of a deep linear autoencoder.
#[derive(Debug, Parser)]
#[command(name = "dlae", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (JSON). Defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Restrict to one method: gnm, newton-mr or newton-tr.
    #[arg(long, global = true)]
    method: Option<Method>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the dataset.
    GenData,
    /// Build the ground-truth catalog.
    Catalog,
    /// Train gradient-descent trajectories.
    Train,
    /// Draw finder start points from the trajectories.
    SampleSeeds,
    /// Run the critical point finders.
    Find,
    /// Match classified run end points against the catalog.
    Match,
    /// Write plot tables.
    EmitPlots,
    /// Every stage in order.
    RunAll,
}

impl Command {
    fn stage(&self) -> Option<Stage> {
        Some(match self {
            Command::GenData => Stage::GenData,
            Command::Catalog => Stage::Catalog,
            Command::Train => Stage::Train,
            Command::SampleSeeds => Stage::SampleSeeds,
            Command::Find => Stage::Find,
            Command::Match => Stage::Match,
            Command::EmitPlots => Stage::EmitPlots,
            Command::RunAll => return None,
        })
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)
            .map_err(|e| format!("config {}: {e}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(method) = cli.method {
        config.methods = vec![method];
    }
    config.validate().map_err(|e| format!("config: {e}"))?;
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command.stage() {
        Some(stage) => run_stage(&config, stage),
        None => run_experiment(&config).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
