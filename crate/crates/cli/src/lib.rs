//! `tagwatch` command-line front end: generate, train, search, detect, score.
//!
//! Exit codes: 0 success, 2 configuration or validation error, 3 runtime error.

pub mod commands;
pub mod config;
pub mod data;
pub mod manifest;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] tagwatch::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }

    pub(crate) fn csv(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "tagwatch",
    version,
    about = "Forecast-residual anomaly detection for industrial tag data"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides one config key, e.g. `--set train.epochs=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic train/test pair with injected attacks.
    Generate,
    /// Train a forecaster and calibrate a detector bundle.
    Train,
    /// Genetic architecture search, then train the best genome.
    Search {
        /// Continue from the last completed generation.
        #[arg(long)]
        resume: bool,
    },
    /// Run a detector bundle over the test file.
    Detect {
        #[arg(long, value_name = "DIR")]
        bundle: Option<PathBuf>,
        /// Also write an SVG of the error series.
        #[arg(long)]
        svg: bool,
    },
    /// Score detection reports against labelled data.
    Score {
        /// Labelled CSV (defaults to dataset.test).
        #[arg(long, value_name = "PATH")]
        truth: Option<PathBuf>,
        /// Directory holding events.csv and series.csv.
        #[arg(long, value_name = "DIR")]
        detections: Option<PathBuf>,
        /// Attack list with target tags.
        #[arg(long, value_name = "PATH")]
        attacks: Option<PathBuf>,
    },
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(
        cli.config.as_deref(),
        &cli.overrides,
        cli.seed,
        cli.out.as_deref(),
    )?;
    let q = cli.quiet;
    match &cli.command {
        Command::Generate => commands::generate(&cfg, q).map(drop),
        Command::Train => commands::train_cmd(&cfg, q).map(drop),
        Command::Search { resume } => commands::search_cmd(&cfg, *resume, q).map(drop),
        Command::Detect { bundle, svg } => {
            commands::detect_cmd(&cfg, bundle.as_deref(), *svg, q).map(drop)
        }
        Command::Score {
            truth,
            detections,
            attacks,
        } => commands::score_cmd(
            &cfg,
            truth.as_deref(),
            detections.as_deref(),
            attacks.as_deref(),
            q,
        )
        .map(drop),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
