//! Experiment runner for the air-taxi demand classifier.
//!
//! The pipeline is split into subcommands that communicate only through
//! files under the output directory (see [`artifacts`]):
//! `generate` → `prepare` → `train` → `evaluate` → `importance` → `report`,
//! with `run` chaining all six.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod stages;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, CliResult, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME};

#[derive(Debug, Parser)]
#[command(name = "skyport", version, about = "Air-taxi demand-level classification experiments")]
pub struct Cli {
    /// TOML run configuration; every field is optional.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Output directory, overriding the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write synthetic trips, hourly weather and a manifest of planted signals.
    Generate,
    /// Cluster pickups per K and build the cleaned, labelled, encoded datasets.
    Prepare,
    /// Grid-search and fit every learner for every K.
    Train,
    /// Score the fitted models on the held-out split.
    Evaluate,
    /// Permutation feature importance of the chosen learners.
    Importance,
    /// Summarize every artifact into report.md with demand histograms.
    Report,
    /// All of the above in order.
    Run,
}

impl Cli {
    /// The configuration with command-line overrides applied and validated.
    pub fn resolve_config(&self) -> CliResult<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(output) = &self.output {
            config.output = output.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

pub fn execute(command: Command, config: &RunConfig) -> CliResult<()> {
    use stages::*;
    match command {
        Command::Generate => generate::run(config).map(drop),
        Command::Prepare => prepare::run(config).map(drop),
        Command::Train => train::run(config).map(drop),
        Command::Evaluate => evaluate::run(config).map(drop),
        Command::Importance => importance::run(config).map(drop),
        Command::Report => report::run(config).map(drop),
        Command::Run => {
            generate::run(config)?;
            prepare::run(config)?;
            train::run(config)?;
            evaluate::run(config)?;
            importance::run(config)?;
            report::run(config).map(drop)
        }
    }
}

fn run_cli(cli: &Cli) -> CliResult<()> {
    let config = cli.resolve_config()?;
    if cli.jobs == Some(0) {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot build the thread pool: {e}")))?;
    pool.install(|| execute(cli.command, &config))
}

/// Parse `args` (program name first), run, and return the exit status.
/// Failures are reported on stderr as one JSON line.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            let err = CliError::Config(first.trim_start_matches("error: ").to_string());
            eprintln!("{}", err.to_json_line());
            return EXIT_CONFIG;
        }
    };
    match run_cli(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            e.exit_code()
        }
    }
}
