//! `synthsearch` command-line driver.
//!
//! Exit codes: 0 success (including budget-limited runs), 2 config or I/O
//! error, 3 model protocol error or unavailable model.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use synthsearch::gateway::GatewayError;
use synthsearch::search::SearchError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model error: {0}")]
    Protocol(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Protocol(_) => 3,
        }
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::ModelUnavailable(_) | GatewayError::Protocol(_) => CliError::Protocol(e.to_string()),
            GatewayError::Io { .. } | GatewayError::Parse { .. } | GatewayError::InvalidConfig(_) => {
                CliError::Config(e.to_string())
            }
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::InvalidConfig(m) => CliError::Config(m),
            SearchError::Model(g) => g.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "synthsearch", version = synthsearch::TOOL_VERSION, about = "Retrosynthesis search and single-step model benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of processors.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Overrides the seed of commands that use one.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single-step top-k accuracy, MRR and optional round-trip metrics.
    EvalSingle(Common),
    /// Multi-step search over a target list.
    Search(Common),
    /// Clean and split a reaction dataset.
    Prep(Common),
    /// Generate a synthetic reaction universe with known answers.
    GenUniverse(Common),
    /// Grid search over algorithm parameters.
    Sweep(Common),
    /// Percentile tables and solved-fraction series from search summaries.
    Report(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::EvalSingle(c) => commands::eval_single(c),
        Command::Search(c) => commands::search(c),
        Command::Prep(c) => commands::prep(c),
        Command::GenUniverse(c) => commands::gen_universe(c),
        Command::Sweep(c) => commands::sweep(c),
        Command::Report(c) => commands::report(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("synthsearch: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
