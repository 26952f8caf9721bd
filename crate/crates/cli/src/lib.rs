//! Command-line driver: fetch, stats, train, gradcheck and pool-export.
//!
//! Exit status is 0 on success, 1 on runtime failures (including a failed
//! gradient check) and 2 on usage or configuration errors.

pub mod commands;
pub mod config;
pub mod export;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{default_cache_dir, RunConfig};
use export::ExportFormat;
use hgp_core::data::DEFAULT_BASE_URL;
use hgp_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(Error::Config(_) | Error::UnknownDataset(_)) => 2,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hgpsl",
    version,
    about = "Hierarchical graph pooling with structure learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ConfigArgs {
    /// Run configuration (key = value lines).
    config: PathBuf,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Download a TU benchmark into the cache (no-op when cached).
    Fetch {
        name: String,
        #[arg(long, default_value = DEFAULT_BASE_URL)]
        base_url: String,
        /// Defaults to $HGPSL_CACHE, then ./data.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Print dataset statistics for a TU dataset name or directory.
    Stats {
        dataset: String,
        #[arg(long, default_value = DEFAULT_BASE_URL)]
        base_url: String,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Run the repeated random-split experiment described by a config.
    Train(ConfigArgs),
    /// Finite-difference check of the full model gradient.
    Gradcheck(ConfigArgs),
    /// Export each level's pooled nodes and learned structure.
    PoolExport {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        graph: usize,
        #[arg(long, default_value = "dot")]
        format: ExportFormat,
        /// Output directory; defaults to <output_dir>/export_graph<N>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(args: &ConfigArgs) -> Result<RunConfig, CliError> {
    Ok(RunConfig::load(&args.config, &args.overrides)?)
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Fetch {
            name,
            base_url,
            cache_dir,
        } => commands::fetch(
            &name,
            &base_url,
            &cache_dir.unwrap_or_else(default_cache_dir),
        )
        .map(|_| 0),
        Command::Stats {
            dataset,
            base_url,
            cache_dir,
        } => commands::stats(
            &dataset,
            &base_url,
            &cache_dir.unwrap_or_else(default_cache_dir),
        )
        .map(|_| 0),
        Command::Train(args) => commands::train(&load(&args)?).map(|_| 0),
        Command::Gradcheck(args) => {
            commands::gradcheck(&load(&args)?).map(|ok| if ok { 0 } else { 1 })
        }
        Command::PoolExport {
            config,
            checkpoint,
            graph,
            format,
            out,
        } => commands::pool_export(&load(&config)?, &checkpoint, graph, format, out).map(|_| 0),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
