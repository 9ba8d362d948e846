//! Command-line driver: configuration handling, the subcommands, and
//! metadata-stamped CSV output.
//!
//! Exit codes are a stable contract: 0 success, 1 constraint or validation
//! failure, 2 usage or configuration error.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Parser, Subcommand};
use config::{ConfigError, ConfigFile};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "isbft", version, about = "Byzantine-tolerant clock synchronization simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Flat TOML configuration file; flags override its keys.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub keys: ConfigFile,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the derived constants and check every constraint row.
    Derive(Common),
    /// Check every constraint row only.
    Validate(Common),
    /// Run the full engine once per seed and write per-run metrics.
    Simulate(Common),
    /// Sample the reduced stabilization model.
    Reduced(Common),
    /// Run the engine over every listed case, adversary and seed.
    Sweep(Common),
}

fn resolve(c: &Common) -> Result<config::RunConfig, ConfigError> {
    let file = match &c.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    file.overlay(&c.keys).resolve()
}

type Handler = fn(&config::RunConfig) -> Result<i32, ConfigError>;

/// Runs a parsed command line and returns the exit code.
pub fn execute(cli: &Cli) -> i32 {
    let (common, f): (&Common, Handler) = match &cli.command {
        Command::Derive(c) => (c, commands::derive),
        Command::Validate(c) => (c, commands::check),
        Command::Simulate(c) => (c, commands::simulate),
        Command::Reduced(c) => (c, commands::reduced),
        Command::Sweep(c) => (c, commands::sweep),
    };
    match resolve(common).and_then(|cfg| f(&cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            commands::EXIT_CONFIG
        }
    }
}
