//! `ivispar`: generate datasets, run agents, score logs, replay and serve.
//!
//! Exit codes: 0 success, 1 usage or other error, 2 infeasible generation,
//! 3 agent transport failure, 4 format or version error.

mod cmd;
mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Config;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_TRANSPORT: u8 = 3;
pub const EXIT_FORMAT: u8 = 4;

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INFEASIBLE, message: message.into() }
    }

    pub fn transport(message: impl Into<String>) -> Self {
        Failure { code: EXIT_TRANSPORT, message: message.into() }
    }

    pub fn format(message: impl Into<String>) -> Self {
        Failure { code: EXIT_FORMAT, message: message.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::usage(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Parser)]
#[command(name = "ivispar", version, about = "Sliding geom puzzle benchmark: generate, run, score, replay, serve")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Root for default dataset, log and service paths.
    #[arg(long, global = true, env = "IVISPAR_DATA_DIR", value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset of episodes over a complexity grid.
    Generate(cmd::generate::Args),
    /// Play every episode of a dataset with one agent and write one log per episode.
    Run(cmd::run::Args),
    /// Score episode logs and write the report tables.
    Score(cmd::score::Args),
    /// Re-execute logs against their dataset and report any divergence.
    Replay(cmd::replay::Args),
    /// Serve the HTTP session API.
    Serve(cmd::serve::Args),
}

/// Resolved global context shared by the subcommands.
pub struct Context {
    pub config: Config,
    pub data_dir: PathBuf,
}

impl Context {
    pub fn datasets_dir(&self) -> PathBuf {
        self.data_dir.join("datasets")
    }

    pub fn logs_dir(&self) -> PathBuf {
        self.data_dir.join("logs")
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = Config::load(cli.config.as_deref())?;
    let data_dir = cli
        .data_dir
        .clone()
        .or_else(|| config.data_dir.clone())
        .unwrap_or_else(|| PathBuf::from("ivispar-data"));
    let ctx = Context { config, data_dir };
    match cli.command {
        Command::Generate(args) => cmd::generate::run(&ctx, args),
        Command::Run(args) => cmd::run::run(&ctx, args),
        Command::Score(args) => cmd::score::run(&ctx, args),
        Command::Replay(args) => cmd::replay::run(&ctx, args),
        Command::Serve(args) => cmd::serve::run(&ctx, args),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn,ivispar_service=info".into()),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .without_time()
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn every_flag_is_documented() {
        let root = Cli::command();
        for sub in root.get_subcommands() {
            for arg in sub.get_arguments() {
                assert!(arg.get_help().is_some(), "{} --{} has no help", sub.get_name(), arg.get_id());
            }
        }
    }
}
