//! `railcomfort` command-line front end.
//!
//! Exit codes: 0 success, 2 I/O, 3 parse or format error, 4 degenerate
//! data, 5 invalid invocation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use railcomfort::Error;
use thiserror::Error as ThisError;

use crate::commands::Command;
use crate::config::{GlobalArgs, RunConfig, OUT_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "railcomfort", version, about = "Standing-passenger discomfort models for rail lines")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: Error },
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
}

pub const EXIT_IO: u8 = 2;
pub const EXIT_PARSE: u8 = 3;
pub const EXIT_DEGENERATE: u8 = 4;
pub const EXIT_USAGE: u8 = 5;

fn library_code(e: &Error) -> u8 {
    match e {
        Error::FormatError { .. }
        | Error::ParseError { .. }
        | Error::InvalidSample(_)
        | Error::NonMonotonicTime { .. } => EXIT_PARSE,
        Error::DegenerateLabels
        | Error::SeparationDetected { .. }
        | Error::InsufficientData { .. }
        | Error::EventOutOfRange(_)
        | Error::EmptySignal
        | Error::SignalTooShort { .. }
        | Error::NumericalFailure(_) => EXIT_DEGENERATE,
        Error::InvalidNormalization(..)
        | Error::InvalidWindow(_)
        | Error::UnitMismatch { .. }
        | Error::LengthMismatch { .. }
        | Error::EmptyProfile
        | Error::EmptyReport
        | Error::DuplicateLine(_)
        | Error::InvalidConfig(_)
        | Error::UnknownLine(_) => EXIT_USAGE,
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => EXIT_IO,
            CliError::Parse { .. } => EXIT_PARSE,
            CliError::Input { source, .. } | CliError::Core(source) => library_code(source),
            CliError::Usage(_) => EXIT_USAGE,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let env_out_dir = std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    let result = RunConfig::resolve(&cli.global, env_out_dir).and_then(|cfg| commands::run(cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
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
    fn exit_code_classes() {
        assert_eq!(CliError::Core(Error::DegenerateLabels).exit_code(), 4);
        assert_eq!(CliError::Core(Error::DuplicateLine("a".into())).exit_code(), 5);
        assert_eq!(
            CliError::Input {
                path: "x".into(),
                source: Error::FormatError { line: 3, message: "bad".into() }
            }
            .exit_code(),
            3
        );
        let io = CliError::Io {
            path: "missing.csv".into(),
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        };
        assert_eq!(io.exit_code(), 2);
        assert!(io.to_string().contains("missing.csv"));
    }
}
