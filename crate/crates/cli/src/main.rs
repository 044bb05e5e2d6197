//! `flowcast` command-line tool.
//!
//! Exit status: 0 on success, 2 for bad flags or configuration, 3 for data
//! errors, 4 when training diverges. Failures print one JSON object on stderr.

mod commands;
mod config;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Divergence,
}

impl ErrorKind {
    fn code(self) -> u8 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::Data => 3,
            ErrorKind::Divergence => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
            ErrorKind::Divergence => "divergence",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<flowcast::Error> for CliError {
    fn from(err: flowcast::Error) -> Self {
        use flowcast::Error as E;
        let kind = match err {
            E::InvalidArgument(_) | E::UnknownMethod(_) => ErrorKind::Usage,
            E::Divergence { .. } => ErrorKind::Divergence,
            _ => ErrorKind::Data,
        };
        CliError {
            kind,
            message: err.to_string(),
        }
    }
}

fn fail(err: &CliError) -> ExitCode {
    eprintln!(
        "{}",
        json!({ "error": err.kind.name(), "code": err.kind.code(), "message": err.message })
    );
    ExitCode::from(err.kind.code())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("FLOWCAST_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("FLOWCAST_THREADS must be a number, got {raw:?}")))?;
    // 0 leaves the choice to rayon
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot configure thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match commands::Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if !err.use_stderr() => {
            // --help and --version
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let message = err.render().to_string();
            let first = message.lines().next().unwrap_or("invalid arguments");
            return fail(&CliError::usage(first.trim_start_matches("error: ")));
        }
    };
    if let Err(err) = configure_threads() {
        return fail(&err);
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => fail(&err),
    }
}
