use std::fmt;
use std::process::ExitCode;

use entroprod::Error;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, unreadable or invalid input files.
    Usage(String),
    Unstable(String),
    NotConverged(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Unstable(_) => 3,
            CliError::NotConverged(_) => 4,
            CliError::Other(_) => 1,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Unstable(m) => write!(f, "unstable system: {m}"),
            CliError::NotConverged(m) => write!(f, "fit did not converge: {m}"),
            CliError::Other(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::UnstableSystem { .. } => CliError::Unstable(m),
            Error::Config { .. }
            | Error::Validation { .. }
            | Error::InvalidParams { .. }
            | Error::Parse { .. }
            | Error::WrongSetup { .. }
            | Error::WindowOutOfRange { .. } => CliError::Usage(m),
            _ => CliError::Other(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
