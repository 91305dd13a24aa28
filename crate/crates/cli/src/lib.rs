//! Command implementations behind the `specrisk` binary.
//!
//! Each command takes a [`config::RunConfig`] and returns an [`Outcome`]: a
//! JSON report plus named CSV tables. Writing them out is left to the caller.

pub mod commands;
pub mod config;
pub mod river;

use specrisk::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl From<specrisk::payout::ParseError> for CliError {
    fn from(e: specrisk::payout::ParseError) -> Self {
        CliError::Core(Error::from(e))
    }
}

impl CliError {
    /// 1 usage or config, 2 hypothesis or incompatibility, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) | CliError::Csv(_) => 1,
            CliError::Core(e) => match e {
                Error::Incompatible { .. } | Error::HypothesisViolation { .. } => 2,
                Error::InvalidParameter(_)
                | Error::Parse(_)
                | Error::Io(_)
                | Error::OutOfDomain { .. }
                | Error::SizeGuard { .. } => 1,
                _ => 3,
            },
        }
    }
}

/// A finished command.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: serde_json::Value,
    /// `(file name, contents)` of CSV tables.
    pub tables: Vec<(String, String)>,
    pub exit_code: i32,
}

impl Outcome {
    pub fn ok(report: serde_json::Value) -> Self {
        Self {
            report,
            tables: Vec::new(),
            exit_code: 0,
        }
    }
}
