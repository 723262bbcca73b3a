use std::io;
use std::path::PathBuf;

use hclocal::HcError;
use serde_json::json;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] HcError),

    #[error("{0}")]
    Usage(String),

    #[error("invalid config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },

    #[error("record output failed: {0}")]
    Records(#[from] csv::Error),

    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn read(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Read {
            path: path.into(),
            source,
        }
    }

    pub fn write(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Write {
            path: path.into(),
            source,
        }
    }

    /// 1 validation, 2 I/O, 3 broken invariant.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(HcError::Io(_)) => 2,
            CliError::Core(HcError::Invariant(_) | HcError::StaleMove(_)) => 3,
            CliError::Core(_) | CliError::Usage(_) | CliError::Config { .. } => 1,
            CliError::Read { .. }
            | CliError::Write { .. }
            | CliError::Records(_)
            | CliError::Json(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => match e {
                HcError::InvalidArgument(_) => "invalid_argument",
                HcError::MalformedMerges(_) => "malformed_merges",
                HcError::Syntax { .. } => "syntax",
                HcError::Labels(_) => "labels",
                HcError::SizeMismatch { .. } => "size_mismatch",
                HcError::Dataset { .. } => "dataset",
                HcError::DegenerateInput(_) => "degenerate_input",
                HcError::Format(_) => "format",
                HcError::UndefinedNormalization { .. } => "undefined_normalization",
                HcError::StaleMove(_) => "stale_move",
                HcError::Invariant(_) => "invariant",
                HcError::Io(_) => "io",
            },
            CliError::Usage(_) => "usage",
            CliError::Config { .. } => "config",
            CliError::Read { .. } | CliError::Write { .. } => "io",
            CliError::Records(_) | CliError::Json(_) => "output",
        }
    }

    pub fn to_json(&self) -> String {
        json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
        .to_string()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
