use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(clap::Error),
    #[error("invalid `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error(transparent)]
    Core(#[from] wicknlw::Error),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("statistical check failed: {0}")]
    Statistical(String),
}

/// What `main` prints to stderr as JSON when a run fails.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn config(key: &str, reason: impl Into<String>) -> Self {
        CliError::Config {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use wicknlw::Error as E;
        match self {
            CliError::Usage(e) if !e.use_stderr() => 0,
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Core(E::InvalidParameter { .. } | E::Aliasing { .. } | E::CutoffMismatch { .. } | E::Parse(_)) => 2,
            CliError::Core(E::Io(_)) | CliError::Io { .. } => 1,
            CliError::Core(_) | CliError::Numerical(_) => 3,
            CliError::Statistical(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config { .. } => "config",
            CliError::Core(wicknlw::Error::NonFinite { .. }) | CliError::Numerical(_) => "numerical",
            CliError::Core(_) => "core",
            CliError::Io { .. } => "io",
            CliError::Statistical(_) => "statistical",
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            kind: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }
}
