use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] skipfree::Error),

    #[error("report encoding failed: {0}")]
    Encode(String),
}

impl CliError {
    pub(crate) fn config(e: skipfree::Error) -> Self {
        Self::Config(e.to_string())
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Model(skipfree::Error::NetProfitViolation { .. }) => 3,
            Self::Model(skipfree::Error::BudgetExceeded { .. }) => 4,
            _ => 2,
        }
    }
}
