//! Error type shared across the crate.
//!
//! Every failure carries one of four categories so the CLI can map it to a
//! stable exit code: config/usage (2), data (3), numerical (4).

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error for '{path}': {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed or degenerate input data (bad CSV cells, missing columns,
    /// datasets too small for the requested split, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Invalid configuration or usage (out-of-domain hyperparameters,
    /// inconsistent flags, bad confidence levels, ...).
    #[error("config error: {0}")]
    Config(String),

    /// Numerical failure (divergent training, singular kernel matrix, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class: 2 usage/config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Data(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}
