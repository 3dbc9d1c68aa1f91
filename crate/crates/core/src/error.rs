use thiserror::Error;

use crate::checkpoint::Checkpoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, dimensions or hyperparameters that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    /// Input outside the domain of a metric (empty sets and the like).
    #[error("domain error: {0}")]
    Domain(String),

    /// Non-finite loss or gradient during training. Carries the last good
    /// parameters when one exists.
    #[error("numerical abort at epoch {epoch}: {reason}")]
    NumericalAbort {
        epoch: usize,
        reason: String,
        checkpoint: Option<Box<Checkpoint>>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported file version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("generation error: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
