use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function or distribution.
    #[error("domain error: {0}")]
    Domain(String),

    /// The fitter could not make progress on the supplied data.
    #[error("fit error: {0}")]
    Fit(String),

    /// Input data is malformed (non-finite values, bounds violations, zero norms).
    #[error("invalid input: {0}")]
    Input(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    /// A requested simulation exceeds the configured sample cap.
    #[error("size error: {0}")]
    Size(String),

    #[error("assignment error: {0}")]
    Assignment(String),

    /// A file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
