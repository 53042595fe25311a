use thiserror::Error;

/// Errors raised by the simulation engine and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An experiment configuration could not be parsed or validated.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A scheme invariant was violated at run time (diagnostic dump attached).
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// An implied volatility does not exist for the quoted price.
    #[error("unattainable: {0}")]
    Unattainable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
