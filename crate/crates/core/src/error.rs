use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A precondition documented on the operation was not met.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative method failed to reach its target accuracy.
    #[error("did not converge: {0}")]
    Unconverged(String),

    /// A series needed more tabulated Bessel zeros than were supplied.
    #[error("zero table too short: need {needed}, have {have}")]
    InsufficientZeros { needed: usize, have: usize },

    /// Cache file malformed or failed validation.
    #[error("cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn unconverged(msg: impl Into<String>) -> Self {
        Error::Unconverged(msg.into())
    }
}
