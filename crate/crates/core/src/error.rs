use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The operation is undefined for these inputs (e.g. log of an antipodal point).
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    /// A certificate whose theorem hypotheses the run does not satisfy.
    #[error("not applicable: {0}")]
    NotApplicable(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure(msg.into())
    }

    pub(crate) fn not_applicable(msg: impl Into<String>) -> Self {
        Error::NotApplicable(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
