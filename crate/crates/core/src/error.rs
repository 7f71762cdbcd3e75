use thiserror::Error;

/// Failure modes of the numerical pipeline.
///
/// The variants map onto the CLI exit codes: domain, data and precondition
/// problems are the caller's fault (status 1), the rest are numerical
/// failures (status 2).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Malformed or non-finite input data.
    #[error("data error: {0}")]
    Data(String),
    /// A structural precondition of a formula does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// A requested quantity does not exist for these inputs.
    #[error("unavailable: {0}")]
    Unavailable(String),
    /// Iterative routine failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// A self-consistency gate (step halving, refinement) failed.
    #[error("accuracy error: {0}")]
    Accuracy(String),
    /// Discrete operator failed its structural consistency check.
    #[error("assembly error: {0}")]
    Assembly(String),
    /// Numerical kernel has the wrong dimension for the requested solve.
    #[error("rank error: {0}")]
    Rank(String),
    /// Derivative with respect to the speed is undefined (dc/dk vanishes).
    #[error("singular parametrization: {0}")]
    SingularParametrization(String),
}

impl Error {
    /// True for errors caused by invalid input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Data(_) | Error::Precondition(_) | Error::Unavailable(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
