use thiserror::Error;

/// Errors raised by the library.
///
/// [`Error::is_numeric`] separates failures of the numerical preconditions
/// (indefinite covariances, non-convergence, internal consistency) from
/// malformed input (shapes, ranges, parse errors).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("singular value decomposition did not converge")]
    NoConvergence,

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of numerical preconditions rather than input validation.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NotSymmetric(_) | Error::NotPsd(_) | Error::NoConvergence | Error::Consistency(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
