use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DlrError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("random variable belongs to a different discrete measure")]
    MeasureMismatch,

    #[error("tensor grid with {per_dim}^{dim} points exceeds the cap of {cap}")]
    TensorGridTooLarge { per_dim: usize, dim: usize, cap: usize },

    #[error("stochastic basis is not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("eigensolver failed: {0}")]
    Eigensolver(&'static str),

    #[error("linear system is inconsistent (relative kernel residual {0:e})")]
    InconsistentSystem(f64),

    #[error("fixed-point iteration did not converge after {} iterations (last update {:e})", .history.len(), .history.last().copied().unwrap_or(f64::NAN))]
    FixedPointNotConverged { history: Vec<f64> },

    #[error("non-finite values encountered in {0}")]
    NonFinite(&'static str),

    #[error("sample index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
}

pub type Result<T> = std::result::Result<T, DlrError>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(DlrError::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
