use thiserror::Error;

/// Errors raised by operator construction, penalty evaluation, design and solving.
#[derive(Debug, Error)]
pub enum LigmeError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("L must have full row rank (rank {rank} < {rows})")]
    RankDeficient { rank: usize, rows: usize },

    #[error("matrix is singular or numerically singular ({0})")]
    Singular(String),

    #[error("Schur complement has eigenvalue {0:e}, which is too negative to clamp")]
    IndefiniteSchur(f64),

    #[error("dense size {size} exceeds cap {cap}; use the matrix-free probe instead")]
    SizeCap { size: usize, cap: usize },

    #[error("step sizes violate the convergence condition: {0}")]
    StepSize(String),

    #[error("metric operator is not positive definite")]
    MetricNotPositive,

    #[error("non-finite value in solver state at iteration {iter}")]
    NonFinite { iter: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LigmeError>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(LigmeError::Dimension {
            context,
            expected,
            got,
        })
    } else {
        Ok(())
    }
}
