use thiserror::Error;

/// Errors raised by the numerical kernels and model constructors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected} samples, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in field at node (z index {i}, t index {j})")]
    NonFiniteField { i: usize, j: usize },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("metric undefined: exact profile vanishes at every node")]
    EmptySupport,

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("degenerate denominator: traces coincide while coefficients differ by {0:e}")]
    DegenerateDenominator(f64),

    #[error("malformed data: {0}")]
    Data(String),

    #[error(transparent)]
    Expr(#[from] crate::expr::ExprError),
}

pub type Result<T> = std::result::Result<T, Error>;
