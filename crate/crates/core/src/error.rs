use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("grid does not tile the domain: {0}")]
    NonTilingGrid(String),

    #[error(
        "covariance Gram matrix is not numerically positive definite \
         (min eigenvalue {min:e}, max {max:e}); add a nugget to the kernel"
    )]
    NotPositiveDefinite { min: f64, max: f64 },

    #[error("covariance factorization failed; add a nugget to the kernel")]
    FactorizationFailed,

    #[error("point {0:?} is not on the field grid")]
    OffGrid(Vec<f64>),

    #[error("hard core removed every grid point of the box")]
    EmptyInterior,

    #[error("iterative eigensolver did not converge after {iterations} iterations (worst residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("spectrum only covers energies up to {covered}, window needs {needed}")]
    Coverage { covered: f64, needed: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{failed} of {total} samples failed (limit 1%); first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("malformed record: {0}")]
    Record(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
