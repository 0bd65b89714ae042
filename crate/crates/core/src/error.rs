use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular operator {name}: pivot {pivot:e} below tolerance {tol:e}")]
    Singular { name: String, pivot: f64, tol: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("non-affine operation: {0}")]
    NonAffineOperation(String),

    #[error("graph contains a shift node where a linear graph is required")]
    ShiftInLinearGraph,

    #[error("values from different traces were mixed")]
    ForeignTracerValue,

    #[error("inverse prior unavailable: {0}")]
    InversePriorUnavailable(String),

    #[error("fixed-point check failed: residual {residual:e} exceeds {tol:e}")]
    FixedPointViolated { residual: f64, tol: f64 },

    #[error("rank deficient system: pivot {pivot:e} below tolerance {tol:e}")]
    RankDeficient { pivot: f64, tol: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(
    context: &'static str,
    expected: impl ToString,
    found: impl ToString,
) -> Error {
    Error::DimensionMismatch {
        context,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
