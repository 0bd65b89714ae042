//! Process exit codes per error class.

use affine_pim::Error;

pub const OK: i32 = 0;
pub const GENERIC: i32 = 1;
pub const NON_AFFINE: i32 = 2;
pub const FIXED_POINT: i32 = 3;
pub const EQUALITY: i32 = 4;
pub const INVERSE_PRIOR: i32 = 5;
pub const NUMERIC: i32 = 6;

/// Two computations that must agree did not.
#[derive(Debug)]
pub struct EqualityFailure(pub String);

impl std::fmt::Display for EqualityFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "equality check failed: {}", self.0)
    }
}

impl std::error::Error for EqualityFailure {}

pub fn code_for(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<EqualityFailure>().is_some() {
        return EQUALITY;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::NonAffineOperation(_)) => NON_AFFINE,
        Some(Error::FixedPointViolated { .. }) => FIXED_POINT,
        Some(Error::InversePriorUnavailable(_)) => INVERSE_PRIOR,
        Some(
            Error::NonFinite(_)
            | Error::Singular { .. }
            | Error::NotPositiveDefinite
            | Error::RankDeficient { .. },
        ) => NUMERIC,
        _ => GENERIC,
    }
}
