//! Probabilistic iterative methods: traced affine solvers pushed forward
//! over Gaussian beliefs, downdates under the inverse prior, conditioning
//! on search directions, and a Monte-Carlo calibration harness.

mod bayes;
mod calibration;
mod downdate;
mod lift;

pub use bayes::{bayes_pls_posterior, projection_pim, ProjectionPim, GRAM_RANK_TOL};
pub use calibration::{calibration_test, range_and_kernel, CalibrationOptions, CalibrationReport};
pub use downdate::{
    downdate_nonstationary, downdate_stationary, thm3_decompose, Decomposition, PimState,
};
pub use lift::{Pim, PimSteps};
