//! Computation-aware Gaussian process regression. The solver's remaining
//! uncertainty about `A⁻¹` widens the posterior covariance; the widening is
//! computed from the downdate of a traced stationary step.

mod data;
mod kernel;
mod posterior;

pub use data::{sample_prior, synth_dataset, Dataset, GRAM_JITTER};
pub use kernel::{matern32, Kernel};
pub use posterior::{
    cagp_at, cagp_multigrid, cg_means, cg_solve, exact_gp, gaussian_nll, metrics, rmse,
    system_operator, CagpPosterior, CgRun, Metrics, VARIANCE_FLOOR,
};
