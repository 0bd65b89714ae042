//! Probabilistic iterative methods obtained by tracing affine solvers.
//!
//! A solver step is written against [`tracer::Tracer`], recorded as an
//! [`tracer::AffineGraph`], and pushed through [`covgraph`] to obtain
//! Gaussian posteriors. Under the inverse prior, [`simplify`] removes the
//! symbolic `A⁻¹` with equality saturation, which is what [`cagp`] needs.

// `!(x > 0.0)` style guards are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cagp;
pub mod covgraph;
pub mod error;
pub mod linops;
pub mod methods;
pub mod pim;
pub mod simplify;
pub mod tracer;

pub use error::{Error, Result};
