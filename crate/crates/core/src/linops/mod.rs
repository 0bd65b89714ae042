//! Vectors, dense matrices, structured linear operators and Gaussians.

mod dense;
mod gaussian;
mod matrix;
mod operator;
mod vector;

pub use dense::{
    chol_factor, chol_factor_jittered, dense_inverse, dense_solve, LuFactors, PIVOT_TOL,
};
pub use gaussian::{Covariance, Gaussian};
pub use matrix::DenseMatrix;
pub use operator::{CostClass, LinearOperator, OpKind};
pub use vector::Vector;
