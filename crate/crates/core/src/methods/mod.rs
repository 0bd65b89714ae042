//! Affine iterative methods written against the tracer: Jacobi,
//! Gauss–Seidel, two-grid and V-cycle multigrid, grid transfers, and a
//! hand-derived probabilistic two-grid cycle used as an oracle.

mod grid;
mod hand;
mod multigrid;
mod smoothers;
mod transfer;

pub use grid::{Grid, Grid1D, Grid2D};
pub use hand::{prob_two_grid_hand, HandTwoGrid};
pub use multigrid::{two_grid_cycle, v_cycle, CycleConfig, GridHierarchy, Level, Transfer};
pub use smoothers::{gauss_seidel_step, jacobi_step, Rhs, Smoother, SmootherKind};
pub use transfer::{
    build_interpolator, build_restrictor, interpolator_1d, interpolator_matrix, kron,
    restrictor_1d, restrictor_matrix,
};

#[cfg(test)]
mod tests;
