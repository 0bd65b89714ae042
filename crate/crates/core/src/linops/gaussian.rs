use std::sync::Arc;

use crate::covgraph;
use crate::error::{dim_err, Error, Result};
use crate::linops::{dense_inverse, DenseMatrix, LinearOperator, Vector};
use crate::tracer::AffineGraph;

/// Covariance representations.
#[derive(Debug, Clone)]
pub enum Covariance {
    Dense(DenseMatrix),
    /// `G Σ₀ Gᵀ` given the linear graph of `G` and the prior covariance.
    Factored {
        graph: Arc<AffineGraph>,
        prior: DenseMatrix,
    },
    /// `A⁻¹ − D` under the inverse prior.
    Downdate {
        system: LinearOperator,
        downdate: DenseMatrix,
    },
}

impl Covariance {
    pub fn dim(&self) -> usize {
        match self {
            Covariance::Dense(m) => m.rows(),
            Covariance::Factored { graph, .. } => graph.output_dim(),
            Covariance::Downdate { downdate, .. } => downdate.rows(),
        }
    }

    /// Dense form, symmetrized.
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        match self {
            Covariance::Dense(m) => Ok(m.symmetrized()),
            Covariance::Factored { graph, prior } => covgraph::posterior_cov(graph, prior),
            Covariance::Downdate { system, downdate } => {
                let inv = dense_inverse(&system.to_dense()?)?;
                Ok(inv.sub(downdate)?.symmetrized())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Gaussian {
    pub mean: Vector,
    pub cov: Covariance,
}

impl Gaussian {
    /// Dense Gaussian; rejects asymmetric or indefinite covariances.
    pub fn new(mean: Vector, cov: DenseMatrix) -> Result<Self> {
        if !cov.is_square() || cov.rows() != mean.len() {
            return Err(dim_err(
                "Gaussian",
                mean.len(),
                format!("{:?}", cov.shape()),
            ));
        }
        let scale = cov.max_abs();
        if cov.asymmetry() > 1e-10 && scale > 0.0 {
            return Err(Error::InvalidArgument("covariance is not symmetric".into()));
        }
        let cov = cov.symmetrized();
        if !cov.is_psd(1e-8) {
            return Err(Error::InvalidArgument(
                "covariance is not positive semi-definite".into(),
            ));
        }
        Ok(Self {
            mean,
            cov: Covariance::Dense(cov),
        })
    }

    pub fn standard(d: usize) -> Self {
        Self {
            mean: Vector::zeros(d),
            cov: Covariance::Dense(DenseMatrix::identity(d)),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn dense_cov(&self) -> Result<DenseMatrix> {
        self.cov.to_dense()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_covariance() {
        let asym = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(Gaussian::new(Vector::zeros(2), asym).is_err());
        let indef = DenseMatrix::diag(&[1.0, -1.0]);
        assert!(Gaussian::new(Vector::zeros(2), indef).is_err());
        let ok = DenseMatrix::diag(&[1.0, 0.0]);
        assert!(Gaussian::new(Vector::zeros(2), ok).is_ok());
        assert!(Gaussian::new(Vector::zeros(3), DenseMatrix::identity(2)).is_err());
    }

    #[test]
    fn downdate_dense_form() {
        let a = LinearOperator::dense("A", DenseMatrix::diag(&[2.0, 4.0]));
        let cov = Covariance::Downdate {
            system: a,
            downdate: DenseMatrix::diag(&[0.25, 0.0]),
        };
        let dense = cov.to_dense().unwrap();
        assert!(dense.rel_diff(&DenseMatrix::diag(&[0.25, 0.25])) < 1e-15);
    }
}
