use std::sync::Arc;

use crate::covgraph::{posterior_cov, project_cov};
use crate::error::{dim_err, Error, Result};
use crate::linops::{Covariance, DenseMatrix, Gaussian, Vector};
use crate::tracer::{eval_affine, AffineGraph, Program};

#[derive(Debug, Clone)]
pub enum PimSteps {
    /// One step applied at every iteration.
    Stationary(Arc<AffineGraph>),
    /// `P₁, P₂, …` applied in order.
    Sequence(Vec<Arc<AffineGraph>>),
}

/// An affine iterative method lifted to act on Gaussian beliefs.
#[derive(Debug, Clone)]
pub struct Pim {
    steps: PimSteps,
    prior: Gaussian,
}

impl Pim {
    pub fn stationary(step: AffineGraph, prior: Gaussian) -> Result<Self> {
        Self::new(PimSteps::Stationary(Arc::new(step)), prior)
    }

    pub fn nonstationary(steps: Vec<AffineGraph>, prior: Gaussian) -> Result<Self> {
        Self::new(
            PimSteps::Sequence(steps.into_iter().map(Arc::new).collect()),
            prior,
        )
    }

    pub fn from_program(program: &Program, prior: Gaussian) -> Result<Self> {
        Self::stationary(program.trace()?, prior)
    }

    pub fn new(steps: PimSteps, prior: Gaussian) -> Result<Self> {
        let d = prior.dim();
        let graphs: Vec<&AffineGraph> = match &steps {
            PimSteps::Stationary(g) => vec![g],
            PimSteps::Sequence(gs) => gs.iter().map(|g| g.as_ref()).collect(),
        };
        for g in graphs {
            if g.input_dim() != d || g.output_dim() != d {
                return Err(dim_err(
                    "Pim step",
                    d,
                    format!("{}→{}", g.input_dim(), g.output_dim()),
                ));
            }
        }
        Ok(Self { steps, prior })
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn prior(&self) -> &Gaussian {
        &self.prior
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self.steps, PimSteps::Stationary(_))
    }

    /// The `k`-th step, counting from 1.
    pub fn step(&self, k: usize) -> Result<&AffineGraph> {
        match &self.steps {
            PimSteps::Stationary(g) if k >= 1 => Ok(g),
            PimSteps::Sequence(gs) if k >= 1 && k <= gs.len() => Ok(&gs[k - 1]),
            _ => Err(Error::InvalidArgument(format!(
                "no step {k} in this method"
            ))),
        }
    }

    /// `Pᵢ ∘ ⋯ ∘ P₁`.
    pub fn composed(&self, i: usize) -> Result<AffineGraph> {
        if let PimSteps::Stationary(g) = &self.steps {
            return g.power(i);
        }
        let mut acc = AffineGraph::identity(self.dim());
        for k in 1..=i {
            acc = AffineGraph::compose(self.step(k)?, &acc)?;
        }
        Ok(acc)
    }

    /// `xᵢ` by `i` forward evaluations from the prior mean.
    pub fn mean(&self, i: usize) -> Result<Vector> {
        let mut x = self.prior.mean.clone();
        for k in 1..=i {
            x = eval_affine(self.step(k)?, &x)?;
        }
        Ok(x)
    }

    /// `N(xᵢ, Ḡ Σ₀ Ḡᵀ)` with `Ḡ` the linear part of `Pᵢ ∘ ⋯ ∘ P₁`.
    pub fn iterate(&self, i: usize) -> Result<Gaussian> {
        let mean = self.mean(i)?;
        let sigma0 = self.prior.dense_cov()?;
        if i == 0 {
            return Ok(Gaussian {
                mean,
                cov: Covariance::Dense(sigma0),
            });
        }
        let linear = self.composed(i)?.strip_shifts();
        Ok(Gaussian {
            mean,
            cov: Covariance::Dense(posterior_cov(&linear, &sigma0)?),
        })
    }

    /// `(V xᵢ, V Σᵢ Vᵀ)` without forming `Σᵢ`.
    pub fn iterate_projected(&self, i: usize, v: &DenseMatrix) -> Result<(Vector, DenseMatrix)> {
        if v.cols() != self.dim() {
            return Err(dim_err("iterate_projected", self.dim(), v.cols()));
        }
        let mean = self.mean(i)?;
        let sigma0 = self.prior.dense_cov()?;
        let linear = self.composed(i)?.strip_shifts();
        Ok((v.matvec(&mean)?, project_cov(&linear, &sigma0, v)?))
    }
}
