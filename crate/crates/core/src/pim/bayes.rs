use crate::error::{dim_err, Error, Result};
use crate::linops::{Covariance, DenseMatrix, Gaussian, LinearOperator, Vector};
use crate::tracer::{AffineGraph, Tracer};

/// Relative eigenvalue floor below which the projected Gram is rank deficient.
pub const GRAM_RANK_TOL: f64 = 1e-12;

/// `Σ₀AᵀS (SᵀAΣ₀AᵀS)⁻¹`, shared by both posterior formulas.
fn gain(sigma0: &DenseMatrix, a: &DenseMatrix, s: &DenseMatrix) -> Result<DenseMatrix> {
    let d = a.rows();
    if sigma0.shape() != (d, d) || a.cols() != d || s.rows() != d {
        return Err(dim_err("search directions", d, format!("{:?}", s.shape())));
    }
    let ats = a.tr_matmul(s)?;
    let sig_ats = sigma0.matmul(&ats)?;
    let gram = ats.tr_matmul(&sig_ats)?.symmetrized();
    let (vals, vecs) = gram.sym_eigen();
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let low = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if !(low > GRAM_RANK_TOL * top) {
        return Err(Error::RankDeficient {
            pivot: low,
            tol: GRAM_RANK_TOL * top,
        });
    }
    // Inverse through the eigendecomposition; the Gram is SPD here.
    let scaled = DenseMatrix::from_fn(vecs.rows(), vecs.cols(), |i, j| vecs.get(i, j) / vals[j]);
    let inv = scaled.matmul_tr(&vecs)?;
    sig_ats.matmul(&inv)
}

/// Gaussian conditioning of `N(x₀, Σ₀)` on `SᵀA x = Sᵀb`.
pub fn bayes_pls_posterior(
    x0: &Vector,
    sigma0: &DenseMatrix,
    a: &DenseMatrix,
    b: &Vector,
    s: &DenseMatrix,
) -> Result<Gaussian> {
    if x0.len() != a.rows() || b.len() != a.rows() {
        return Err(dim_err("bayes_pls_posterior", a.rows(), x0.len()));
    }
    if s.cols() == 0 {
        return Ok(Gaussian {
            mean: x0.clone(),
            cov: Covariance::Dense(sigma0.clone()),
        });
    }
    let k = gain(sigma0, a, s)?;
    let r = b.sub(&a.matvec(x0)?)?;
    let mut mean = x0.clone();
    mean.axpy(1.0, &k.matvec(&s.transpose().matvec(&r)?)?);
    let sas = s.tr_matmul(a)?.matmul(sigma0)?;
    let mut cov = sigma0.clone();
    cov.add_scaled(-1.0, &k.matmul(&sas)?)?;
    Ok(Gaussian {
        mean,
        cov: Covariance::Dense(cov.symmetrized()),
    })
}

/// The affine map `x ↦ Ḡx + f̄` whose pushforward of the prior is the
/// conditioned posterior.
#[derive(Debug, Clone)]
pub struct ProjectionPim {
    pub gbar: DenseMatrix,
    pub fbar: Vector,
}

pub fn projection_pim(
    sigma0: &DenseMatrix,
    a: &DenseMatrix,
    b: &Vector,
    s: &DenseMatrix,
) -> Result<ProjectionPim> {
    let d = a.rows();
    if b.len() != d {
        return Err(dim_err("projection_pim", d, b.len()));
    }
    if s.cols() == 0 {
        return Ok(ProjectionPim {
            gbar: DenseMatrix::identity(d),
            fbar: Vector::zeros(d),
        });
    }
    let ks = gain(sigma0, a, s)?.matmul_tr(s)?;
    let mut gbar = ks.matmul(a)?.scaled(-1.0);
    gbar.add_identity(1.0);
    let fbar = ks.matvec(b)?;
    Ok(ProjectionPim { gbar, fbar })
}

impl ProjectionPim {
    pub fn apply(&self, prior: &Gaussian) -> Result<Gaussian> {
        let mut mean = self.gbar.matvec(&prior.mean)?;
        mean.axpy(1.0, &self.fbar);
        let cov = self
            .gbar
            .matmul(&prior.dense_cov()?)?
            .matmul_tr(&self.gbar)?;
        Ok(Gaussian {
            mean,
            cov: Covariance::Dense(cov.symmetrized()),
        })
    }

    /// One traced step `x ↦ Ḡx + f̄`.
    pub fn to_graph(&self) -> Result<AffineGraph> {
        let op = LinearOperator::dense("Gbar", self.gbar.clone());
        let (mut t, x) = Tracer::symbolic(self.gbar.rows());
        let y = t.apply(&op, x)?;
        let y = t.shift(y, &self.fbar)?;
        t.finish(y)
    }
}
