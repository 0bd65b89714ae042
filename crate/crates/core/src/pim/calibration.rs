use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::lift::{Pim, PimSteps};
use crate::error::{dim_err, Result};
use crate::linops::{chol_factor, DenseMatrix, Gaussian, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationOptions {
    pub n_samples: usize,
    /// Eigenvalues at or below `rank_tol·λ_max` count as zero.
    pub rank_tol: f64,
    pub seed: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            rank_tol: 1e-10,
            seed: 0,
        }
    }
}

/// Monte-Carlo evidence for or against strong calibration at one
/// iteration count.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub n_samples: usize,
    pub iterations: usize,
    pub dim: usize,
    pub rank: usize,
    /// Mean of `‖wₛ‖²` over samples; `r` under calibration.
    pub mean_sq_whitened_norm: f64,
    /// Four Monte-Carlo standard errors, `4√(2r/n)`.
    pub chi_square_tol: f64,
    /// Kolmogorov–Smirnov distance to `N(0, 1)` per whitened coordinate.
    pub ks_statistics: Vec<f64>,
    /// `max |Nᵀ(xᵢ − x*)| / ‖x*‖` over samples.
    pub null_residual_max: f64,
    /// Whitened residuals, one row per sample.
    #[serde(skip)]
    pub whitened: DenseMatrix,
}

impl CalibrationReport {
    pub fn chi_square_ok(&self) -> bool {
        (self.mean_sq_whitened_norm - self.rank as f64).abs() <= self.chi_square_tol
    }

    pub fn null_space_ok(&self, tol: f64) -> bool {
        self.null_residual_max <= tol
    }

    pub fn passes(&self) -> bool {
        self.chi_square_ok() && self.null_space_ok(1e-6)
    }
}

/// Orthonormal bases of the range and kernel of a symmetric PSD matrix.
pub fn range_and_kernel(
    sigma: &DenseMatrix,
    rank_tol: f64,
) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
    let (vals, vecs) = sigma.symmetrized().sym_eigen();
    let top = vals.iter().copied().fold(0.0f64, f64::max);
    let keep: Vec<usize> = (0..vals.len())
        .filter(|&j| top > 0.0 && vals[j] > rank_tol * top)
        .collect();
    let drop: Vec<usize> = (0..vals.len()).filter(|j| !keep.contains(j)).collect();
    let n = sigma.rows();
    let pick = |cols: &[usize]| DenseMatrix::from_fn(n, cols.len(), |i, k| vecs.get(i, cols[k]));
    (
        pick(&keep),
        keep.iter().map(|&j| vals[j]).collect(),
        pick(&drop),
    )
}

fn ks_statistic(mut xs: Vec<f64>, normal: &Normal) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, &x)| {
            let c = normal.cdf(x);
            ((k + 1) as f64 / n - c).max(c - k as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Draws `x* ~ μ₀`, solves with `b = A x*` using the method returned by
/// `build(b)`, and tests whether `x*` is distributed as the belief after
/// `i` iterations predicts. The linear part of the method must not depend
/// on `b`; the covariance is computed once.
pub fn calibration_test<F>(
    prior: &Gaussian,
    a: &DenseMatrix,
    build: F,
    i: usize,
    opts: &CalibrationOptions,
) -> Result<CalibrationReport>
where
    F: Fn(&Vector) -> Result<PimSteps>,
{
    let d = prior.dim();
    if a.shape() != (d, d) {
        return Err(dim_err("calibration_test", d, format!("{:?}", a.shape())));
    }
    let sigma0 = prior.dense_cov()?;
    let upper = chol_factor(&sigma0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = opts.n_samples;

    let mut sigma_i: Option<(DenseMatrix, DenseMatrix, DenseMatrix)> = None;
    let mut whitened_rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut null_max: f64 = 0.0;
    let mut sq_sum = 0.0;
    for _ in 0..n {
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut xs = upper
            .tr_matmul(&DenseMatrix::column(&Vector::from(z)))?
            .into_data();
        for (v, m) in xs.iter_mut().zip(prior.mean.iter()) {
            *v += m;
        }
        let xs = Vector::from(xs);
        let b = a.matvec(&xs)?;
        let pim = Pim::new(build(&b)?, prior.clone())?;
        if sigma_i.is_none() {
            let cov = pim.iterate(i)?.dense_cov()?;
            let (range, _, kernel) = range_and_kernel(&cov, opts.rank_tol);
            let block = range.tr_matmul(&cov)?.matmul(&range)?;
            let (bvals, bvecs) = block.symmetrized().sym_eigen();
            let btop = bvals.iter().copied().fold(0.0f64, f64::max);
            let r = bvals.len();
            let inv_sqrt = DenseMatrix::from_fn(r, r, |p, q| {
                (0..r)
                    .filter(|&k| bvals[k] > opts.rank_tol * btop)
                    .map(|k| bvecs.get(p, k) * bvecs.get(q, k) / bvals[k].sqrt())
                    .sum()
            });
            sigma_i = Some((inv_sqrt.matmul_tr(&range)?, kernel, cov));
        }
        let (whiten, kernel, _) = sigma_i.as_ref().expect("covariance computed");
        let err = pim.mean(i)?.sub(&xs)?;
        let w = whiten.matvec(&err)?;
        sq_sum += w.dot(&w);
        whitened_rows.push(w.into_vec());
        let nres = kernel.tr_matmul(&DenseMatrix::column(&err))?.max_abs();
        null_max = null_max.max(nres / xs.norm().max(f64::MIN_POSITIVE));
    }
    let rank = sigma_i.as_ref().map_or(0, |(w, _, _)| w.rows());
    let whitened = DenseMatrix::from_fn(n, rank, |s, k| whitened_rows[s][k]);
    let normal = Normal::standard();
    let ks_statistics = (0..rank)
        .map(|k| ks_statistic((0..n).map(|s| whitened.get(s, k)).collect(), &normal))
        .collect();
    Ok(CalibrationReport {
        n_samples: n,
        iterations: i,
        dim: d,
        rank,
        mean_sq_whitened_norm: sq_sum / n as f64,
        chi_square_tol: 4.0 * (2.0 * rank as f64 / n as f64).sqrt(),
        ks_statistics,
        null_residual_max: null_max,
        whitened,
    })
}
