use std::time::Instant;

use serde::Serialize;

use super::data::Dataset;
use super::kernel::Kernel;
use crate::error::{dim_err, Error, Result};
use crate::linops::{DenseMatrix, LinearOperator, LuFactors, Vector};
use crate::methods::{v_cycle, GridHierarchy};
use crate::simplify::{derive_step_programs, StepOptions, StepPrograms};

/// Floor applied to predictive variances before taking logarithms.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Posterior over the test inputs after `m` solver iterations.
#[derive(Debug, Clone)]
pub struct CagpPosterior {
    pub m: usize,
    pub mean: Vector,
    pub cov: DenseMatrix,
    /// Seconds spent in the iteration loop up to this `m`.
    pub wall_time_s: f64,
}

impl CagpPosterior {
    pub fn variances(&self) -> Vec<f64> {
        self.cov.diagonal()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub rmse: f64,
    /// Absent for mean-only baselines.
    pub nll: Option<f64>,
}

pub fn rmse(mean: &[f64], truth: &[f64]) -> Result<f64> {
    if mean.len() != truth.len() || mean.is_empty() {
        return Err(dim_err("rmse", truth.len(), mean.len()));
    }
    let sq: f64 = mean.iter().zip(truth).map(|(m, f)| (m - f) * (m - f)).sum();
    Ok((sq / mean.len() as f64).sqrt())
}

/// Mean per-point Gaussian negative log likelihood with predictive
/// variances `var + γ`.
pub fn gaussian_nll(mean: &[f64], var: &[f64], truth: &[f64], noise: f64) -> Result<f64> {
    if mean.len() != truth.len() || var.len() != truth.len() || mean.is_empty() {
        return Err(dim_err(
            "nll",
            truth.len(),
            format!("{} / {}", mean.len(), var.len()),
        ));
    }
    let mut total = 0.0;
    let mut clamped = 0;
    for ((m, v), f) in mean.iter().zip(var).zip(truth) {
        let mut s2 = v + noise;
        if !(s2 > VARIANCE_FLOOR) {
            s2 = VARIANCE_FLOOR;
            clamped += 1;
        }
        total += 0.5 * (2.0 * std::f64::consts::PI * s2).ln() + (m - f) * (m - f) / (2.0 * s2);
    }
    if clamped > 0 {
        log::warn!("{clamped} predictive variances clamped to {VARIANCE_FLOOR:e}");
    }
    Ok(total / mean.len() as f64)
}

pub fn metrics(post: &CagpPosterior, truth: &Vector, noise: f64) -> Result<Metrics> {
    Ok(Metrics {
        rmse: rmse(&post.mean, truth)?,
        nll: Some(gaussian_nll(&post.mean, &post.variances(), truth, noise)?),
    })
}

/// Dense GP posterior on the test inputs.
pub fn exact_gp(data: &Dataset, kernel: &Kernel) -> Result<CagpPosterior> {
    let start = Instant::now();
    let mut a = kernel.gram(&data.train_x);
    a.add_identity(data.noise);
    let lu = LuFactors::new(&a, "k(X,X) + γI")?;
    let v = kernel.cross(&data.test_x, &data.train_x);
    let w = lu.solve_mat(&DenseMatrix::column(&data.y))?;
    let mean = Vector::from(v.matmul(&w)?.into_data());
    let ainv_vt = lu.solve_mat(&v.transpose())?;
    let mut cov = kernel.gram(&data.test_x);
    cov.add_scaled(-1.0, &v.matmul(&ainv_vt)?)?;
    Ok(CagpPosterior {
        m: usize::MAX,
        mean,
        cov: cov.symmetrized(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Computation-aware posterior from a stationary step on
/// `A = k(X, X) + γI`, recorded at each iteration count in `m_list`.
pub fn cagp_at(
    data: &Dataset,
    kernel: &Kernel,
    steps: &StepPrograms,
    m_list: &[usize],
) -> Result<Vec<CagpPosterior>> {
    let n = data.n_train();
    if steps.dim() != n {
        return Err(dim_err("cagp_at", n, steps.dim()));
    }
    let v = kernel.cross(&data.test_x, &data.train_x);
    let prior = kernel.gram(&data.test_x);
    let mut wanted: Vec<usize> = m_list.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    let last = wanted.last().copied().unwrap_or(0);

    let start = Instant::now();
    let mut x = Vector::zeros(n);
    let mut z = v.clone();
    let mut d = DenseMatrix::zeros(data.n_test(), data.n_test());
    let mut out = Vec::with_capacity(wanted.len());
    let mut next = wanted.iter().peekable();
    let scale = data.y.max_abs().max(1.0);
    for i in 0..=last {
        if i > 0 {
            x = steps.p(&x)?;
            d.add_scaled(1.0, &steps.s(&z)?)?;
            z = steps.g(&z)?;
            if x.max_abs() > 1e12 * scale || !x.iter().all(|v| v.is_finite()) {
                log::warn!(
                    "solver iterate diverging at iteration {i}; the step is not contractive"
                );
            }
        }
        if next.peek() == Some(&&i) {
            next.next();
            let mut cov = prior.clone();
            cov.add_scaled(-1.0, &d)?;
            out.push(CagpPosterior {
                m: i,
                mean: v.matvec(&x)?,
                cov: cov.symmetrized(),
                wall_time_s: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(out)
}

/// The system operator `k(X, X) + γI`.
pub fn system_operator(data: &Dataset, kernel: &Kernel) -> LinearOperator {
    kernel.system(&data.train_x, data.noise)
}

/// CAGP driven by a traced multigrid cycle over `hierarchy`, whose fine
/// operator must be the training system.
pub fn cagp_multigrid(
    data: &Dataset,
    kernel: &Kernel,
    hierarchy: &GridHierarchy,
    m_list: &[usize],
    opts: &StepOptions,
) -> Result<Vec<CagpPosterior>> {
    let a = hierarchy.fine();
    if a.rows() != data.n_train() {
        return Err(dim_err("cagp_multigrid", data.n_train(), a.rows()));
    }
    let graph = v_cycle(hierarchy, &data.y)?.trace()?;
    let steps = derive_step_programs(&graph, a, &data.y, opts)?;
    cagp_at(data, kernel, &steps, m_list)
}

/// Conjugate-gradient iterate and residual history.
#[derive(Debug, Clone)]
pub struct CgRun {
    pub x: Vector,
    /// `‖b − A xᵢ‖₂` for `i = 0 … iterations`.
    pub residual_norms: Vec<f64>,
    /// Iterations actually taken; fewer than requested on breakdown.
    pub iterations: usize,
}

/// `m` conjugate-gradient iterations on `A x = b` from zero.
pub fn cg_solve(a: &LinearOperator, b: &Vector, m: usize) -> Result<CgRun> {
    let n = a.rows();
    if !a.is_square() || b.len() != n {
        return Err(dim_err("cg_solve", n, b.len()));
    }
    let mut x = Vector::zeros(n);
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let mut history = vec![rr.sqrt()];
    let mut taken = 0;
    for _ in 0..m {
        if rr == 0.0 {
            break;
        }
        let ap = a.apply(&p)?;
        let pap = p.dot(&ap);
        if !(pap.abs() > 0.0) {
            log::warn!("CG breakdown after {taken} iterations");
            break;
        }
        if !pap.is_finite() {
            return Err(Error::NonFinite("CG curvature"));
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rr_new = r.dot(&r);
        let beta = rr_new / rr;
        p = r.scaled(1.0).add(&p.scaled(beta))?;
        rr = rr_new;
        history.push(rr.sqrt());
        taken += 1;
    }
    Ok(CgRun {
        x,
        residual_norms: history,
        iterations: taken,
    })
}

/// Mean-only CG baseline: `k(X′, X) x_m` for each `m`.
pub fn cg_means(
    data: &Dataset,
    kernel: &Kernel,
    m_list: &[usize],
) -> Result<Vec<(usize, Vector, f64)>> {
    let a = system_operator(data, kernel);
    let v = kernel.cross(&data.test_x, &data.train_x);
    let mut out = Vec::new();
    for &m in m_list {
        let start = Instant::now();
        let run = cg_solve(&a, &data.y, m)?;
        out.push((m, v.matvec(&run.x)?, start.elapsed().as_secs_f64()));
    }
    Ok(out)
}
