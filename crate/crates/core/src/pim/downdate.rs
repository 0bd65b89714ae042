use crate::error::{dim_err, Error, Result};
use crate::linops::{DenseMatrix, LinearOperator, Vector};
use crate::simplify::{derive_step_programs, StepOptions, StepPrograms};
use crate::tracer::{eval_affine, AffineGraph};

/// `V Dᵢ Vᵀ` for steps `P₁ … Pᵢ` under the inverse prior, accumulated as
/// `Σⱼ Zⱼ S(Mⱼ) Zⱼᵀ` with `Zⱼ = V Ḡᵢ ⋯ Ḡⱼ₊₁`.
pub fn downdate_nonstationary(steps: &[StepPrograms], v: &DenseMatrix) -> Result<DenseMatrix> {
    let mut acc = DenseMatrix::zeros(v.rows(), v.rows());
    let mut z = v.clone();
    for (k, step) in steps.iter().enumerate().rev() {
        if step.dim() != v.cols() {
            return Err(dim_err("downdate_nonstationary", v.cols(), step.dim()));
        }
        acc.add_scaled(1.0, &step.s(&z)?)?;
        if k > 0 {
            z = step.g(&z)?;
        }
    }
    Ok(acc.symmetrized())
}

/// `V Dᵢ Vᵀ` for `i` applications of one step, reusing `Zₖ = Zₖ₋₁ G`.
pub fn downdate_stationary(step: &StepPrograms, v: &DenseMatrix, i: usize) -> Result<DenseMatrix> {
    let mut state = PimState::new(Vector::zeros(step.dim()), v.clone())?;
    for _ in 0..i {
        state.advance(step)?;
    }
    Ok(state.downdate)
}

/// Running summary of a stationary method under the inverse prior,
/// restricted to the rows of `V`.
#[derive(Debug, Clone)]
pub struct PimState {
    pub i: usize,
    pub mean: Vector,
    /// `V Gⁱ`.
    pub z: DenseMatrix,
    /// `V Dᵢ Vᵀ`.
    pub downdate: DenseMatrix,
}

impl PimState {
    pub fn new(x0: Vector, v: DenseMatrix) -> Result<Self> {
        if x0.len() != v.cols() {
            return Err(dim_err("PimState", v.cols(), x0.len()));
        }
        let r = v.rows();
        Ok(Self {
            i: 0,
            mean: x0,
            z: v,
            downdate: DenseMatrix::zeros(r, r),
        })
    }

    pub fn advance(&mut self, step: &StepPrograms) -> Result<()> {
        self.mean = step.p(&self.mean)?;
        self.downdate.add_scaled(1.0, &step.s(&self.z)?)?;
        self.downdate = self.downdate.symmetrized();
        self.z = step.g(&self.z)?;
        self.i += 1;
        Ok(())
    }
}

/// Probes used by the reconstruction check.
const PROBES: usize = 3;

/// A step written as `x ↦ (I − M̄A)x + f̄`, with `M̄` available through its
/// action from the left.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub programs: StepPrograms,
    pub fbar: Vector,
}

impl Decomposition {
    /// `uᵀM̄` for each row `u` of `v`.
    pub fn m_action(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        self.programs.vm(v)
    }

    pub fn reconstruct(&self, x: &Vector) -> Result<Vector> {
        let ax = self.programs.system().apply(x)?;
        let mbar = self.programs.m_dense()?;
        let mut out = x.sub(&mbar.matvec(&ax)?)?;
        out.axpy(1.0, &self.fbar);
        Ok(out)
    }
}

/// Splits a fixed-point step into `M̄` and `f̄` and checks
/// `uᵀ(P(x) − f̄) = uᵀx − (uᵀM̄)(Ax)` on deterministic probes.
pub fn thm3_decompose(
    step: &AffineGraph,
    a: &LinearOperator,
    b: &Vector,
    opts: &StepOptions,
) -> Result<Decomposition> {
    let programs = derive_step_programs(step, a, b, opts)?;
    let d = programs.dim();
    let fbar = programs.shift().clone();
    let probe =
        |k: usize, salt: f64| Vector::from_fn(d, |i| ((i + 1) as f64 * (k as f64 + salt)).sin());
    let u = DenseMatrix::from_fn(PROBES, d, |k, i| probe(k, 0.5)[i]);
    let um = programs.vm(&u)?;
    for k in 0..PROBES {
        let x = probe(k, 1.25);
        let lhs = u.matvec(&eval_affine(step, &x)?.sub(&fbar)?)?;
        let ax = a.apply(&x)?;
        let rhs = u.matvec(&x)?.sub(&um.matvec(&ax)?)?;
        let scale = lhs.norm().max(rhs.norm()).max(1.0);
        let residual = lhs.sub(&rhs)?.norm();
        if residual > 1e-8 * scale {
            return Err(Error::FixedPointViolated {
                residual,
                tol: 1e-8 * scale,
            });
        }
    }
    Ok(Decomposition { programs, fbar })
}
