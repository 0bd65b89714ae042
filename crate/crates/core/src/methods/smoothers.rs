use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{dense_inverse, DenseMatrix, LinearOperator, Vector};
use crate::tracer::{Program, Tracer, TracerValue};

/// Right-hand side of a traced solve: a constant vector (recorded as a
/// shift) or a traced value (recorded as an addition).
#[derive(Debug, Clone)]
pub enum Rhs {
    Const(Vector),
    Traced(TracerValue),
}

impl Rhs {
    /// `r + rhs`.
    pub fn add_to(&self, t: &mut Tracer, r: TracerValue) -> Result<TracerValue> {
        match self {
            Rhs::Const(b) => t.shift(r, b),
            Rhs::Traced(v) => t.add(r, *v),
        }
    }

    /// `rhs − A x`, or `rhs` itself for a zero iterate.
    pub fn residual(
        &self,
        t: &mut Tracer,
        a: &LinearOperator,
        x: Option<TracerValue>,
    ) -> Result<TracerValue> {
        match (self, x) {
            (Rhs::Traced(v), None) => Ok(*v),
            (Rhs::Const(_), None) => Err(zero_iterate_const_rhs()),
            (_, Some(x)) => {
                let ax = t.apply(a, x)?;
                let r = t.neg(ax)?;
                self.add_to(t, r)
            }
        }
    }
}

fn zero_iterate_const_rhs() -> Error {
    Error::InvalidArgument("a zero initial guess needs a traced right-hand side".into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmootherKind {
    GaussSeidel,
    Jacobi { omega: f64 },
}

impl SmootherKind {
    pub fn label(&self) -> String {
        match self {
            SmootherKind::GaussSeidel => "gauss_seidel".into(),
            SmootherKind::Jacobi { omega } if *omega == 1.0 => "jacobi".into(),
            SmootherKind::Jacobi { omega } => format!("jacobi(omega={omega})"),
        }
    }
}

/// Operators for one splitting-based sweep on a fixed matrix.
#[derive(Debug, Clone)]
pub struct Smoother {
    kind: SmootherKind,
    a: LinearOperator,
    /// `L⁻¹` (Gauss–Seidel) or `D⁻¹` (Jacobi).
    inv_part: LinearOperator,
    /// Strict upper triangle, Gauss–Seidel only.
    upper: Option<LinearOperator>,
}

impl Smoother {
    pub fn new(a: &LinearOperator, kind: SmootherKind) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidArgument(
                "smoother needs a square matrix".into(),
            ));
        }
        match kind {
            SmootherKind::GaussSeidel => Ok(Self {
                kind,
                a: a.clone(),
                inv_part: LinearOperator::inverse_of(&LinearOperator::lower_tri_of(a, false)?)?,
                upper: Some(LinearOperator::upper_tri_of(a, true)?),
            }),
            SmootherKind::Jacobi { omega } => {
                if !(omega > 0.0 && omega <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "relaxation weight {omega} outside (0, 1]"
                    )));
                }
                Ok(Self {
                    kind,
                    a: a.clone(),
                    inv_part: LinearOperator::inverse_of(&LinearOperator::diagonal_of(a)?)?,
                    upper: None,
                })
            }
        }
    }

    pub fn kind(&self) -> SmootherKind {
        self.kind
    }

    pub fn system(&self) -> &LinearOperator {
        &self.a
    }

    /// One sweep on `A x = rhs`; `x = None` is the zero iterate.
    pub fn sweep(&self, t: &mut Tracer, x: Option<TracerValue>, rhs: &Rhs) -> Result<TracerValue> {
        match self.kind {
            SmootherKind::GaussSeidel => {
                let upper = self.upper.as_ref().expect("Gauss-Seidel keeps U");
                let r = match x {
                    Some(x) => {
                        let ux = t.apply(upper, x)?;
                        let r = t.neg(ux)?;
                        rhs.add_to(t, r)?
                    }
                    None => match rhs {
                        Rhs::Traced(v) => *v,
                        Rhs::Const(_) => return Err(zero_iterate_const_rhs()),
                    },
                };
                t.apply(&self.inv_part, r)
            }
            SmootherKind::Jacobi { omega } => {
                let r = rhs.residual(t, &self.a, x)?;
                let c = t.apply(&self.inv_part, r)?;
                let c = if omega == 1.0 { c } else { t.scale(omega, c)? };
                match x {
                    Some(x) => t.add(x, c),
                    None => Ok(c),
                }
            }
        }
    }

    /// Dense `(G, f)` with `x ↦ G x + f`, formed explicitly.
    pub fn dense_affine(&self, b: &Vector) -> Result<(DenseMatrix, Vector)> {
        let a = self.a.to_dense()?;
        let n = a.rows();
        let (m, scale) = match self.kind {
            SmootherKind::GaussSeidel => {
                let l = DenseMatrix::from_fn(n, n, |i, j| if j <= i { a.get(i, j) } else { 0.0 });
                (dense_inverse(&l)?, 1.0)
            }
            SmootherKind::Jacobi { omega } => {
                let d: Vec<f64> = a.diagonal().iter().map(|v| 1.0 / v).collect();
                (DenseMatrix::diag(&d), omega)
            }
        };
        let m = m.scaled(scale);
        let mut g = m.matmul(&a)?.scaled(-1.0);
        g.add_identity(1.0);
        let f = m.matvec(b)?;
        Ok((g, f))
    }
}

/// `x ↦ L⁻¹(b − U x)` with `L` the lower triangle including the diagonal
/// and `U` the strict upper triangle.
pub fn gauss_seidel_step(a: &LinearOperator, b: &Vector) -> Result<Program> {
    step_program("gauss_seidel", a, b, SmootherKind::GaussSeidel)
}

/// `x ↦ x + ω D⁻¹(b − A x)`.
pub fn jacobi_step(a: &LinearOperator, b: &Vector, omega: f64) -> Result<Program> {
    step_program("jacobi", a, b, SmootherKind::Jacobi { omega })
}

fn step_program(
    name: &'static str,
    a: &LinearOperator,
    b: &Vector,
    kind: SmootherKind,
) -> Result<Program> {
    if b.len() != a.rows() {
        return Err(crate::error::dim_err(name, a.rows(), b.len()));
    }
    let smoother = Smoother::new(a, kind)?;
    let rhs = Rhs::Const(b.clone());
    Ok(Program::new(name, a.rows(), move |t, x| {
        smoother.sweep(t, Some(x), &rhs)
    }))
}
