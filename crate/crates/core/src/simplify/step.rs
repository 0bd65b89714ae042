use serde::Serialize;

use super::engine::{check_no_inverse_of, extract, saturate, Limits, SaturationReport};
use super::program::CompiledProgram;
use super::translate::{build_cancellation_expr, graph_to_expr};
use crate::covgraph::reverse_matmat;
use crate::error::{dim_err, Error, Result};
use crate::linops::{dense_solve, DenseMatrix, LinearOperator, Vector};
use crate::tracer::{eval_affine, AffineGraph};

/// Largest system for which the fixed-point precondition is checked with a
/// dense solve.
pub const FIXED_POINT_CHECK_MAX_DIM: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub limits: Limits,
    /// Nominal row count of `V` used by the cost model.
    pub nominal_rows: usize,
    pub fixed_point_tol: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            limits: Limits::default(),
            nominal_rows: 2,
            fixed_point_tol: 1e-8,
        }
    }
}

/// How one checkpointed stage of the step was simplified.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentReport {
    pub index: usize,
    pub saturation: SaturationReport,
    pub input_expr: String,
    pub extracted: String,
    pub extracted_cost: f64,
    pub inverses_remaining: usize,
}

#[derive(Debug, Clone)]
struct Segment {
    /// Computes `−V·Mₖ`.
    neg_vm: CompiledProgram,
}

/// Executable functions for one affine step `x ↦ (I − M A) x + f`.
#[derive(Debug, Clone)]
pub struct StepPrograms {
    step: AffineGraph,
    linear: AffineGraph,
    a: LinearOperator,
    shift: Vector,
    segments: Vec<Segment>,
    reports: Vec<SegmentReport>,
}

/// Checks `step(x*) = x*` for `x* = A⁻¹ b`.
pub fn check_fixed_point(
    step: &AffineGraph,
    a: &LinearOperator,
    b: &Vector,
    tol: f64,
) -> Result<()> {
    let d = a.rows();
    if d > FIXED_POINT_CHECK_MAX_DIM {
        return Ok(());
    }
    let x_star = dense_solve(&a.to_dense()?, b)?;
    let image = eval_affine(step, &x_star)?;
    let residual = image.sub(&x_star)?.norm();
    let bound = tol * x_star.norm().max(1.0);
    if residual > bound {
        return Err(Error::FixedPointViolated {
            residual,
            tol: bound,
        });
    }
    Ok(())
}

/// Builds `p`, `g` and `s` for a step with the fixed-point property. Each
/// checkpointed stage is simplified on its own; the cancellation must not
/// keep an inverse of `A`.
pub fn derive_step_programs(
    step: &AffineGraph,
    a: &LinearOperator,
    b: &Vector,
    opts: &StepOptions,
) -> Result<StepPrograms> {
    let d = a.rows();
    if !a.is_square() || step.input_dim() != d || step.output_dim() != d || b.len() != d {
        return Err(dim_err("derive_step_programs", d, step.input_dim()));
    }
    check_fixed_point(step, a, b, opts.fixed_point_tol)?;
    let linear = step.strip_shifts();
    let shift = eval_affine(step, &Vector::zeros(d))?;
    let mut segments = Vec::new();
    let mut reports = Vec::new();
    for (index, piece) in linear.split_stages().iter().enumerate() {
        let vg = graph_to_expr(piece, opts.nominal_rows)?;
        let cancel = build_cancellation_expr(&vg, a)?;
        let sat = saturate(&cancel, opts.limits);
        let best = extract(&sat);
        let a_sym = best.expr.leaves.symbol_of(a).expect("A was interned");
        log::debug!(
            "segment {index}: {:?} after {} iterations, {} nodes; {}",
            sat.report.status,
            sat.report.iterations,
            sat.report.nodes,
            best.expr
        );
        check_no_inverse_of(&sat, &best.expr, a_sym)?;
        reports.push(SegmentReport {
            index,
            saturation: sat.report.clone(),
            input_expr: cancel.to_string(),
            extracted: best.expr.to_string(),
            extracted_cost: best.cost.flops,
            inverses_remaining: best.expr.count_inverses(),
        });
        segments.push(Segment {
            neg_vm: CompiledProgram::compile(&best.expr)?,
        });
    }
    Ok(StepPrograms {
        step: step.clone(),
        linear,
        a: a.clone(),
        shift,
        segments,
        reports,
    })
}

impl StepPrograms {
    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn system(&self) -> &LinearOperator {
        &self.a
    }

    pub fn graph(&self) -> &AffineGraph {
        &self.step
    }

    pub fn linear_graph(&self) -> &AffineGraph {
        &self.linear
    }

    pub fn reports(&self) -> &[SegmentReport] {
        &self.reports
    }

    /// `f`, the step's image of zero.
    pub fn shift(&self) -> &Vector {
        &self.shift
    }

    /// The step itself.
    pub fn p(&self, x: &Vector) -> Result<Vector> {
        eval_affine(&self.step, x)
    }

    /// `V·G`.
    pub fn g(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        reverse_matmat(&self.linear, v)
    }

    /// `W·A`.
    pub fn right_apply_a(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self.a.apply_transpose_mat(&w.transpose())?.transpose())
    }

    fn segment_vm(&self, k: usize, v: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self.segments[k].neg_vm.eval(v)?.scaled(-1.0))
    }

    /// `V·M` for the whole step. Stages compose as
    /// `M = M₁ + M'(I − A M₁)` where `M'` belongs to the later stages.
    pub fn vm(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        if v.cols() != self.dim() {
            return Err(dim_err("vm", self.dim(), v.cols()));
        }
        let n = self.segments.len();
        let mut w = self.segment_vm(n - 1, v)?;
        for k in (0..n - 1).rev() {
            let wa = self.right_apply_a(&w)?;
            let mut next = self.segment_vm(k, v)?;
            next.add_scaled(1.0, &w)?;
            next.add_scaled(-1.0, &self.segment_vm(k, &wa)?)?;
            w = next;
        }
        Ok(w)
    }

    /// `V (M + Mᵀ − M A Mᵀ) Vᵀ`, symmetrized.
    pub fn s(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        let w = self.vm(v)?;
        let wa = self.right_apply_a(&w)?;
        let wv = w.matmul_tr(v)?;
        let mut out = wv.add(&wv.transpose())?;
        out.add_scaled(-1.0, &wa.matmul_tr(&w)?)?;
        Ok(out.symmetrized())
    }

    /// Dense `M`, via `vm` on the identity.
    pub fn m_dense(&self) -> Result<DenseMatrix> {
        self.vm(&DenseMatrix::identity(self.dim()))
    }
}
