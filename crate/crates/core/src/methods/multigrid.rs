use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::smoothers::{Rhs, Smoother, SmootherKind};
use super::transfer::{interpolator_matrix, restrictor_matrix};
use crate::error::{dim_err, Error, Result};
use crate::linops::{CostClass, DenseMatrix, LinearOperator, Vector};
use crate::tracer::{trace, Program, Tracer, TracerValue};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleConfig {
    pub smoother: SmootherKind,
    pub nu_pre: usize,
    pub nu_post: usize,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            smoother: SmootherKind::GaussSeidel,
            nu_pre: 3,
            nu_post: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Level {
    pub a: LinearOperator,
    pub dense: DenseMatrix,
    pub grid: Option<Grid>,
    /// Absent on the coarsest level.
    pub smoother: Option<Smoother>,
}

/// Transfers between level `k` and `k + 1`.
#[derive(Debug, Clone)]
pub struct Transfer {
    pub restrictor: LinearOperator,
    pub interpolator: LinearOperator,
}

/// Operators `A¹ … Aⁿ` with Galerkin coarse matrices `Aᵏ⁺¹ = Rᵏ Aᵏ Pᵏ`.
#[derive(Debug, Clone)]
pub struct GridHierarchy {
    levels: Vec<Level>,
    transfers: Vec<Transfer>,
    config: CycleConfig,
    coarse_inverse: LinearOperator,
}

impl GridHierarchy {
    /// Hierarchy over nested grids, finest first. `a` is the fine operator
    /// and must be defined on `grids[0]`.
    pub fn galerkin(a: &LinearOperator, grids: &[Grid], config: CycleConfig) -> Result<Self> {
        if grids.len() < 2 {
            return Err(Error::InvalidArgument(
                "hierarchy needs at least two grids".into(),
            ));
        }
        if grids[0].len() != a.rows() {
            return Err(dim_err("GridHierarchy", a.rows(), grids[0].len()));
        }
        let mut transfers = Vec::new();
        for k in 0..grids.len() - 1 {
            transfers.push((
                restrictor_matrix(&grids[k], &grids[k + 1])?,
                interpolator_matrix(&grids[k + 1], &grids[k])?,
            ));
        }
        let grids: Vec<Option<Grid>> = grids.iter().copied().map(Some).collect();
        Self::from_transfers(a, transfers, &grids, config)
    }

    /// Hierarchy from explicit `(R, P)` pairs, finest first.
    pub fn from_transfers(
        a: &LinearOperator,
        transfers: Vec<(DenseMatrix, DenseMatrix)>,
        grids: &[Option<Grid>],
        config: CycleConfig,
    ) -> Result<Self> {
        if transfers.is_empty() {
            return Err(Error::InvalidArgument(
                "hierarchy needs at least two levels".into(),
            ));
        }
        let n_levels = transfers.len() + 1;
        let mut dense = vec![a.to_dense()?];
        for (k, (r, p)) in transfers.iter().enumerate() {
            let prev = &dense[k];
            if r.cols() != prev.rows() || p.rows() != prev.rows() || r.rows() != p.cols() {
                return Err(dim_err(
                    "transfer",
                    prev.rows(),
                    format!("R {:?}, P {:?}", r.shape(), p.shape()),
                ));
            }
            dense.push(r.matmul(prev)?.matmul(p)?);
        }
        let mut levels = Vec::with_capacity(n_levels);
        for (k, m) in dense.into_iter().enumerate() {
            let op = if k == 0 {
                a.clone()
            } else if k == n_levels - 1 {
                LinearOperator::dense_with_class(
                    format!("A{}", k + 1),
                    m.clone(),
                    CostClass::CoarseSolve,
                )
            } else {
                LinearOperator::dense(format!("A{}", k + 1), m.clone())
            };
            let smoother = if k + 1 < n_levels {
                Some(Smoother::new(&op, config.smoother)?)
            } else {
                None
            };
            levels.push(Level {
                a: op,
                dense: m,
                grid: grids.get(k).copied().flatten(),
                smoother,
            });
        }
        let coarse_inverse = LinearOperator::inverse_of(&levels[n_levels - 1].a)?;
        let transfers = transfers
            .into_iter()
            .enumerate()
            .map(|(k, (r, p))| Transfer {
                restrictor: LinearOperator::dense_with_class(
                    format!("R{}", k + 1),
                    r,
                    CostClass::Transfer,
                ),
                interpolator: LinearOperator::dense_with_class(
                    format!("P{}", k + 1),
                    p,
                    CostClass::Transfer,
                ),
            })
            .collect();
        Ok(Self {
            levels,
            transfers,
            config,
            coarse_inverse,
        })
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn transfers(&self) -> &[Transfer] {
        &self.transfers
    }

    pub fn config(&self) -> CycleConfig {
        self.config
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn fine(&self) -> &LinearOperator {
        &self.levels[0].a
    }

    pub fn dim(&self) -> usize {
        self.levels[0].a.rows()
    }

    /// Largest deviation `‖Aᵏ⁺¹ − Rᵏ Aᵏ Pᵏ‖_max` across levels.
    pub fn galerkin_defect(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (k, t) in self.transfers.iter().enumerate() {
            let r = t.restrictor.to_dense()?;
            let p = t.interpolator.to_dense()?;
            let prod = r.matmul(&self.levels[k].dense)?.matmul(&p)?;
            worst = worst.max(prod.sub(&self.levels[k + 1].dense)?.max_abs());
        }
        Ok(worst)
    }

    /// Coarse solve used below `level`: `(Aᵏ⁺¹)⁻¹` at the bottom, else one
    /// traced cycle on level `k + 1` from a zero iterate.
    fn coarse_solver(&self, level: usize, two_grid: bool) -> Result<LinearOperator> {
        let next = level + 1;
        if two_grid || next == self.depth() - 1 {
            if next == self.depth() - 1 {
                return Ok(self.coarse_inverse.clone());
            }
            return LinearOperator::inverse_of(&self.levels[next].a);
        }
        let inner = self.coarse_solver(next, false)?;
        let dim = self.levels[next].a.rows();
        let graph = trace(
            &|t: &mut Tracer, r: TracerValue| self.cycle(t, next, None, &Rhs::Traced(r), &inner),
            dim,
        )?;
        LinearOperator::from_graph(format!("Vcycle{}", next + 1), graph, CostClass::CoarseSolve)
    }

    /// One cycle on `level` for `A x = rhs`, using `coarse` as the solve on
    /// the next level. Smoother sweeps and the correction are checkpointed.
    pub fn cycle(
        &self,
        t: &mut Tracer,
        level: usize,
        x: Option<TracerValue>,
        rhs: &Rhs,
        coarse: &LinearOperator,
    ) -> Result<TracerValue> {
        let lv = &self.levels[level];
        let smoother = lv
            .smoother
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("no smoother on the coarsest level".into()))?;
        let tr = &self.transfers[level];
        let mut x = x;
        for _ in 0..self.config.nu_pre {
            let next = smoother.sweep(t, x, rhs)?;
            x = Some(t.checkpoint(next)?);
        }
        let r = rhs.residual(t, &lv.a, x)?;
        let r2 = t.apply(&tr.restrictor, r)?;
        let e2 = t.apply(coarse, r2)?;
        let e1 = t.apply(&tr.interpolator, e2)?;
        let corrected = match x {
            Some(x) => t.add(x, e1)?,
            None => e1,
        };
        let mut x = t.checkpoint(corrected)?;
        for _ in 0..self.config.nu_post {
            let next = smoother.sweep(t, Some(x), rhs)?;
            x = t.checkpoint(next)?;
        }
        Ok(x)
    }
}

/// Two-grid cycle with an exact solve on the second level.
pub fn two_grid_cycle(hierarchy: &GridHierarchy, b: &Vector) -> Result<Program> {
    cycle_program(hierarchy, b, true)
}

/// Recursive V-cycle: the coarse solve on each level is one cycle of the
/// next level from a zero iterate, ending in an exact coarsest solve.
pub fn v_cycle(hierarchy: &GridHierarchy, b: &Vector) -> Result<Program> {
    cycle_program(hierarchy, b, false)
}

fn cycle_program(hierarchy: &GridHierarchy, b: &Vector, two_grid: bool) -> Result<Program> {
    let d = hierarchy.dim();
    if b.len() != d {
        return Err(dim_err("cycle", d, b.len()));
    }
    let coarse = hierarchy.coarse_solver(0, two_grid)?;
    let h = hierarchy.clone();
    let rhs = Rhs::Const(b.clone());
    let name = if two_grid { "two_grid" } else { "v_cycle" };
    Ok(Program::new(name, d, move |t, x| {
        h.cycle(t, 0, Some(x), &rhs, &coarse)
    }))
}
