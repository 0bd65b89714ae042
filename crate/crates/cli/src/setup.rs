//! Builds systems and traced methods from configuration.

use affine_pim::cagp::Kernel;
use affine_pim::linops::{DenseMatrix, LinearOperator, Vector};
use affine_pim::methods::{
    gauss_seidel_step, jacobi_step, two_grid_cycle, v_cycle, CycleConfig, Grid, GridHierarchy,
    Smoother, SmootherKind,
};
use affine_pim::tracer::Program;
use anyhow::{bail, Result};

use crate::config::{MethodConfig, MethodKind, SmootherChoice, SystemConfig, SystemKind};

pub fn system(cfg: &SystemConfig) -> Result<LinearOperator> {
    let d = cfg.d;
    if d == 0 {
        bail!("system dimension must be positive");
    }
    let m = match cfg.kind {
        SystemKind::Tridiagonal => DenseMatrix::from_fn(d, d, |i, j| match i.abs_diff(j) {
            0 => cfg.diag,
            1 => -1.0,
            _ => 0.0,
        }),
        SystemKind::Matern => {
            let k = Kernel::matern32(cfg.lengthscale, cfg.amplitude)?;
            let mut g = k.gram(&Grid::line(d)?.coordinates());
            g.add_identity(cfg.noise);
            g
        }
    };
    Ok(LinearOperator::dense("A", m))
}

pub fn ones(d: usize) -> Vector {
    Vector::from(vec![1.0; d])
}

fn cycle_config(cfg: &MethodConfig) -> CycleConfig {
    CycleConfig {
        smoother: match cfg.smoother {
            SmootherChoice::GaussSeidel => SmootherKind::GaussSeidel,
            SmootherChoice::Jacobi => SmootherKind::Jacobi { omega: cfg.omega },
        },
        nu_pre: cfg.nu_pre,
        nu_post: cfg.nu_post,
    }
}

/// Line-grid hierarchy from `d` and the configured coarse sizes.
pub fn hierarchy(a: &LinearOperator, cfg: &MethodConfig) -> Result<GridHierarchy> {
    let d = a.rows();
    let mut sizes = vec![d];
    if cfg.coarse.is_empty() {
        if !d.is_multiple_of(5) {
            bail!("default coarse grid needs d divisible by 5, got {d}");
        }
        sizes.push(d / 5);
    } else {
        sizes.extend(&cfg.coarse);
    }
    let grids = sizes
        .iter()
        .map(|&n| Grid::line(n))
        .collect::<affine_pim::Result<Vec<_>>>()?;
    Ok(GridHierarchy::galerkin(a, &grids, cycle_config(cfg))?)
}

pub fn method(cfg: &MethodConfig, a: &LinearOperator, b: &Vector) -> Result<Program> {
    Ok(match cfg.kind {
        MethodKind::GaussSeidel => gauss_seidel_step(a, b)?,
        MethodKind::Jacobi => jacobi_step(a, b, cfg.omega)?,
        MethodKind::TwoGrid => two_grid_cycle(&hierarchy(a, cfg)?, b)?,
        MethodKind::VCycle => v_cycle(&hierarchy(a, cfg)?, b)?,
        MethodKind::ClippedGaussSeidel => {
            let smoother = Smoother::new(a, SmootherKind::GaussSeidel)?;
            let rhs = affine_pim::methods::Rhs::Const(b.clone());
            Program::new("clipped_gauss_seidel", a.rows(), move |t, x| {
                let y = smoother.sweep(t, Some(x), &rhs)?;
                t.map(y, |v| v.clamp(-1.0, 1.0))
            })
        }
    })
}

/// Comma-separated vector, or `zeros` / `ones`.
pub fn parse_vector(text: &str, d: usize) -> Result<Vector> {
    match text.trim() {
        "zeros" => return Ok(Vector::zeros(d)),
        "ones" => return Ok(ones(d)),
        _ => {}
    }
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| anyhow::anyhow!("cannot parse vector {text:?}: {e}"))?;
    if vals.len() != d {
        bail!("vector has {} entries, system has {d}", vals.len());
    }
    Ok(Vector::from(vals))
}
