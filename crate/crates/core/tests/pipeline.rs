//! End-to-end runs through the public API on a small 2D problem with a
//! three-level V-cycle.

use affine_pim::cagp::{cagp_multigrid, exact_gp, synth_dataset, system_operator, Kernel};
use affine_pim::linops::{dense_inverse, Gaussian, Vector};
use affine_pim::methods::{v_cycle, CycleConfig, Grid, GridHierarchy};
use affine_pim::pim::{downdate_stationary, Pim};
use affine_pim::simplify::{derive_step_programs, StepOptions};

type Res = Result<(), Box<dyn std::error::Error>>;

fn grids() -> Result<Vec<Grid>, affine_pim::Error> {
    Ok(vec![Grid::square(9)?, Grid::square(5)?, Grid::square(3)?])
}

#[test]
fn v_cycle_pushforward_matches_downdate() -> Res {
    let kernel = Kernel::matern32(0.5, 1.0)?;
    let train = Grid::square(9)?.coordinates();
    let test = Grid::square(3)?.coordinates();
    let a = kernel.system(&train, 0.1);
    let ad = a.to_dense()?;
    let ainv = dense_inverse(&ad)?;
    let b = Vector::from(vec![1.0; train.len()]);
    let h = GridHierarchy::galerkin(&a, &grids()?, CycleConfig::default())?;
    let program = v_cycle(&h, &b)?;
    let graph = program.trace()?;

    let prior = Gaussian::new(Vector::zeros(train.len()), ainv.clone())?;
    let pim = Pim::from_program(&program, prior)?;
    let step = derive_step_programs(&graph, &a, &b, &StepOptions::default())?;
    let v = kernel.cross(&test, &train);
    let vav = v.matmul(&ainv)?.matmul_tr(&v)?;
    for i in [1, 2, 3] {
        let (_, pushed) = pim.iterate_projected(i, &v)?;
        let via_downdate = vav.sub(&downdate_stationary(&step, &v, i)?)?;
        let err = pushed.sub(&via_downdate)?.max_abs() / vav.max_abs();
        assert!(err < 1e-9, "i={i}: {err:e}");
    }
    Ok(())
}

#[test]
fn three_level_cagp_approaches_exact() -> Res {
    let kernel = Kernel::matern32(0.5, 1.0)?;
    let data = synth_dataset(&Grid::square(9)?, &Grid::square(3)?, &kernel, 0.1, 4)?;
    let a = system_operator(&data, &kernel);
    let h = GridHierarchy::galerkin(&a, &grids()?, CycleConfig::default())?;
    let posts = cagp_multigrid(&data, &kernel, &h, &[0, 1, 3, 6], &StepOptions::default())?;
    let exact = exact_gp(&data, &kernel)?;
    let mean_err: Vec<f64> = posts
        .iter()
        .map(|p| p.mean.sub(&exact.mean).map(|d| d.norm()))
        .collect::<Result<_, _>>()?;
    for w in mean_err.windows(2) {
        assert!(w[1] < w[0], "{mean_err:?}");
    }
    assert!(mean_err[3] < 0.1 * mean_err[0], "{mean_err:?}");
    let exact_var = exact.variances();
    for p in &posts {
        for (v, e) in p.variances().iter().zip(&exact_var) {
            assert!(*v >= e - 1e-8, "variance below exact: {v} < {e}");
        }
    }
    Ok(())
}
