use std::time::Instant;

use affine_pim::cagp::Kernel;
use affine_pim::linops::{DenseMatrix, Gaussian, LinearOperator};
use affine_pim::methods::{two_grid_cycle, CycleConfig, Grid, GridHierarchy, HandTwoGrid};
use affine_pim::pim::Pim;
use anyhow::{bail, Result};

use super::{fmt_f64, Output};
use crate::config::Config;
use crate::exit::EqualityFailure;
use crate::setup::ones;

fn median(mut t: Vec<f64>) -> f64 {
    t.sort_by(f64::total_cmp);
    let n = t.len();
    if n % 2 == 1 {
        t[n / 2]
    } else {
        0.5 * (t[n / 2 - 1] + t[n / 2])
    }
}

pub fn run(cfg: &Config, out: &Output) -> Result<()> {
    let bc = &cfg.bench;
    if bc.runs == 0 {
        bail!("bench.runs must be positive");
    }
    let kernel = Kernel::matern32(bc.lengthscale, bc.amplitude)?;
    let mut rows = Vec::new();
    for &d in &bc.sizes {
        if d == 0 || d % 5 != 0 {
            bail!("bench size {d} is not a positive multiple of 5");
        }
        let a = LinearOperator::dense("A", kernel.gram(&Grid::line(d)?.coordinates()));
        let h = GridHierarchy::galerkin(
            &a,
            &[Grid::line(d)?, Grid::line(d / 5)?],
            CycleConfig::default(),
        )?;
        let b = ones(d);
        let prior = Gaussian::standard(d);
        let sigma0 = DenseMatrix::identity(d);
        let traced = || -> Result<Gaussian> {
            Ok(Pim::from_program(&two_grid_cycle(&h, &b)?, prior.clone())?
                .iterate(bc.iterations)?)
        };
        let hand = || -> Result<Gaussian> {
            Ok(HandTwoGrid::new(&h, &b)?.run(&prior.mean, &sigma0, bc.iterations)?)
        };

        // The equality check doubles as the warmup run.
        let (t, hd) = (traced()?, hand()?);
        let em = t.mean.rel_diff(&hd.mean);
        let ec = t.dense_cov()?.rel_diff(&hd.dense_cov()?);
        if !(em <= bc.equality_tol && ec <= bc.equality_tol) {
            return Err(EqualityFailure(format!(
                "d={d}: traced vs hand mean {em:e}, covariance {ec:e}, tolerance {:e}",
                bc.equality_tol
            ))
            .into());
        }
        let mut th = Vec::new();
        let mut tt = Vec::new();
        for _ in 0..bc.runs {
            let s = Instant::now();
            hand()?;
            th.push(s.elapsed().as_secs_f64());
            let s = Instant::now();
            traced()?;
            tt.push(s.elapsed().as_secs_f64());
        }
        eprintln!("d={d}: equality mean {em:.1e} cov {ec:.1e}");
        rows.push(vec![
            d.to_string(),
            fmt_f64(median(th)),
            fmt_f64(median(tt)),
        ]);
    }
    out.csv(
        "bench_tracer.csv",
        &["d", "time_hand_s", "time_traced_s"],
        &rows,
    )
}
