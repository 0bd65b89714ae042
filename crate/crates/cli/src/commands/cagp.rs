use std::time::Instant;

use affine_pim::cagp::{
    cagp_at, cagp_multigrid, cg_means, exact_gp, metrics, rmse, synth_dataset, system_operator,
    CagpPosterior, Kernel,
};
use affine_pim::methods::{gauss_seidel_step, CycleConfig, Grid, GridHierarchy};
use affine_pim::simplify::{derive_step_programs, StepOptions};
use anyhow::Result;

use super::{fmt_f64, Output};
use crate::config::{CagpMethod, Config};

struct Row {
    method: &'static str,
    m: usize,
    wall: f64,
    rmse: f64,
    nll: Option<f64>,
}

impl Row {
    fn cells(&self, with_method: bool) -> Vec<String> {
        let mut c = Vec::new();
        if with_method {
            c.push(self.method.to_string());
        }
        c.push(self.m.to_string());
        c.push(fmt_f64(self.wall));
        c.push(fmt_f64(self.rmse));
        c.push(self.nll.map(fmt_f64).unwrap_or_default());
        c
    }
}

pub fn run(cfg: &Config, out: &Output) -> Result<()> {
    let cc = &cfg.cagp;
    let kernel = Kernel::matern32(cc.lengthscale, cc.amplitude)?;
    let data = synth_dataset(
        &Grid::square(cc.train_side)?,
        &Grid::square(cc.test_side)?,
        &kernel,
        cc.noise,
        cfg.seed.unwrap_or(0),
    )?;
    let truth = data
        .test_f
        .clone()
        .expect("synthetic data carries the truth");
    let a = system_operator(&data, &kernel);
    let opts = StepOptions::default();
    let fine = Grid::square(cc.train_side)?;

    let mut rows = Vec::new();
    let exact = exact_gp(&data, &kernel)?;
    let em = metrics(&exact, &truth, data.noise)?;
    rows.push(Row {
        method: "exact",
        m: 0,
        wall: exact.wall_time_s,
        rmse: em.rmse,
        nll: em.nll,
    });
    for &method in &cc.methods {
        let start = Instant::now();
        let posts: Vec<CagpPosterior> = match method {
            CagpMethod::Gs => {
                let graph = gauss_seidel_step(&a, &data.y)?.trace()?;
                cagp_at(
                    &data,
                    &kernel,
                    &derive_step_programs(&graph, &a, &data.y, &opts)?,
                    &cc.m,
                )?
            }
            CagpMethod::Mg2 => {
                let grids = [fine, Grid::square(cc.two_grid_coarse)?];
                let h = GridHierarchy::galerkin(&a, &grids, CycleConfig::default())?;
                cagp_multigrid(&data, &kernel, &h, &cc.m, &opts)?
            }
            CagpMethod::Mg3 => {
                let [c1, c2] = cc.three_grid_coarse;
                let grids = [fine, Grid::square(c1)?, Grid::square(c2)?];
                let h = GridHierarchy::galerkin(&a, &grids, CycleConfig::default())?;
                cagp_multigrid(&data, &kernel, &h, &cc.m, &opts)?
            }
            CagpMethod::Cg => {
                for (m, mean, wall) in cg_means(&data, &kernel, &cc.m)? {
                    rows.push(Row {
                        method: method.label(),
                        m,
                        wall,
                        rmse: rmse(&mean, &truth)?,
                        nll: None,
                    });
                }
                continue;
            }
        };
        let setup = start.elapsed().as_secs_f64() - posts.last().map_or(0.0, |p| p.wall_time_s);
        for p in &posts {
            let mt = metrics(p, &truth, data.noise)?;
            rows.push(Row {
                method: method.label(),
                m: p.m,
                wall: setup + p.wall_time_s,
                rmse: mt.rmse,
                nll: mt.nll,
            });
        }
    }

    let all: Vec<Vec<String>> = rows.iter().map(|r| r.cells(true)).collect();
    out.csv(
        "results.csv",
        &["method", "m", "wall_time_s", "rmse", "nll"],
        &all,
    )?;
    if out.has_dir() {
        for &method in &cc.methods {
            let curve: Vec<Vec<String>> = rows
                .iter()
                .filter(|r| r.method == method.label())
                .map(|r| r.cells(false))
                .collect();
            out.csv(
                &format!("curve_{}.csv", method.label()),
                &["m", "wall_time_s", "rmse", "nll"],
                &curve,
            )?;
        }
    }
    Ok(())
}
