use affine_pim::linops::{DenseMatrix, Gaussian, Vector};
use affine_pim::pim::{calibration_test, CalibrationOptions, PimSteps};
use affine_pim::simplify::check_fixed_point;
use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::Output;
use crate::config::Config;
use crate::setup;

/// `N(0, BBᵀ/d + I)` with `B` uniform on `[−1, 1]`.
pub fn prior(d: usize, seed: u64) -> Result<Gaussian> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = DenseMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let mut s = b.matmul_tr(&b)?.scaled(1.0 / d as f64);
    s.add_identity(1.0);
    Ok(Gaussian::new(Vector::zeros(d), s)?)
}

pub fn run(cfg: &Config, out: &Output) -> Result<()> {
    let cc = &cfg.calibrate;
    let seed = cfg.seed.unwrap_or(0);
    let a = setup::system(&cfg.system)?;
    let ad = a.to_dense()?;
    let d = a.rows();
    let prior = prior(d, seed)?;
    let distort = 1.0 + cc.rhs_perturbation;

    // The method must solve the system it is given; check on one draw.
    let probe_b = ad.matvec(&Vector::from_fn(d, |i| 1.0 + i as f64 / d as f64))?;
    let probe = setup::method(&cfg.method, &a, &probe_b.scaled(distort))?.trace()?;
    check_fixed_point(&probe, &a, &probe_b, 1e-8)?;

    let opts = CalibrationOptions {
        n_samples: cc.samples,
        rank_tol: cc.rank_tol,
        seed,
    };
    let build = |b: &Vector| -> affine_pim::Result<PimSteps> {
        let prog =
            setup::method(&cfg.method, &a, &b.scaled(distort)).map_err(|e| match e
                .downcast::<affine_pim::Error>()
            {
                Ok(err) => err,
                Err(other) => affine_pim::Error::InvalidArgument(other.to_string()),
            })?;
        Ok(PimSteps::Stationary(prog.trace()?.into()))
    };
    let mut reports = Vec::new();
    for &i in &cc.iterations {
        let rep = calibration_test(&prior, &ad, build, i, &opts)?;
        let mut v = serde_json::to_value(&rep)?;
        v["chi_square_ok"] = json!(rep.chi_square_ok());
        v["null_space_ok"] = json!(rep.null_space_ok(cc.null_tol));
        v["passed"] = json!(rep.chi_square_ok() && rep.null_space_ok(cc.null_tol));
        reports.push(v);
    }
    out.json(
        "calibration.json",
        &json!({
            "method": format!("{:?}", cfg.method.kind),
            "d": d,
            "seed": seed,
            "reports": reports,
        }),
    )
}
