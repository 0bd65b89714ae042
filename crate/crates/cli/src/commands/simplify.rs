use affine_pim::linops::{dense_inverse, DenseMatrix, Vector};
use affine_pim::simplify::{derive_step_programs, Limits, StepOptions};
use affine_pim::tracer::eval_affine;
use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::Output;
use crate::config::Config;
use crate::exit::EqualityFailure;
use crate::setup;

const EVAL_TOL: f64 = 1e-8;

pub fn run(cfg: &Config, out: &Output, dump_expr: bool, eval: bool) -> Result<()> {
    let sc = &cfg.simplify;
    let a = setup::system(&cfg.system)?;
    let d = a.rows();
    let b = setup::ones(d);
    let graph = setup::method(&cfg.method, &a, &b)?.trace()?;
    let opts = StepOptions {
        limits: Limits {
            max_iterations: sc.max_iterations,
            max_nodes: sc.max_nodes,
            time_limit_secs: sc.time_limit_secs,
        },
        nominal_rows: sc.nominal_rows,
        ..StepOptions::default()
    };
    let steps = derive_step_programs(&graph, &a, &b, &opts)?;
    let segments: Vec<_> = steps
        .reports()
        .iter()
        .map(|r| {
            let mut v = json!({
                "index": r.index,
                "saturation": r.saturation,
                "extracted_cost": r.extracted_cost,
                "inverses_remaining": r.inverses_remaining,
            });
            if dump_expr {
                v["input_expr"] = json!(r.input_expr);
                v["extracted"] = json!(r.extracted);
            }
            v
        })
        .collect();
    let mut doc = json!({
        "method": format!("{:?}", cfg.method.kind),
        "d": d,
        "segments": segments,
    });

    let mut failure = None;
    if eval {
        // Dense oracle: V·M = V (I − G) A⁻¹ with G read off the graph.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
        let v = DenseMatrix::from_fn(sc.eval_rows, d, |_, _| rng.random_range(-1.0..1.0));
        let linear = steps.linear_graph();
        let mut g = DenseMatrix::zeros(d, d);
        for j in 0..d {
            let e = Vector::from_fn(d, |i| if i == j { 1.0 } else { 0.0 });
            let col = eval_affine(linear, &e)?;
            for i in 0..d {
                g.set(i, j, col[i]);
            }
        }
        let want = v
            .matmul(&DenseMatrix::identity(d).sub(&g)?)?
            .matmul(&dense_inverse(&a.to_dense()?)?)?;
        let got = steps.vm(&v)?;
        let dev = got.sub(&want)?.max_abs() / want.max_abs().max(1.0);
        doc["eval"] = json!({ "rows": sc.eval_rows, "max_rel_dev": dev, "tol": EVAL_TOL, "passed": dev <= EVAL_TOL });
        if !(dev <= EVAL_TOL) {
            failure = Some(dev);
        }
    }
    out.json("simplify.json", &doc)?;
    if let Some(dev) = failure {
        return Err(EqualityFailure(format!(
            "compiled V·M deviates from the dense oracle by {dev:e}"
        ))
        .into());
    }
    Ok(())
}
