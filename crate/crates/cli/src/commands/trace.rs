use affine_pim::linops::Vector;
use affine_pim::tracer::eval_affine;
use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::Output;
use crate::config::Config;
use crate::exit::EqualityFailure;
use crate::setup;

const PROBE_TOL: f64 = 1e-10;

pub fn run(cfg: &Config, out: &Output, eval: Option<&str>) -> Result<()> {
    let a = setup::system(&cfg.system)?;
    let d = a.rows();
    let b = setup::ones(d);
    let prog = setup::method(&cfg.method, &a, &b)?;
    let graph = prog.trace()?;

    // Affinity probe: P(½x + ½y) = ½P(x) + ½P(y), and the graph agrees with
    // an eager run of the same program.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
    let mut draw = || Vector::from_fn(d, |_| rng.random_range(-1.0..1.0));
    let (x, y) = (draw(), draw());
    let mid = Vector::from_fn(d, |i| 0.5 * (x[i] + y[i]));
    let (px, py) = (eval_affine(&graph, &x)?, eval_affine(&graph, &y)?);
    let want = Vector::from_fn(d, |i| 0.5 * (px[i] + py[i]));
    let affinity = eval_affine(&graph, &mid)?.rel_diff(&want);
    let eager = prog.run_numeric(&x)?.rel_diff(&px);
    let passed = affinity <= PROBE_TOL && eager <= PROBE_TOL;

    let mut doc = json!({
        "method": prog.name(),
        "d": d,
        "nodes": graph.len(),
        "stages": graph.stages().len(),
        "probes": {
            "affinity_rel_dev": affinity,
            "graph_vs_eager_rel_dev": eager,
            "tol": PROBE_TOL,
            "passed": passed,
        },
        "graph": graph.to_json(),
    });
    if let Some(text) = eval {
        let mut x = setup::parse_vector(text, d)?;
        for _ in 0..cfg.trace.iterations {
            x = eval_affine(&graph, &x)?;
        }
        doc["eval"] = json!({ "iterations": cfg.trace.iterations, "iterate": x.as_slice() });
    }
    out.json("trace.json", &doc)?;
    if !passed {
        return Err(
            EqualityFailure(format!("affinity probe {affinity:e}, eager {eager:e}")).into(),
        );
    }
    Ok(())
}
