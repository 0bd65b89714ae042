use std::collections::HashMap;
use std::sync::Arc;

use egg::{AstSize, Extractor, Language, Runner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::expr::{LeafTable, MatExpr};
use super::lang::{check_dimensions, MatAnalysis, MatEGraph};
use super::rules::{rewrites_for, Guard, Rhs, RuleSpec, RULES};
use crate::linops::{DenseMatrix, LinearOperator};

/// Outcome of checking every rewrite on random instantiations.
#[derive(Debug, Clone, Serialize)]
pub struct RulesetCheck {
    pub rules: usize,
    pub instances: usize,
    /// Largest deviation, relative to `max(‖value‖_max, 1)`.
    pub worst: f64,
    pub failures: Vec<String>,
}

/// Applies each rule once to `instances` random instantiations of its
/// left-hand side (and right-hand side for bidirectional rules) and
/// evaluates every term in the root class densely.
pub fn verify_ruleset(instances: usize, seed: u64) -> RulesetCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for spec in RULES {
        for _ in 0..instances {
            let n = rng.random_range(2..=8);
            match check_rule(spec, n, &mut rng) {
                Ok(dev) => worst = worst.max(dev),
                Err(msg) => failures.push(msg),
            }
        }
    }
    RulesetCheck {
        rules: RULES.len(),
        instances,
        worst,
        failures,
    }
}

/// Pattern variables follow the naming convention in [`RuleSpec`]: `?s`
/// and `?t` scalars, `?k` a zero scalar, `?e` an identity, `?z` a zero
/// matrix, anything else a square matrix.
fn instantiate(pattern: &str, n: usize, rng: &mut ChaCha8Rng, table: &mut LeafTable) -> String {
    let mut bindings: HashMap<String, String> = HashMap::new();
    let mut text = String::new();
    let bytes = pattern.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'?' {
            text.push(bytes[i] as char);
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < bytes.len() && bytes[j].is_ascii_alphanumeric() {
            j += 1;
        }
        let name = &pattern[i..j];
        let value = bindings
            .entry(name.to_string())
            .or_insert_with(|| match name {
                "?s" | "?t" => format!("{}", rng.random_range(-2.0..2.0_f64)),
                "?k" => "0".to_string(),
                "?e" => format!("eye:{n}"),
                "?z" => format!("zero:{n}x{n}"),
                _ => {
                    let mut m = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                    m.add_identity(3.0);
                    let op = LinearOperator::dense(format!("M{}", &name[1..]), m);
                    table.intern(&op).to_string()
                }
            });
        text.push_str(value);
        i = j;
    }
    text
}

fn check_rule(spec: &RuleSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let mut table = LeafTable::new(n, n);
    let text = instantiate(spec.lhs, n, rng, &mut table);
    let table = Arc::new(table);
    let fail = |what: String| format!("rule {}: {what}", spec.name);
    let e = MatExpr::parse(&text, table.clone()).map_err(|err| fail(format!("{text}: {err}")))?;
    let v = DenseMatrix::identity(n);
    let want = e.eval_dense(&v).map_err(|err| fail(err.to_string()))?;
    let mut egraph = MatEGraph::new(MatAnalysis::new(table.infos()));
    let root = egraph.add_expr(e.rec_expr());
    let runner = Runner::default()
        .with_egraph(egraph)
        .with_iter_limit(1)
        .run(&rewrites_for(spec));
    let egraph = &runner.egraph;
    check_dimensions(egraph).map_err(fail)?;
    let root = egraph.find(root);
    let extractor = Extractor::new(egraph, AstSize);
    let scale = want.max_abs().max(1.0);
    let mut worst: f64 = 0.0;
    for node in &egraph[root].nodes {
        let term = node.join_recexprs(|id| extractor.find_best(id).1);
        let term = MatExpr::new(term, table.clone()).map_err(|err| fail(err.to_string()))?;
        let got = term.eval_dense(&v).map_err(|err| fail(err.to_string()))?;
        let dev = got
            .sub(&want)
            .map_err(|err| fail(err.to_string()))?
            .max_abs()
            / scale;
        if !(dev <= 1e-10) {
            return Err(fail(format!("{e} became {term} (deviation {dev:e})")));
        }
        worst = worst.max(dev);
    }
    if spec.both_ways {
        if let Rhs::Pattern(rhs) = spec.rhs {
            let reversed = RuleSpec {
                name: spec.name,
                lhs: rhs,
                rhs: Rhs::Pattern(spec.lhs),
                guard: Guard::None,
                both_ways: false,
            };
            worst = worst.max(check_rule(&reversed, n, rng)?);
        }
    }
    Ok(worst)
}
