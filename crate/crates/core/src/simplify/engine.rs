use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use egg::{Extractor, Id, Language, RecExpr, Runner, StopReason, Symbol};
use serde::Serialize;

use super::cost::{Cost, MatCost};
use super::expr::{LeafTable, MatExpr};
use super::lang::{MatAnalysis, MatEGraph, MatLang};
use super::rules::ruleset;
use crate::error::{Error, Result};
use crate::linops::OpKind;

/// Saturation budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Limits {
    pub max_iterations: usize,
    pub max_nodes: usize,
    pub time_limit_secs: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_iterations: 24,
            max_nodes: 100_000,
            time_limit_secs: 600.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SaturationStatus {
    Saturated,
    IterationLimit,
    NodeLimit,
    TimeLimit,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaturationReport {
    pub status: SaturationStatus,
    pub iterations: usize,
    pub nodes: usize,
    pub classes: usize,
}

/// A saturated e-graph with the class of the input expression.
pub struct Saturated {
    pub egraph: MatEGraph,
    pub root: Id,
    pub leaves: Arc<LeafTable>,
    pub report: SaturationReport,
}

/// Pairs of views that partition a base operator, each with the base.
fn splitting_facts(leaves: &LeafTable) -> Vec<(Symbol, Vec<Symbol>)> {
    #[derive(PartialEq, Clone, Copy)]
    enum Part {
        Lower,
        StrictLower,
        Diag,
        Upper,
        StrictUpper,
    }
    let mut views: Vec<(Symbol, Symbol, Part)> = Vec::new();
    for e in leaves.entries() {
        let Some(op) = &e.op else { continue };
        let (base, part) = match op.kind() {
            OpKind::DiagonalOf { base, .. } => (base, Part::Diag),
            OpKind::LowerTriOf { base, strict, .. } => (
                base,
                if *strict {
                    Part::StrictLower
                } else {
                    Part::Lower
                },
            ),
            OpKind::UpperTriOf { base, strict, .. } => (
                base,
                if *strict {
                    Part::StrictUpper
                } else {
                    Part::Upper
                },
            ),
            _ => continue,
        };
        if let Some(b) = leaves.symbol_of(base) {
            views.push((b, e.symbol, part));
        }
    }
    let partitions: [&[Part]; 3] = [
        &[Part::Lower, Part::StrictUpper],
        &[Part::StrictLower, Part::Upper],
        &[Part::StrictLower, Part::Diag, Part::StrictUpper],
    ];
    let mut bases: Vec<Symbol> = views.iter().map(|v| v.0).collect();
    bases.sort();
    bases.dedup();
    let mut facts = Vec::new();
    for b in bases {
        for parts in partitions {
            let found: Option<Vec<Symbol>> = parts
                .iter()
                .map(|p| views.iter().find(|v| v.0 == b && v.2 == *p).map(|v| v.1))
                .collect();
            if let Some(syms) = found {
                facts.push((b, syms));
            }
        }
    }
    facts
}

/// Unions `base ≡ Σ parts` and `part_i ≡ base − Σ_{j≠i} part_j`.
fn inject_splittings(egraph: &mut MatEGraph, leaves: &LeafTable) {
    for (base, parts) in splitting_facts(leaves) {
        let b = egraph.add(MatLang::Leaf(base));
        let ids: Vec<Id> = parts
            .iter()
            .map(|p| egraph.add(MatLang::Leaf(*p)))
            .collect();
        let mut sum = ids[0];
        for &id in &ids[1..] {
            sum = egraph.add(MatLang::Add([sum, id]));
        }
        egraph.union(b, sum);
        for (i, &target) in ids.iter().enumerate() {
            let mut acc = b;
            for (j, &other) in ids.iter().enumerate() {
                if i != j {
                    let n = egraph.add(MatLang::Neg(other));
                    acc = egraph.add(MatLang::Add([acc, n]));
                }
            }
            egraph.union(target, acc);
        }
    }
    egraph.rebuild();
}

/// Runs the ruleset on `e` within `limits`. Hitting a limit is reported,
/// not raised.
pub fn saturate(e: &MatExpr, limits: Limits) -> Saturated {
    let mut egraph = MatEGraph::new(MatAnalysis::new(e.leaves.infos()));
    let root = egraph.add_expr(&e.expr);
    inject_splittings(&mut egraph, &e.leaves);
    let runner = Runner::default()
        .with_egraph(egraph)
        .with_iter_limit(limits.max_iterations)
        .with_node_limit(limits.max_nodes)
        .with_time_limit(Duration::from_secs_f64(limits.time_limit_secs))
        .run(&ruleset());
    let status = match runner.stop_reason {
        Some(StopReason::Saturated) => SaturationStatus::Saturated,
        Some(StopReason::IterationLimit(_)) => SaturationStatus::IterationLimit,
        Some(StopReason::NodeLimit(_)) => SaturationStatus::NodeLimit,
        Some(StopReason::TimeLimit(_)) => SaturationStatus::TimeLimit,
        _ => SaturationStatus::Other,
    };
    log::debug!("saturation stopped: {:?}", runner.stop_reason);
    let egraph = runner.egraph;
    let report = SaturationReport {
        status,
        iterations: runner.iterations.len(),
        nodes: egraph.total_size(),
        classes: egraph.number_of_classes(),
    };
    let root = egraph.find(root);
    Saturated {
        egraph,
        root,
        leaves: e.leaves.clone(),
        report,
    }
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub expr: MatExpr,
    pub cost: Cost,
}

/// Minimum-cost representative of the root class.
pub fn extract(sat: &Saturated) -> Extraction {
    let extractor = Extractor::new(&sat.egraph, MatCost::new(&sat.egraph));
    let (cost, expr) = extractor.find_best(sat.root);
    Extraction {
        expr: MatExpr {
            expr,
            leaves: sat.leaves.clone(),
        },
        cost,
    }
}

/// Cost of an explicit term under the model, using the class shapes of
/// `sat`'s graph. `None` if the term is not represented there.
pub fn expr_cost(sat: &Saturated, e: &RecExpr<MatLang>) -> Option<Cost> {
    use egg::CostFunction;
    let ids = sat.egraph.lookup_expr_ids(e)?;
    let mut cf = MatCost::new(&sat.egraph);
    let mut by_class: HashMap<Id, Cost> = HashMap::new();
    let mut last = None;
    for (node, &id) in e.as_ref().iter().zip(&ids) {
        let mapped = node
            .clone()
            .map_children(|c| sat.egraph.find(ids[usize::from(c)]));
        let c = cf.cost(&mapped, |child| by_class[&child]);
        let class = sat.egraph.find(id);
        let slot = by_class.entry(class).or_insert(c);
        if c < *slot {
            *slot = c;
        }
        last = Some(c);
    }
    last
}

/// Errors if any `inv` in `e` acts on a term equivalent to `leaf`.
pub fn check_no_inverse_of(sat: &Saturated, e: &MatExpr, leaf: Symbol) -> Result<()> {
    let target = sat
        .egraph
        .lookup(MatLang::Leaf(leaf))
        .map(|id| sat.egraph.find(id));
    let ids = sat.egraph.lookup_expr_ids(&e.expr);
    for (i, node) in e.expr.as_ref().iter().enumerate() {
        if let MatLang::Inv(c) = node {
            let child_class = ids
                .as_ref()
                .map(|ids| sat.egraph.find(ids[usize::from(*c)]));
            let direct = matches!(e.expr[*c], MatLang::Leaf(s) if s == leaf);
            if direct || (target.is_some() && child_class == target) {
                return Err(Error::InversePriorUnavailable(format!(
                    "extracted term keeps inv({leaf}) at node {i} after {} iterations ({:?}, {} nodes): {}",
                    sat.report.iterations, sat.report.status, sat.report.nodes, e
                )));
            }
        }
    }
    Ok(())
}
