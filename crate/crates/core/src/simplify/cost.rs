use egg::{CostFunction, Id, Language};

use super::lang::{MatEGraph, MatLang};
use crate::linops::CostClass;

/// Weight applied to the inverse of a class holding a dense leaf.
pub const DENSE_INVERSE_WEIGHT: f64 = 10.0;

/// Extraction cost: estimated flops, then term size as tie-break.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Cost {
    pub flops: f64,
    pub size: usize,
}

/// Dimension-product cost model. Needs the e-graph for class shapes.
pub struct MatCost<'a> {
    egraph: &'a MatEGraph,
}

impl<'a> MatCost<'a> {
    pub fn new(egraph: &'a MatEGraph) -> Self {
        Self { egraph }
    }

    fn shape(&self, id: Id) -> (f64, f64) {
        self.egraph[id]
            .data
            .shape
            .map(|(r, c)| (r as f64, c as f64))
            .unwrap_or((1.0, 1.0))
    }

    fn inverse_cost(&self, child: Id) -> f64 {
        let (n, _) = self.shape(child);
        let class = &self.egraph[child];
        let leaf_class = class.nodes.iter().find_map(|node| match node {
            MatLang::Leaf(s) => self.egraph.analysis.leaves.get(s).map(|l| l.cost_class),
            _ => None,
        });
        match leaf_class {
            _ if class.data.eye => n,
            Some(CostClass::Identity | CostClass::Diagonal) => n,
            Some(CostClass::TriangularSolve) => n * n,
            _ if class.data.dense_leaf => DENSE_INVERSE_WEIGHT * n * n * n,
            _ => n * n * n,
        }
    }
}

impl CostFunction<MatLang> for MatCost<'_> {
    type Cost = Cost;

    fn cost<C>(&mut self, enode: &MatLang, mut costs: C) -> Cost
    where
        C: FnMut(Id) -> Cost,
    {
        let own = match enode {
            MatLang::Mul([a, b]) => {
                let (m, k) = self.shape(*a);
                let (_, n) = self.shape(*b);
                m * k * n
            }
            MatLang::Add([a, _]) => {
                let (m, n) = self.shape(*a);
                m * n
            }
            MatLang::Neg(a) | MatLang::Transpose(a) | MatLang::Scale([_, a]) => {
                let (m, n) = self.shape(*a);
                m * n
            }
            MatLang::Inv(a) => self.inverse_cost(*a),
            MatLang::SMul(_) | MatLang::SAdd(_) => 1.0,
            MatLang::Num(_) | MatLang::Eye(_) | MatLang::Zero(_) | MatLang::Leaf(_) => 1.0,
        };
        enode.fold(
            Cost {
                flops: own,
                size: 1,
            },
            |acc, id| {
                let c = costs(id);
                Cost {
                    flops: acc.flops + c.flops,
                    size: acc.size + c.size,
                }
            },
        )
    }
}
