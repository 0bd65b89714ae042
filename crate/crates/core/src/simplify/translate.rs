use std::sync::Arc;

use egg::{Id, RecExpr, Symbol};
use ordered_float::OrderedFloat;

use super::expr::{LeafTable, MatExpr};
use super::lang::{EyeDim, MatLang};
use crate::error::{dim_err, Error, Result};
use crate::linops::{LinearOperator, OpKind};
use crate::tracer::{AffineGraph, NodeKind};

pub(crate) struct Builder<'t> {
    pub expr: RecExpr<MatLang>,
    pub table: &'t mut LeafTable,
}

impl<'t> Builder<'t> {
    pub fn new(table: &'t mut LeafTable) -> Self {
        Self {
            expr: RecExpr::default(),
            table,
        }
    }

    pub fn add(&mut self, node: MatLang) -> Id {
        self.expr.add(node)
    }

    pub fn leaf(&mut self, s: Symbol) -> Id {
        self.add(MatLang::Leaf(s))
    }

    pub fn num(&mut self, x: f64) -> Id {
        self.add(MatLang::Num(OrderedFloat(x)))
    }

    /// Structural translation of an operator: composite kinds become
    /// expression nodes, everything else a leaf.
    pub fn operator(&mut self, op: &LinearOperator) -> Id {
        match op.kind() {
            OpKind::Identity => self.add(MatLang::Eye(EyeDim(op.rows()))),
            OpKind::InverseOf(base) => {
                let b = self.operator(base);
                self.add(MatLang::Inv(b))
            }
            OpKind::Scaled(base, alpha) => {
                let b = self.operator(base);
                if *alpha == -1.0 {
                    self.add(MatLang::Neg(b))
                } else {
                    let s = self.num(*alpha);
                    self.add(MatLang::Scale([s, b]))
                }
            }
            OpKind::Sum(terms) => {
                let mut acc = self.operator(&terms[0]);
                for t in &terms[1..] {
                    let x = self.operator(t);
                    acc = self.add(MatLang::Add([acc, x]));
                }
                acc
            }
            OpKind::Product(factors) => {
                let mut acc = self.operator(&factors[0]);
                for f in &factors[1..] {
                    let x = self.operator(f);
                    acc = self.add(MatLang::Mul([acc, x]));
                }
                acc
            }
            OpKind::TransposeOf(base) => {
                let b = self.operator(base);
                self.add(MatLang::Transpose(b))
            }
            OpKind::Dense(_)
            | OpKind::DiagonalOf { .. }
            | OpKind::LowerTriOf { .. }
            | OpKind::UpperTriOf { .. }
            | OpKind::Graph(_) => {
                let s = self.table.intern(op);
                self.leaf(s)
            }
        }
    }
}

/// Expression for the matrix `G` of a linear graph; `None` for identity.
fn graph_matrix(b: &mut Builder<'_>, g: &AffineGraph) -> Result<Option<Id>> {
    // `None` stands for the graph input (identity so far).
    let mut slots: Vec<Option<Id>> = Vec::with_capacity(g.len());
    let eye = |b: &mut Builder<'_>, n: usize| b.add(MatLang::Eye(EyeDim(n)));
    for node in g.nodes() {
        let get = |slots: &Vec<Option<Id>>, id: usize| slots[id];
        let value = match &node.kind {
            NodeKind::Input => None,
            NodeKind::Linear { op, parent } => {
                let o = b.operator(op);
                match get(&slots, *parent) {
                    None => Some(o),
                    Some(p) => Some(b.add(MatLang::Mul([o, p]))),
                }
            }
            NodeKind::Scale { alpha, parent } => {
                let p = match get(&slots, *parent) {
                    Some(p) => p,
                    None => eye(b, node.dim),
                };
                if *alpha == -1.0 {
                    Some(b.add(MatLang::Neg(p)))
                } else {
                    let s = b.num(*alpha);
                    Some(b.add(MatLang::Scale([s, p])))
                }
            }
            NodeKind::Negate { parent } => {
                let p = match get(&slots, *parent) {
                    Some(p) => p,
                    None => eye(b, node.dim),
                };
                Some(b.add(MatLang::Neg(p)))
            }
            NodeKind::Add { left, right } => {
                let l = match get(&slots, *left) {
                    Some(p) => p,
                    None => eye(b, node.dim),
                };
                let r = match get(&slots, *right) {
                    Some(p) => p,
                    None => eye(b, node.dim),
                };
                Some(b.add(MatLang::Add([l, r])))
            }
            NodeKind::Shift { .. } => return Err(Error::ShiftInLinearGraph),
        };
        slots.push(value);
    }
    Ok(slots[g.output_id()])
}

/// Translates a linear graph into an expression for `V·G`. `v_rows` is the
/// nominal row count of `V` used by the cost model.
pub fn graph_to_expr(g: &AffineGraph, v_rows: usize) -> Result<MatExpr> {
    let mut table = LeafTable::new(v_rows, g.output_dim());
    let expr = {
        let mut b = Builder::new(&mut table);
        let v = b.leaf(b.table.input());
        let gm = graph_matrix(&mut b, g)?;
        let gm = match gm {
            Some(id) => id,
            None => b.add(MatLang::Eye(EyeDim(g.input_dim()))),
        };
        b.add(MatLang::Mul([v, gm]));
        b.expr
    };
    let nominal = table.distinct_nominal_rows(v_rows);
    table.set_input_rows(nominal);
    MatExpr::new(expr, Arc::new(table))
}

/// `V·G·A⁻¹ − V·A⁻¹` for an expression `vg` denoting `V·G`.
pub fn build_cancellation_expr(vg: &MatExpr, a: &LinearOperator) -> Result<MatExpr> {
    let (_, cols) = vg.shape()?;
    if !a.is_square() || a.rows() != cols {
        return Err(dim_err(
            "build_cancellation_expr",
            cols,
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    let mut table = (*vg.leaves).clone();
    let (v_rows, _) = table.input_shape();
    let mut expr = vg.expr.clone();
    // Re-adding the nominal row count keeps it distinct from A's size.
    let a_sym = table.intern(a);
    let nominal = table.distinct_nominal_rows(v_rows);
    table.set_input_rows(nominal);
    let root = Id::from(expr.as_ref().len() - 1);
    let a_leaf = expr.add(MatLang::Leaf(a_sym));
    let a_inv = expr.add(MatLang::Inv(a_leaf));
    let left = expr.add(MatLang::Mul([root, a_inv]));
    let v = expr.add(MatLang::Leaf(table.input()));
    let right = expr.add(MatLang::Mul([v, a_inv]));
    let neg = expr.add(MatLang::Neg(right));
    expr.add(MatLang::Add([left, neg]));
    MatExpr::new(expr, Arc::new(table))
}
