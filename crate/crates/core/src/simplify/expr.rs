use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use egg::{Id, RecExpr, Symbol};

use super::lang::{node_shape, LeafInfo, MatLang};
use crate::error::{dim_err, Error, Result};
use crate::linops::{dense_inverse, CostClass, DenseMatrix, LinearOperator};

/// Name of the reserved input leaf.
pub const INPUT_LEAF: &str = "V";

#[derive(Clone)]
pub struct LeafEntry {
    pub symbol: Symbol,
    pub info: LeafInfo,
    /// `None` for the input hole.
    pub op: Option<LinearOperator>,
}

/// Symbols for the operators appearing in an expression, keyed by
/// operator identity so that repeated uses share one leaf.
#[derive(Clone)]
pub struct LeafTable {
    entries: Vec<LeafEntry>,
    by_symbol: HashMap<Symbol, usize>,
    by_address: HashMap<usize, usize>,
    input: Symbol,
}

fn sanitize(raw: &str) -> String {
    let mut s: String = raw
        .chars()
        .map(|c| {
            if c.is_whitespace() || c == '(' || c == ')' {
                '_'
            } else {
                c
            }
        })
        .collect();
    if s.is_empty()
        || s.parse::<f64>().is_ok()
        || s.starts_with("eye:")
        || s.starts_with("zero:")
        || s.starts_with('?')
        || [
            "mul", "add", "neg", "scale", "t", "inv", "smul", "sadd", INPUT_LEAF,
        ]
        .contains(&s.as_str())
    {
        s = format!("op_{s}");
    }
    s
}

impl LeafTable {
    /// Table holding only the input leaf `V` of shape `v_rows × v_cols`.
    pub fn new(v_rows: usize, v_cols: usize) -> Self {
        let input = Symbol::from(INPUT_LEAF);
        let mut t = Self {
            entries: Vec::new(),
            by_symbol: HashMap::new(),
            by_address: HashMap::new(),
            input,
        };
        t.by_symbol.insert(input, 0);
        t.entries.push(LeafEntry {
            symbol: input,
            info: LeafInfo {
                rows: v_rows,
                cols: v_cols,
                cost_class: CostClass::DenseMatvec,
            },
            op: None,
        });
        t
    }

    pub fn input(&self) -> Symbol {
        self.input
    }

    pub fn input_shape(&self) -> (usize, usize) {
        let i = &self.entries[0].info;
        (i.rows, i.cols)
    }

    /// Registers `op` (idempotent) and returns its symbol.
    pub fn intern(&mut self, op: &LinearOperator) -> Symbol {
        if let Some(&i) = self.by_address.get(&op.address()) {
            return self.entries[i].symbol;
        }
        let base = sanitize(op.name());
        let mut name = base.clone();
        let mut k = 2;
        while self.by_symbol.contains_key(&Symbol::from(name.as_str())) {
            name = format!("{base}_{k}");
            k += 1;
        }
        let symbol = Symbol::from(name.as_str());
        let idx = self.entries.len();
        self.entries.push(LeafEntry {
            symbol,
            info: LeafInfo {
                rows: op.rows(),
                cols: op.cols(),
                cost_class: op.cost_class(),
            },
            op: Some(op.clone()),
        });
        self.by_symbol.insert(symbol, idx);
        self.by_address.insert(op.address(), idx);
        symbol
    }

    pub fn symbol_of(&self, op: &LinearOperator) -> Option<Symbol> {
        self.by_address
            .get(&op.address())
            .map(|&i| self.entries[i].symbol)
    }

    pub fn get(&self, s: Symbol) -> Option<&LeafEntry> {
        self.by_symbol.get(&s).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[LeafEntry] {
        &self.entries
    }

    pub fn infos(&self) -> HashMap<Symbol, LeafInfo> {
        self.entries.iter().map(|e| (e.symbol, e.info)).collect()
    }

    /// Nominal row count for `V` that differs from every operator dimension,
    /// so `V`-dependent zero blocks can be recognised after compilation.
    pub fn distinct_nominal_rows(&self, start: usize) -> usize {
        let mut r = start.max(1);
        while self
            .entries
            .iter()
            .skip(1)
            .any(|e| e.info.rows == r || e.info.cols == r)
        {
            r += 1;
        }
        r
    }

    pub(crate) fn set_input_rows(&mut self, rows: usize) {
        self.entries[0].info.rows = rows;
    }
}

/// A matrix expression over the leaves of a [`LeafTable`].
#[derive(Clone)]
pub struct MatExpr {
    pub(crate) expr: RecExpr<MatLang>,
    pub(crate) leaves: Arc<LeafTable>,
}

impl fmt::Display for MatExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)
    }
}

impl fmt::Debug for MatExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatExpr({})", self.expr)
    }
}

impl MatExpr {
    pub fn new(expr: RecExpr<MatLang>, leaves: Arc<LeafTable>) -> Result<Self> {
        let e = Self { expr, leaves };
        e.shape()?;
        Ok(e)
    }

    /// Parses the textual form against an existing leaf table.
    pub fn parse(text: &str, leaves: Arc<LeafTable>) -> Result<Self> {
        let expr: RecExpr<MatLang> = text.parse().map_err(|e| Error::Parse(format!("{e}")))?;
        for node in expr.as_ref() {
            if let MatLang::Leaf(s) = node {
                if leaves.get(*s).is_none() {
                    return Err(Error::Parse(format!("unknown leaf {s}")));
                }
            }
        }
        Self::new(expr, leaves)
    }

    pub fn rec_expr(&self) -> &RecExpr<MatLang> {
        &self.expr
    }

    pub fn leaves(&self) -> &Arc<LeafTable> {
        &self.leaves
    }

    pub fn size(&self) -> usize {
        self.expr.as_ref().len()
    }

    pub fn root(&self) -> Id {
        Id::from(self.expr.as_ref().len() - 1)
    }

    /// Per-node shapes with dimension checks; `None` marks scalar nodes.
    pub fn shapes(&self) -> Result<Vec<Option<(usize, usize)>>> {
        let infos = self.leaves.infos();
        let mut shapes: Vec<Option<(usize, usize)>> = Vec::with_capacity(self.size());
        for node in self.expr.as_ref() {
            let child = |id: Id| shapes[usize::from(id)];
            match node {
                MatLang::Mul([a, b]) => {
                    let (sa, sb) = (child(*a), child(*b));
                    match (sa, sb) {
                        (Some((_, k1)), Some((k2, _))) if k1 != k2 => {
                            return Err(dim_err("mul", k1, k2));
                        }
                        (Some(_), Some(_)) => {}
                        _ => return Err(dim_err("mul", "matrix operands", "scalar")),
                    }
                }
                MatLang::Add([a, b]) => {
                    if child(*a) != child(*b) {
                        return Err(dim_err(
                            "add",
                            format!("{:?}", child(*a)),
                            format!("{:?}", child(*b)),
                        ));
                    }
                }
                MatLang::Inv(a) => match child(*a) {
                    Some((r, c)) if r == c => {}
                    other => return Err(dim_err("inv", "square operand", format!("{other:?}"))),
                },
                MatLang::Scale([s, a]) => {
                    if child(*s).is_some() || child(*a).is_none() {
                        return Err(dim_err("scale", "(scalar, matrix)", "other"));
                    }
                }
                MatLang::Leaf(s) if !infos.contains_key(s) => {
                    return Err(Error::Parse(format!("unknown leaf {s}")));
                }
                _ => {}
            }
            let shape = node_shape(node, &infos, child);
            shapes.push(shape);
        }
        Ok(shapes)
    }

    pub fn shape(&self) -> Result<(usize, usize)> {
        self.shapes()?
            .last()
            .copied()
            .flatten()
            .ok_or_else(|| Error::InvalidArgument("expression is scalar".into()))
    }

    /// Whether any `inv` node applies to the given leaf.
    pub fn contains_inverse_of(&self, leaf: Symbol) -> bool {
        let nodes = self.expr.as_ref();
        nodes.iter().any(|n| match n {
            MatLang::Inv(c) => matches!(nodes[usize::from(*c)], MatLang::Leaf(s) if s == leaf),
            _ => false,
        })
    }

    pub fn count_inverses(&self) -> usize {
        self.expr
            .as_ref()
            .iter()
            .filter(|n| matches!(n, MatLang::Inv(_)))
            .count()
    }

    /// Dense reference evaluation with inverses formed explicitly. The
    /// input leaf takes the value `v`; zero nodes with the nominal input row
    /// count take `v`'s row count.
    pub fn eval_dense(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        let (nominal, _) = self.leaves.input_shape();
        let mut vals: Vec<Dv> = Vec::with_capacity(self.size());
        for node in self.expr.as_ref() {
            let get = |id: Id| &vals[usize::from(id)];
            let val = match node {
                MatLang::Num(x) => Dv::S(x.into_inner()),
                MatLang::SMul([a, b]) => Dv::S(get(*a).scalar()? * get(*b).scalar()?),
                MatLang::SAdd([a, b]) => Dv::S(get(*a).scalar()? + get(*b).scalar()?),
                MatLang::Eye(e) => Dv::M(DenseMatrix::identity(e.0)),
                MatLang::Zero(z) => {
                    let fix = |n: usize| if n == nominal { v.rows() } else { n };
                    Dv::M(DenseMatrix::zeros(fix(z.0), fix(z.1)))
                }
                MatLang::Leaf(s) => {
                    let entry = self
                        .leaves
                        .get(*s)
                        .ok_or_else(|| Error::Parse(format!("unknown leaf {s}")))?;
                    match &entry.op {
                        None => Dv::M(v.clone()),
                        Some(op) => Dv::M(op.to_dense()?),
                    }
                }
                MatLang::Mul([a, b]) => Dv::M(get(*a).mat()?.matmul(get(*b).mat()?)?),
                MatLang::Add([a, b]) => Dv::M(get(*a).mat()?.add(get(*b).mat()?)?),
                MatLang::Neg(a) => Dv::M(get(*a).mat()?.scaled(-1.0)),
                MatLang::Scale([s, a]) => Dv::M(get(*a).mat()?.scaled(get(*s).scalar()?)),
                MatLang::Transpose(a) => Dv::M(get(*a).mat()?.transpose()),
                MatLang::Inv(a) => Dv::M(dense_inverse(get(*a).mat()?)?),
            };
            vals.push(val);
        }
        vals.pop()
            .ok_or_else(|| Error::InvalidArgument("empty expression".into()))?
            .into_mat()
    }
}

enum Dv {
    S(f64),
    M(DenseMatrix),
}

impl Dv {
    fn scalar(&self) -> Result<f64> {
        match self {
            Dv::S(x) => Ok(*x),
            Dv::M(_) => Err(Error::InvalidArgument("expected scalar".into())),
        }
    }

    fn mat(&self) -> Result<&DenseMatrix> {
        match self {
            Dv::M(m) => Ok(m),
            Dv::S(_) => Err(Error::InvalidArgument("expected matrix".into())),
        }
    }

    fn into_mat(self) -> Result<DenseMatrix> {
        match self {
            Dv::M(m) => Ok(m),
            Dv::S(_) => Err(Error::InvalidArgument("expected matrix".into())),
        }
    }
}
