use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use egg::{define_language, Analysis, DidMerge, EGraph, Id, Symbol};
use ordered_float::OrderedFloat;

use crate::linops::CostClass;

/// `eye:n`, the n×n identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EyeDim(pub usize);

/// `zero:rxc`, the r×c zero matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ZeroDim(pub usize, pub usize);

impl FromStr for EyeDim {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        s.strip_prefix("eye:")
            .and_then(|n| n.parse().ok())
            .map(EyeDim)
            .ok_or(())
    }
}

impl fmt::Display for EyeDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "eye:{}", self.0)
    }
}

impl FromStr for ZeroDim {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        let body = s.strip_prefix("zero:").ok_or(())?;
        let (r, c) = body.split_once('x').ok_or(())?;
        Ok(ZeroDim(
            r.parse().map_err(|_| ())?,
            c.parse().map_err(|_| ())?,
        ))
    }
}

impl fmt::Display for ZeroDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "zero:{}x{}", self.0, self.1)
    }
}

define_language! {
    /// Matrix expressions. `scale` takes a scalar class first; `smul` and
    /// `sadd` are scalar arithmetic used by constant folding.
    pub enum MatLang {
        "mul" = Mul([Id; 2]),
        "add" = Add([Id; 2]),
        "neg" = Neg(Id),
        "scale" = Scale([Id; 2]),
        "t" = Transpose(Id),
        "inv" = Inv(Id),
        "smul" = SMul([Id; 2]),
        "sadd" = SAdd([Id; 2]),
        Num(OrderedFloat<f64>),
        Eye(EyeDim),
        Zero(ZeroDim),
        Leaf(Symbol),
    }
}

/// Static facts about a leaf symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafInfo {
    pub rows: usize,
    pub cols: usize,
    pub cost_class: CostClass,
}

/// Per-class facts: matrix shape (None for scalars), folded constant,
/// identity/zero membership, and whether a dense leaf lives in the class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassData {
    pub shape: Option<(usize, usize)>,
    pub konst: Option<f64>,
    pub eye: bool,
    pub zero: bool,
    pub dense_leaf: bool,
}

#[derive(Debug, Clone, Default)]
pub struct MatAnalysis {
    pub leaves: HashMap<Symbol, LeafInfo>,
}

impl MatAnalysis {
    pub fn new(leaves: HashMap<Symbol, LeafInfo>) -> Self {
        Self { leaves }
    }
}

pub type MatEGraph = EGraph<MatLang, MatAnalysis>;

/// Shape of an e-node given child shapes; `None` marks scalars.
pub(crate) fn node_shape(
    node: &MatLang,
    leaves: &HashMap<Symbol, LeafInfo>,
    child: impl Fn(Id) -> Option<(usize, usize)>,
) -> Option<(usize, usize)> {
    match node {
        MatLang::Mul([a, b]) => match (child(*a), child(*b)) {
            (Some((r, _)), Some((_, c))) => Some((r, c)),
            _ => None,
        },
        MatLang::Add([a, b]) => child(*a).or_else(|| child(*b)),
        MatLang::Neg(a) | MatLang::Inv(a) => child(*a),
        MatLang::Scale([_, a]) => child(*a),
        MatLang::Transpose(a) => child(*a).map(|(r, c)| (c, r)),
        MatLang::SMul(_) | MatLang::SAdd(_) | MatLang::Num(_) => None,
        MatLang::Eye(EyeDim(n)) => Some((*n, *n)),
        MatLang::Zero(ZeroDim(r, c)) => Some((*r, *c)),
        MatLang::Leaf(s) => leaves.get(s).map(|l| (l.rows, l.cols)),
    }
}

impl Analysis<MatLang> for MatAnalysis {
    type Data = ClassData;

    fn make(egraph: &mut MatEGraph, enode: &MatLang, _id: Id) -> ClassData {
        let data = |id: Id| &egraph[id].data;
        let shape = node_shape(enode, &egraph.analysis.leaves, |id| data(id).shape);
        let konst = match enode {
            MatLang::Num(v) => Some(v.into_inner()),
            MatLang::SMul([a, b]) => data(*a).konst.zip(data(*b).konst).map(|(x, y)| x * y),
            MatLang::SAdd([a, b]) => data(*a).konst.zip(data(*b).konst).map(|(x, y)| x + y),
            _ => None,
        };
        let dense_leaf = match enode {
            MatLang::Leaf(s) => egraph.analysis.leaves.get(s).is_some_and(|l| {
                matches!(l.cost_class, CostClass::DenseMatvec | CostClass::DenseSolve)
            }),
            _ => false,
        };
        ClassData {
            shape,
            konst,
            eye: matches!(enode, MatLang::Eye(_)),
            zero: matches!(enode, MatLang::Zero(_)),
            dense_leaf,
        }
    }

    fn merge(&mut self, a: &mut ClassData, b: ClassData) -> DidMerge {
        let mut to_a = false;
        let mut to_b = false;
        match (a.shape, b.shape) {
            (None, Some(_)) => {
                a.shape = b.shape;
                to_a = true;
            }
            (Some(_), None) => to_b = true,
            (Some(x), Some(y)) => debug_assert_eq!(x, y, "merged classes of different shape"),
            (None, None) => {}
        }
        match (a.konst, b.konst) {
            (None, Some(_)) => {
                a.konst = b.konst;
                to_a = true;
            }
            (Some(_), None) => to_b = true,
            _ => {}
        }
        for (x, y) in [
            (&mut a.eye, b.eye),
            (&mut a.zero, b.zero),
            (&mut a.dense_leaf, b.dense_leaf),
        ] {
            if y && !*x {
                *x = true;
                to_a = true;
            }
            if *x && !y {
                to_b = true;
            }
        }
        DidMerge(to_a, to_b)
    }

    fn modify(egraph: &mut MatEGraph, id: Id) {
        if let Some(c) = egraph[id].data.konst {
            let num = egraph.add(MatLang::Num(OrderedFloat(c)));
            egraph.union(id, num);
        }
    }
}

/// Checks that every e-node agrees with its class shape.
pub fn check_dimensions(egraph: &MatEGraph) -> Result<(), String> {
    for class in egraph.classes() {
        for node in &class.nodes {
            let got = node_shape(node, &egraph.analysis.leaves, |id| egraph[id].data.shape);
            if got != class.data.shape {
                return Err(format!(
                    "class {} has shape {:?} but node {} gives {:?}",
                    class.id, class.data.shape, node, got
                ));
            }
            if let MatLang::Mul([a, b]) = node {
                let (sa, sb) = (egraph[*a].data.shape, egraph[*b].data.shape);
                if let (Some((_, k1)), Some((k2, _))) = (sa, sb) {
                    if k1 != k2 {
                        return Err(format!("inner dimension mismatch in {node}"));
                    }
                }
            }
            if let MatLang::Add([a, b]) = node {
                if egraph[*a].data.shape != egraph[*b].data.shape {
                    return Err(format!("shape mismatch in {node}"));
                }
            }
            if let MatLang::Inv(a) = node {
                if let Some((r, c)) = egraph[*a].data.shape {
                    if r != c {
                        return Err(format!("inverse of non-square class in {node}"));
                    }
                }
            }
        }
    }
    Ok(())
}
