use egg::Id;

use super::expr::MatExpr;
use super::lang::MatLang;
use crate::error::{dim_err, Error, Result};
use crate::linops::{DenseMatrix, LinearOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dim {
    Fixed(usize),
    InputRows,
}

#[derive(Clone)]
enum Instr {
    Input,
    Scalar(f64),
    Op(LinearOperator),
    Zero(Dim, Dim),
    Mul(usize, usize),
    Add(usize, usize),
    Scale(f64, usize),
    Transpose(usize),
}

enum Val {
    S(f64),
    Op(LinearOperator),
    M(DenseMatrix),
    Z(usize, usize),
}

impl Val {
    fn shape(&self) -> (usize, usize) {
        match self {
            Val::S(_) => (1, 1),
            Val::Op(o) => (o.rows(), o.cols()),
            Val::M(m) => m.shape(),
            Val::Z(r, c) => (*r, *c),
        }
    }
}

/// Straight-line plan for an expression in the input leaf `V`. Subterms
/// that do not involve `V` are folded into operators at compile time, so
/// inverses are realized as solves.
#[derive(Clone)]
pub struct CompiledProgram {
    plan: Vec<Instr>,
    input_cols: usize,
    text: String,
}

impl std::fmt::Debug for CompiledProgram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "CompiledProgram({}, {} steps)",
            self.text,
            self.plan.len()
        )
    }
}

fn as_op(v: &Instr) -> Option<LinearOperator> {
    match v {
        Instr::Op(o) => Some(o.clone()),
        _ => None,
    }
}

impl CompiledProgram {
    pub fn compile(e: &MatExpr) -> Result<Self> {
        e.shape()?;
        let (nominal, input_cols) = e.leaves.input_shape();
        let input = e.leaves.input();
        let nodes = e.expr.as_ref();
        let mut plan: Vec<Instr> = Vec::with_capacity(nodes.len());
        let dim = |n: usize| {
            if n == nominal {
                Dim::InputRows
            } else {
                Dim::Fixed(n)
            }
        };
        for node in nodes {
            let at = |id: &Id| usize::from(*id);
            let instr = match node {
                MatLang::Leaf(s) if *s == input => Instr::Input,
                MatLang::Leaf(s) => {
                    let entry = e
                        .leaves
                        .get(*s)
                        .ok_or_else(|| Error::Parse(format!("unknown leaf {s}")))?;
                    Instr::Op(entry.op.clone().expect("non-input leaf has an operator"))
                }
                MatLang::Num(x) => Instr::Scalar(x.into_inner()),
                MatLang::Eye(n) => Instr::Op(LinearOperator::identity(n.0)),
                MatLang::Zero(z) => Instr::Zero(dim(z.0), dim(z.1)),
                MatLang::SMul([a, b]) | MatLang::SAdd([a, b]) => {
                    let (Instr::Scalar(x), Instr::Scalar(y)) = (&plan[at(a)], &plan[at(b)]) else {
                        return Err(Error::InvalidArgument("scalar op on matrices".into()));
                    };
                    Instr::Scalar(if matches!(node, MatLang::SMul(_)) {
                        x * y
                    } else {
                        x + y
                    })
                }
                MatLang::Inv(a) => match &plan[at(a)] {
                    Instr::Op(o) => Instr::Op(LinearOperator::inverse_of(o)?),
                    _ => {
                        return Err(Error::InvalidArgument(
                            "inverse of an input-dependent term".into(),
                        ))
                    }
                },
                MatLang::Mul([a, b]) => match (as_op(&plan[at(a)]), as_op(&plan[at(b)])) {
                    (Some(x), Some(y)) => Instr::Op(LinearOperator::product(vec![x, y])?),
                    _ => Instr::Mul(at(a), at(b)),
                },
                MatLang::Add([a, b]) => match (as_op(&plan[at(a)]), as_op(&plan[at(b)])) {
                    (Some(x), Some(y)) => Instr::Op(LinearOperator::sum(vec![x, y])?),
                    _ => Instr::Add(at(a), at(b)),
                },
                MatLang::Neg(a) => match as_op(&plan[at(a)]) {
                    Some(x) => Instr::Op(LinearOperator::scaled(&x, -1.0)),
                    None => Instr::Scale(-1.0, at(a)),
                },
                MatLang::Scale([s, a]) => {
                    let Instr::Scalar(alpha) = plan[at(s)] else {
                        return Err(Error::InvalidArgument("scale by a matrix".into()));
                    };
                    match as_op(&plan[at(a)]) {
                        Some(x) => Instr::Op(LinearOperator::scaled(&x, alpha)),
                        None => Instr::Scale(alpha, at(a)),
                    }
                }
                MatLang::Transpose(a) => match as_op(&plan[at(a)]) {
                    Some(x) => Instr::Op(LinearOperator::transpose_of(&x)),
                    None => Instr::Transpose(at(a)),
                },
            };
            plan.push(instr);
        }
        Ok(Self {
            plan,
            input_cols,
            text: e.to_string(),
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn eval(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        if v.cols() != self.input_cols {
            return Err(dim_err("compiled program input", self.input_cols, v.cols()));
        }
        let fix = |d: Dim| match d {
            Dim::Fixed(n) => n,
            Dim::InputRows => v.rows(),
        };
        let mut vals: Vec<Option<Val>> = Vec::with_capacity(self.plan.len());
        for instr in &self.plan {
            let get = |i: usize| vals[i].as_ref().expect("operand evaluated");
            let val = match instr {
                Instr::Input => Val::M(v.clone()),
                Instr::Scalar(x) => Val::S(*x),
                Instr::Op(o) => Val::Op(o.clone()),
                Instr::Zero(r, c) => Val::Z(fix(*r), fix(*c)),
                Instr::Mul(a, b) => mul(get(*a), get(*b))?,
                Instr::Add(a, b) => add(get(*a), get(*b))?,
                Instr::Scale(alpha, a) => match get(*a) {
                    Val::M(m) => Val::M(m.scaled(*alpha)),
                    Val::Z(r, c) => Val::Z(*r, *c),
                    Val::Op(o) => Val::M(o.to_dense()?.scaled(*alpha)),
                    Val::S(x) => Val::S(alpha * x),
                },
                Instr::Transpose(a) => match get(*a) {
                    Val::M(m) => Val::M(m.transpose()),
                    Val::Z(r, c) => Val::Z(*c, *r),
                    Val::Op(o) => Val::Op(LinearOperator::transpose_of(o)),
                    Val::S(x) => Val::S(*x),
                },
            };
            vals.push(Some(val));
        }
        match vals.pop().flatten() {
            Some(Val::M(m)) => Ok(m),
            Some(Val::Z(r, c)) => Ok(DenseMatrix::zeros(r, c)),
            Some(Val::Op(o)) => o.to_dense(),
            _ => Err(Error::InvalidArgument(
                "program evaluates to a scalar".into(),
            )),
        }
    }
}

fn mul(a: &Val, b: &Val) -> Result<Val> {
    let ((r, k1), (k2, c)) = (a.shape(), b.shape());
    if k1 != k2 {
        return Err(dim_err("program mul", k1, k2));
    }
    Ok(match (a, b) {
        (Val::Z(..), _) | (_, Val::Z(..)) => Val::Z(r, c),
        (Val::M(x), Val::Op(o)) => Val::M(o.apply_transpose_mat(&x.transpose())?.transpose()),
        (Val::Op(o), Val::M(x)) => Val::M(o.apply_mat(x)?),
        (Val::M(x), Val::M(y)) => Val::M(x.matmul(y)?),
        (Val::Op(x), Val::Op(y)) => Val::Op(LinearOperator::product(vec![x.clone(), y.clone()])?),
        _ => return Err(Error::InvalidArgument("scalar in matrix product".into())),
    })
}

fn add(a: &Val, b: &Val) -> Result<Val> {
    if a.shape() != b.shape() {
        return Err(dim_err(
            "program add",
            format!("{:?}", a.shape()),
            format!("{:?}", b.shape()),
        ));
    }
    Ok(match (a, b) {
        (Val::Z(..), x) | (x, Val::Z(..)) => match x {
            Val::M(m) => Val::M(m.clone()),
            Val::Op(o) => Val::Op(o.clone()),
            Val::Z(r, c) => Val::Z(*r, *c),
            Val::S(s) => Val::S(*s),
        },
        (Val::M(x), Val::M(y)) => Val::M(x.add(y)?),
        (Val::M(x), Val::Op(o)) | (Val::Op(o), Val::M(x)) => Val::M(x.add(&o.to_dense()?)?),
        (Val::Op(x), Val::Op(y)) => Val::Op(LinearOperator::sum(vec![x.clone(), y.clone()])?),
        _ => return Err(Error::InvalidArgument("scalar in matrix sum".into())),
    })
}
