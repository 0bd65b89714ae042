use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::covgraph;
use crate::error::{dim_err, Error, Result};
use crate::linops::dense::{LuFactors, PIVOT_TOL};
use crate::linops::matrix::{gemm, MatView};
use crate::linops::{DenseMatrix, Vector};
use crate::tracer::AffineGraph;

/// Coarse complexity tag consumed by the simplifier's cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostClass {
    Identity,
    Diagonal,
    TriangularSolve,
    DenseMatvec,
    DenseSolve,
    Transfer,
    CoarseSolve,
    Composite,
}

impl CostClass {
    pub fn as_str(self) -> &'static str {
        match self {
            CostClass::Identity => "identity",
            CostClass::Diagonal => "diagonal",
            CostClass::TriangularSolve => "triangular-solve",
            CostClass::DenseMatvec => "dense-matvec",
            CostClass::DenseSolve => "dense-solve",
            CostClass::Transfer => "transfer",
            CostClass::CoarseSolve => "coarse-solve",
            CostClass::Composite => "composite",
        }
    }
}

/// The operator variants. Structured views keep a handle on the full base
/// entries and touch only the relevant triangle.
pub enum OpKind {
    Identity,
    Dense(Arc<DenseMatrix>),
    DiagonalOf {
        base: LinearOperator,
        diag: Vec<f64>,
    },
    LowerTriOf {
        base: LinearOperator,
        strict: bool,
        entries: Arc<DenseMatrix>,
    },
    UpperTriOf {
        base: LinearOperator,
        strict: bool,
        entries: Arc<DenseMatrix>,
    },
    InverseOf(LinearOperator),
    Scaled(LinearOperator, f64),
    Sum(Vec<LinearOperator>),
    Product(Vec<LinearOperator>),
    TransposeOf(LinearOperator),
    /// Linear traced graph used as an operator (nested multigrid cycles).
    Graph(Arc<AffineGraph>),
}

struct OpNode {
    name: String,
    rows: usize,
    cols: usize,
    cost_class: CostClass,
    kind: OpKind,
    lu: OnceLock<std::result::Result<LuFactors, Error>>,
}

/// Shared, immutable linear operator. Clones are cheap and keep identity,
/// which the simplifier uses to recognise repeated leaves.
#[derive(Clone)]
pub struct LinearOperator(Arc<OpNode>);

impl fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}x{}]", self.0.name, self.0.rows, self.0.cols)
    }
}

impl LinearOperator {
    fn make(name: String, rows: usize, cols: usize, cost_class: CostClass, kind: OpKind) -> Self {
        Self(Arc::new(OpNode {
            name,
            rows,
            cols,
            cost_class,
            kind,
            lu: OnceLock::new(),
        }))
    }

    pub fn identity(n: usize) -> Self {
        Self::make(format!("I{n}"), n, n, CostClass::Identity, OpKind::Identity)
    }

    pub fn dense(name: impl Into<String>, m: DenseMatrix) -> Self {
        Self::dense_with_class(name, m, CostClass::DenseMatvec)
    }

    pub fn dense_with_class(name: impl Into<String>, m: DenseMatrix, class: CostClass) -> Self {
        let (r, c) = m.shape();
        Self::make(name.into(), r, c, class, OpKind::Dense(Arc::new(m)))
    }

    fn base_entries(base: &LinearOperator, what: &'static str) -> Result<Arc<DenseMatrix>> {
        if !base.is_square() {
            return Err(dim_err(
                what,
                "square base",
                format!("{}x{}", base.rows(), base.cols()),
            ));
        }
        Ok(match &base.0.kind {
            OpKind::Dense(m) => m.clone(),
            _ => Arc::new(base.to_dense()?),
        })
    }

    pub fn diagonal_of(base: &LinearOperator) -> Result<Self> {
        let entries = Self::base_entries(base, "DiagonalOf")?;
        let n = base.rows();
        Ok(Self::make(
            format!("D_{}", base.name()),
            n,
            n,
            CostClass::Diagonal,
            OpKind::DiagonalOf {
                base: base.clone(),
                diag: entries.diagonal(),
            },
        ))
    }

    /// Lower triangle of `base`; `strict` excludes the diagonal.
    pub fn lower_tri_of(base: &LinearOperator, strict: bool) -> Result<Self> {
        let entries = Self::base_entries(base, "LowerTriOf")?;
        let n = base.rows();
        let name = if strict {
            format!("Ls_{}", base.name())
        } else {
            format!("L_{}", base.name())
        };
        Ok(Self::make(
            name,
            n,
            n,
            CostClass::TriangularSolve,
            OpKind::LowerTriOf {
                base: base.clone(),
                strict,
                entries,
            },
        ))
    }

    /// Upper triangle of `base`; `strict` excludes the diagonal.
    pub fn upper_tri_of(base: &LinearOperator, strict: bool) -> Result<Self> {
        let entries = Self::base_entries(base, "UpperTriOf")?;
        let n = base.rows();
        let name = if strict {
            format!("U_{}", base.name())
        } else {
            format!("Ud_{}", base.name())
        };
        Ok(Self::make(
            name,
            n,
            n,
            CostClass::TriangularSolve,
            OpKind::UpperTriOf {
                base: base.clone(),
                strict,
                entries,
            },
        ))
    }

    /// Lazy inverse. Triangular and diagonal bases are checked for zero
    /// pivots here; general bases are factorized on first use.
    pub fn inverse_of(base: &LinearOperator) -> Result<Self> {
        if !base.is_square() {
            return Err(dim_err(
                "InverseOf",
                "square base",
                format!("{}x{}", base.rows(), base.cols()),
            ));
        }
        let class = match &base.0.kind {
            OpKind::Identity => CostClass::Identity,
            OpKind::DiagonalOf { diag, .. } => {
                check_pivots(base, diag.iter().copied(), base.name())?;
                CostClass::Diagonal
            }
            OpKind::LowerTriOf {
                strict, entries, ..
            }
            | OpKind::UpperTriOf {
                strict, entries, ..
            } => {
                if *strict {
                    return Err(Error::Singular {
                        name: base.name().to_string(),
                        pivot: 0.0,
                        tol: PIVOT_TOL,
                    });
                }
                check_pivots(base, entries.diagonal().into_iter(), base.name())?;
                CostClass::TriangularSolve
            }
            OpKind::Dense(_) if base.cost_class() == CostClass::CoarseSolve => {
                CostClass::CoarseSolve
            }
            OpKind::Dense(_) => CostClass::DenseSolve,
            _ => CostClass::Composite,
        };
        let n = base.rows();
        Ok(Self::make(
            format!("inv({})", base.name()),
            n,
            n,
            class,
            OpKind::InverseOf(base.clone()),
        ))
    }

    pub fn scaled(base: &LinearOperator, alpha: f64) -> Self {
        Self::make(
            format!("{alpha}*{}", base.name()),
            base.rows(),
            base.cols(),
            base.cost_class(),
            OpKind::Scaled(base.clone(), alpha),
        )
    }

    pub fn sum(terms: Vec<LinearOperator>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty operator sum".into()))?;
        let (r, c) = (first.rows(), first.cols());
        for t in &terms {
            if t.rows() != r || t.cols() != c {
                return Err(dim_err(
                    "Sum",
                    format!("{r}x{c}"),
                    format!("{}x{}", t.rows(), t.cols()),
                ));
            }
        }
        let name = terms
            .iter()
            .map(|t| t.name().to_string())
            .collect::<Vec<_>>()
            .join("+");
        Ok(Self::make(
            format!("({name})"),
            r,
            c,
            CostClass::Composite,
            OpKind::Sum(terms),
        ))
    }

    /// `Product([B, C])` acts as `B·C`.
    pub fn product(factors: Vec<LinearOperator>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("empty operator product".into()));
        }
        for w in factors.windows(2) {
            if w[0].cols() != w[1].rows() {
                return Err(dim_err("Product", w[0].cols(), w[1].rows()));
            }
        }
        let rows = factors[0].rows();
        let cols = factors[factors.len() - 1].cols();
        let name = factors
            .iter()
            .map(|t| t.name().to_string())
            .collect::<Vec<_>>()
            .join("*");
        Ok(Self::make(
            name,
            rows,
            cols,
            CostClass::Composite,
            OpKind::Product(factors),
        ))
    }

    pub fn transpose_of(base: &LinearOperator) -> Self {
        Self::make(
            format!("{}^T", base.name()),
            base.cols(),
            base.rows(),
            base.cost_class(),
            OpKind::TransposeOf(base.clone()),
        )
    }

    /// Wraps a linear traced graph. Fails if the graph still has shifts.
    pub fn from_graph(
        name: impl Into<String>,
        graph: AffineGraph,
        class: CostClass,
    ) -> Result<Self> {
        if !graph.is_linear() {
            return Err(Error::ShiftInLinearGraph);
        }
        let (r, c) = (graph.output_dim(), graph.input_dim());
        Ok(Self::make(
            name.into(),
            r,
            c,
            class,
            OpKind::Graph(Arc::new(graph)),
        ))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn rows(&self) -> usize {
        self.0.rows
    }

    pub fn cols(&self) -> usize {
        self.0.cols
    }

    pub fn is_square(&self) -> bool {
        self.0.rows == self.0.cols
    }

    pub fn cost_class(&self) -> CostClass {
        self.0.cost_class
    }

    pub fn kind(&self) -> &OpKind {
        &self.0.kind
    }

    /// Identity comparison (same allocation).
    pub fn same(&self, other: &LinearOperator) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Stable address used as a hash key for leaf tables.
    pub fn address(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn apply(&self, v: &Vector) -> Result<Vector> {
        if v.len() != self.cols() {
            return Err(dim_err("apply", self.cols(), v.len()));
        }
        Ok(Vector::from(
            self.apply_mat(&DenseMatrix::column(v))?.into_data(),
        ))
    }

    pub fn apply_transpose(&self, v: &Vector) -> Result<Vector> {
        if v.len() != self.rows() {
            return Err(dim_err("apply_transpose", self.rows(), v.len()));
        }
        Ok(Vector::from(
            self.apply_transpose_mat(&DenseMatrix::column(v))?
                .into_data(),
        ))
    }

    /// `self · X` for a block of column vectors.
    pub fn apply_mat(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.cols() {
            return Err(dim_err("apply", self.cols(), x.rows()));
        }
        match &self.0.kind {
            OpKind::Identity => Ok(x.clone()),
            OpKind::Dense(m) => m.matmul(x),
            OpKind::DiagonalOf { diag, .. } => Ok(scale_rows(x, diag, false)),
            OpKind::LowerTriOf {
                strict, entries, ..
            } => Ok(lower_mul(entries, *strict, x)),
            OpKind::UpperTriOf {
                strict, entries, ..
            } => Ok(upper_mul(entries, *strict, x)),
            OpKind::InverseOf(base) => base.solve_mat(x),
            OpKind::Scaled(base, alpha) => Ok(base.apply_mat(x)?.scaled(*alpha)),
            OpKind::Sum(terms) => {
                let mut acc = terms[0].apply_mat(x)?;
                for t in &terms[1..] {
                    acc.add_scaled(1.0, &t.apply_mat(x)?)?;
                }
                Ok(acc)
            }
            OpKind::Product(factors) => {
                let mut acc = x.clone();
                for f in factors.iter().rev() {
                    acc = f.apply_mat(&acc)?;
                }
                Ok(acc)
            }
            OpKind::TransposeOf(base) => base.apply_transpose_mat(x),
            OpKind::Graph(g) => covgraph::forward_matmat(g, x),
        }
    }

    /// `selfᵀ · X`.
    pub fn apply_transpose_mat(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.rows() {
            return Err(dim_err("apply_transpose", self.rows(), x.rows()));
        }
        match &self.0.kind {
            OpKind::Identity => Ok(x.clone()),
            OpKind::Dense(m) => m.tr_matmul(x),
            OpKind::DiagonalOf { diag, .. } => Ok(scale_rows(x, diag, false)),
            OpKind::LowerTriOf {
                strict, entries, ..
            } => Ok(lower_tr_mul(entries, *strict, x)),
            OpKind::UpperTriOf {
                strict, entries, ..
            } => Ok(upper_tr_mul(entries, *strict, x)),
            OpKind::InverseOf(base) => base.solve_transpose_mat(x),
            OpKind::Scaled(base, alpha) => Ok(base.apply_transpose_mat(x)?.scaled(*alpha)),
            OpKind::Sum(terms) => {
                let mut acc = terms[0].apply_transpose_mat(x)?;
                for t in &terms[1..] {
                    acc.add_scaled(1.0, &t.apply_transpose_mat(x)?)?;
                }
                Ok(acc)
            }
            OpKind::Product(factors) => {
                let mut acc = x.clone();
                for f in factors {
                    acc = f.apply_transpose_mat(&acc)?;
                }
                Ok(acc)
            }
            OpKind::TransposeOf(base) => base.apply_mat(x),
            OpKind::Graph(g) => Ok(covgraph::reverse_matmat(g, &x.transpose())?.transpose()),
        }
    }

    /// `self⁻¹ · X`.
    pub fn solve_mat(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if !self.is_square() {
            return Err(dim_err(
                "solve",
                "square",
                format!("{}x{}", self.rows(), self.cols()),
            ));
        }
        if x.rows() != self.rows() {
            return Err(dim_err("solve", self.rows(), x.rows()));
        }
        match &self.0.kind {
            OpKind::Identity => Ok(x.clone()),
            OpKind::DiagonalOf { diag, .. } => {
                check_pivots(self, diag.iter().copied(), self.name())?;
                Ok(scale_rows(x, diag, true))
            }
            OpKind::LowerTriOf {
                strict: false,
                entries,
                ..
            } => {
                check_pivots(self, entries.diagonal().into_iter(), self.name())?;
                Ok(lower_solve(entries, x))
            }
            OpKind::UpperTriOf {
                strict: false,
                entries,
                ..
            } => {
                check_pivots(self, entries.diagonal().into_iter(), self.name())?;
                Ok(upper_solve(entries, x))
            }
            OpKind::InverseOf(base) => base.apply_mat(x),
            OpKind::Scaled(base, alpha) => Ok(base.solve_mat(x)?.scaled(1.0 / alpha)),
            OpKind::TransposeOf(base) => base.solve_transpose_mat(x),
            OpKind::Product(factors) if factors.iter().all(|f| f.is_square()) => {
                let mut acc = x.clone();
                for f in factors {
                    acc = f.solve_mat(&acc)?;
                }
                Ok(acc)
            }
            _ => self.lu()?.solve_mat(x),
        }
    }

    /// `self⁻ᵀ · X`.
    pub fn solve_transpose_mat(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if !self.is_square() {
            return Err(dim_err(
                "solve",
                "square",
                format!("{}x{}", self.rows(), self.cols()),
            ));
        }
        if x.rows() != self.rows() {
            return Err(dim_err("solve", self.rows(), x.rows()));
        }
        match &self.0.kind {
            OpKind::Identity => Ok(x.clone()),
            OpKind::DiagonalOf { diag, .. } => {
                check_pivots(self, diag.iter().copied(), self.name())?;
                Ok(scale_rows(x, diag, true))
            }
            OpKind::LowerTriOf {
                strict: false,
                entries,
                ..
            } => {
                check_pivots(self, entries.diagonal().into_iter(), self.name())?;
                Ok(lower_tr_solve(entries, x))
            }
            OpKind::UpperTriOf {
                strict: false,
                entries,
                ..
            } => {
                check_pivots(self, entries.diagonal().into_iter(), self.name())?;
                Ok(upper_tr_solve(entries, x))
            }
            OpKind::InverseOf(base) => base.apply_transpose_mat(x),
            OpKind::Scaled(base, alpha) => Ok(base.solve_transpose_mat(x)?.scaled(1.0 / alpha)),
            OpKind::TransposeOf(base) => base.solve_mat(x),
            OpKind::Product(factors) if factors.iter().all(|f| f.is_square()) => {
                let mut acc = x.clone();
                for f in factors.iter().rev() {
                    acc = f.solve_transpose_mat(&acc)?;
                }
                Ok(acc)
            }
            _ => self.lu()?.solve_transpose_mat(x),
        }
    }

    fn lu(&self) -> Result<&LuFactors> {
        self.0
            .lu
            .get_or_init(|| {
                let dense = self.to_dense()?;
                LuFactors::new(&dense, self.name())
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Materializes the operator. Meant for oracles and small bases.
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        match &self.0.kind {
            OpKind::Dense(m) => Ok((**m).clone()),
            _ => self.apply_mat(&DenseMatrix::identity(self.cols())),
        }
    }
}

fn check_pivots(op: &LinearOperator, diag: impl Iterator<Item = f64>, name: &str) -> Result<()> {
    let scale = match op.kind() {
        OpKind::DiagonalOf { base, .. }
        | OpKind::LowerTriOf { base, .. }
        | OpKind::UpperTriOf { base, .. } => match base.kind() {
            OpKind::Dense(m) => m.inf_norm(),
            _ => 1.0,
        },
        _ => 1.0,
    };
    let tol = PIVOT_TOL * scale.max(f64::MIN_POSITIVE);
    for p in diag {
        if !(p.abs() > tol) {
            return Err(Error::Singular {
                name: name.to_string(),
                pivot: p.abs(),
                tol,
            });
        }
    }
    Ok(())
}

fn scale_rows(x: &DenseMatrix, diag: &[f64], invert: bool) -> DenseMatrix {
    let mut out = x.clone();
    for (i, d) in diag.iter().enumerate() {
        let f = if invert { 1.0 / d } else { *d };
        out.row_mut(i).iter_mut().for_each(|v| *v *= f);
    }
    out
}

#[inline]
fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += alpha * b;
    }
}

/// Row-block size for the triangular kernels; off-diagonal blocks go
/// through gemm and only diagonal blocks use scalar loops.
const TRI_BLOCK: usize = 64;

fn blocks(n: usize) -> impl DoubleEndedIterator<Item = (usize, usize)> {
    (0..n.div_ceil(TRI_BLOCK)).map(move |b| (b * TRI_BLOCK, ((b + 1) * TRI_BLOCK).min(n)))
}

/// `y[r0..r1] += alpha · a · b` where `a · b` has `r1 − r0` rows.
fn gemm_into_rows(
    y: &mut DenseMatrix,
    r0: usize,
    alpha: f64,
    a: MatView<'_>,
    b: MatView<'_>,
    tmp_rows: usize,
) {
    let k = y.cols();
    let mut tmp = DenseMatrix::zeros(tmp_rows, k);
    gemm(1.0, a, b, 0.0, &mut tmp);
    axpy(
        &mut y.data_mut()[r0 * k..(r0 + tmp_rows) * k],
        alpha,
        tmp.data(),
    );
}

fn lower_mul(l: &DenseMatrix, strict: bool, x: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let mut out = DenseMatrix::zeros(n, x.cols());
    for (r0, r1) in blocks(n) {
        if r0 > 0 {
            gemm_into_rows(
                &mut out,
                r0,
                1.0,
                l.block_view(r0, r1 - r0, 0, r0, false),
                x.block_view(0, r0, 0, x.cols(), false),
                r1 - r0,
            );
        }
        for i in r0..r1 {
            let upto = if strict { i } else { i + 1 };
            let orow = out.row_mut(i);
            for j in r0..upto {
                let lij = l.get(i, j);
                if lij != 0.0 {
                    axpy(orow, lij, x.row(j));
                }
            }
        }
    }
    out
}

fn upper_mul(u: &DenseMatrix, strict: bool, x: &DenseMatrix) -> DenseMatrix {
    let n = u.rows();
    let mut out = DenseMatrix::zeros(n, x.cols());
    for (r0, r1) in blocks(n) {
        if r1 < n {
            gemm_into_rows(
                &mut out,
                r0,
                1.0,
                u.block_view(r0, r1 - r0, r1, n - r1, false),
                x.block_view(r1, n - r1, 0, x.cols(), false),
                r1 - r0,
            );
        }
        for i in r0..r1 {
            let from = if strict { i + 1 } else { i };
            let orow = out.row_mut(i);
            for j in from..r1 {
                let uij = u.get(i, j);
                if uij != 0.0 {
                    axpy(orow, uij, x.row(j));
                }
            }
        }
    }
    out
}

/// `Lᵀ X` touching only the lower triangle of `l`.
fn lower_tr_mul(l: &DenseMatrix, strict: bool, x: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let mut out = DenseMatrix::zeros(n, x.cols());
    for (r0, r1) in blocks(n) {
        if r1 < n {
            gemm_into_rows(
                &mut out,
                r0,
                1.0,
                l.block_view(r1, n - r1, r0, r1 - r0, true),
                x.block_view(r1, n - r1, 0, x.cols(), false),
                r1 - r0,
            );
        }
        for i in r0..r1 {
            let upto = if strict { i } else { i + 1 };
            let xrow = x.row(i);
            for j in r0..upto {
                let lij = l.get(i, j);
                if lij != 0.0 {
                    axpy(out.row_mut(j), lij, xrow);
                }
            }
        }
    }
    out
}

/// `Uᵀ X` touching only the upper triangle of `u`.
fn upper_tr_mul(u: &DenseMatrix, strict: bool, x: &DenseMatrix) -> DenseMatrix {
    let n = u.rows();
    let mut out = DenseMatrix::zeros(n, x.cols());
    for (r0, r1) in blocks(n) {
        if r0 > 0 {
            gemm_into_rows(
                &mut out,
                r0,
                1.0,
                u.block_view(0, r0, r0, r1 - r0, true),
                x.block_view(0, r0, 0, x.cols(), false),
                r1 - r0,
            );
        }
        for i in r0..r1 {
            let from = if strict { i + 1 } else { i };
            let xrow = x.row(i);
            for j in from..r1 {
                let uij = u.get(i, j);
                if uij != 0.0 {
                    axpy(out.row_mut(j), uij, xrow);
                }
            }
        }
    }
    out
}

fn lower_solve(l: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let k = b.cols();
    let mut y = b.clone();
    for (r0, r1) in blocks(n) {
        if r0 > 0 {
            let a = l.block_view(r0, r1 - r0, 0, r0, false);
            let mut tmp = DenseMatrix::zeros(r1 - r0, k);
            gemm(1.0, a, y.block_view(0, r0, 0, k, false), 0.0, &mut tmp);
            axpy(&mut y.data_mut()[r0 * k..r1 * k], -1.0, tmp.data());
        }
        let data = y.data_mut();
        for i in r0..r1 {
            let (done, rest) = data.split_at_mut(i * k);
            let yi = &mut rest[..k];
            let lrow = l.row(i);
            for j in r0..i {
                let lij = lrow[j];
                if lij != 0.0 {
                    axpy(yi, -lij, &done[j * k..(j + 1) * k]);
                }
            }
            let inv = 1.0 / lrow[i];
            yi.iter_mut().for_each(|v| *v *= inv);
        }
    }
    y
}

fn upper_solve(u: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = u.rows();
    let k = b.cols();
    let mut y = b.clone();
    for (r0, r1) in blocks(n).rev() {
        if r1 < n {
            let a = u.block_view(r0, r1 - r0, r1, n - r1, false);
            let mut tmp = DenseMatrix::zeros(r1 - r0, k);
            gemm(1.0, a, y.block_view(r1, n - r1, 0, k, false), 0.0, &mut tmp);
            axpy(&mut y.data_mut()[r0 * k..r1 * k], -1.0, tmp.data());
        }
        let data = y.data_mut();
        for i in (r0..r1).rev() {
            let (head, done) = data.split_at_mut((i + 1) * k);
            let yi = &mut head[i * k..];
            let urow = u.row(i);
            for j in (i + 1)..r1 {
                let uij = urow[j];
                if uij != 0.0 {
                    axpy(yi, -uij, &done[(j - i - 1) * k..(j - i) * k]);
                }
            }
            let inv = 1.0 / urow[i];
            yi.iter_mut().for_each(|v| *v *= inv);
        }
    }
    y
}

/// Solves `Lᵀ y = b` reading rows of `l` contiguously.
fn lower_tr_solve(l: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let k = b.cols();
    let mut y = b.clone();
    for (r0, r1) in blocks(n).rev() {
        if r1 < n {
            let a = l.block_view(r1, n - r1, r0, r1 - r0, true);
            let mut tmp = DenseMatrix::zeros(r1 - r0, k);
            gemm(1.0, a, y.block_view(r1, n - r1, 0, k, false), 0.0, &mut tmp);
            axpy(&mut y.data_mut()[r0 * k..r1 * k], -1.0, tmp.data());
        }
        let data = y.data_mut();
        for i in (r0..r1).rev() {
            let (head, tail) = data.split_at_mut(i * k);
            let yi = &mut tail[..k];
            let inv = 1.0 / l.get(i, i);
            yi.iter_mut().for_each(|v| *v *= inv);
            let lrow = l.row(i);
            for j in r0..i {
                let lij = lrow[j];
                if lij != 0.0 {
                    axpy(&mut head[j * k..(j + 1) * k], -lij, yi);
                }
            }
        }
    }
    y
}

/// Solves `Uᵀ y = b` reading rows of `u` contiguously.
fn upper_tr_solve(u: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = u.rows();
    let k = b.cols();
    let mut y = b.clone();
    for (r0, r1) in blocks(n) {
        if r0 > 0 {
            let a = u.block_view(0, r0, r0, r1 - r0, true);
            let mut tmp = DenseMatrix::zeros(r1 - r0, k);
            gemm(1.0, a, y.block_view(0, r0, 0, k, false), 0.0, &mut tmp);
            axpy(&mut y.data_mut()[r0 * k..r1 * k], -1.0, tmp.data());
        }
        let data = y.data_mut();
        for i in r0..r1 {
            let (head, tail) = data.split_at_mut((i + 1) * k);
            let yi = &mut head[i * k..];
            let inv = 1.0 / u.get(i, i);
            yi.iter_mut().for_each(|v| *v *= inv);
            let urow = u.row(i);
            for j in (i + 1)..r1 {
                let uij = urow[j];
                if uij != 0.0 {
                    axpy(&mut tail[(j - i - 1) * k..(j - i) * k], -uij, yi);
                }
            }
        }
    }
    y
}
