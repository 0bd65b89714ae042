use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{dim_err, Error, Result};
use crate::linops::{LinearOperator, Vector};
use crate::tracer::graph::{AffineGraph, NodeId, NodeKind, TraceNode};

static NEXT_TRACE: AtomicU64 = AtomicU64::new(1);

/// Handle to a value inside a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TracerValue {
    trace: u64,
    node: NodeId,
    dim: usize,
}

impl TracerValue {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self) -> NodeId {
        self.node
    }
}

/// Expression builder a solver program writes against. Only affine
/// operations record nodes; the remaining entry points always fail.
///
/// A tracer built with [`Tracer::numeric`] additionally carries concrete
/// values, which gives an evaluation path independent of the graph.
pub struct Tracer {
    id: u64,
    nodes: Vec<TraceNode>,
    stages: Vec<NodeId>,
    values: Option<Vec<Vector>>,
}

impl Tracer {
    fn start(input_dim: usize, value: Option<Vector>) -> (Self, TracerValue) {
        let id = NEXT_TRACE.fetch_add(1, Ordering::Relaxed);
        let tracer = Self {
            id,
            nodes: vec![TraceNode {
                id: 0,
                kind: NodeKind::Input,
                dim: input_dim,
            }],
            stages: Vec::new(),
            values: value.map(|v| vec![v]),
        };
        let x = TracerValue {
            trace: id,
            node: 0,
            dim: input_dim,
        };
        (tracer, x)
    }

    /// Symbolic tracer and its input value.
    pub fn symbolic(input_dim: usize) -> (Self, TracerValue) {
        Self::start(input_dim, None)
    }

    /// Tracer that also evaluates eagerly on `x`.
    pub fn numeric(x: &Vector) -> (Self, TracerValue) {
        Self::start(x.len(), Some(x.clone()))
    }

    fn check(&self, v: TracerValue) -> Result<()> {
        if v.trace != self.id {
            return Err(Error::ForeignTracerValue);
        }
        Ok(())
    }

    fn push(
        &mut self,
        kind: NodeKind,
        dim: usize,
        value: impl FnOnce(&[Vector]) -> Result<Vector>,
    ) -> Result<TracerValue> {
        if let Some(values) = &self.values {
            let v = value(values)?;
            self.values.as_mut().unwrap().push(v);
        }
        let node = self.nodes.len();
        self.nodes.push(TraceNode {
            id: node,
            kind,
            dim,
        });
        Ok(TracerValue {
            trace: self.id,
            node,
            dim,
        })
    }

    pub fn apply(&mut self, op: &LinearOperator, x: TracerValue) -> Result<TracerValue> {
        self.check(x)?;
        if op.cols() != x.dim {
            return Err(dim_err("traced apply", op.cols(), x.dim));
        }
        let kind = NodeKind::Linear {
            op: op.clone(),
            parent: x.node,
        };
        self.push(kind, op.rows(), |vals| op.apply(&vals[x.node]))
    }

    pub fn add(&mut self, a: TracerValue, b: TracerValue) -> Result<TracerValue> {
        self.check(a)?;
        self.check(b)?;
        if a.dim != b.dim {
            return Err(dim_err("traced add", a.dim, b.dim));
        }
        let kind = NodeKind::Add {
            left: a.node,
            right: b.node,
        };
        self.push(kind, a.dim, |vals| vals[a.node].add(&vals[b.node]))
    }

    /// `a − b`, recorded as `Add(a, Negate(b))`.
    pub fn sub(&mut self, a: TracerValue, b: TracerValue) -> Result<TracerValue> {
        let nb = self.neg(b)?;
        self.add(a, nb)
    }

    /// Adds the constant vector `v`.
    pub fn shift(&mut self, x: TracerValue, v: &Vector) -> Result<TracerValue> {
        self.check(x)?;
        if v.len() != x.dim {
            return Err(dim_err("traced shift", x.dim, v.len()));
        }
        let kind = NodeKind::Shift {
            shift: v.clone(),
            parent: x.node,
        };
        self.push(kind, x.dim, |vals| vals[x.node].add(v))
    }

    pub fn scale(&mut self, alpha: f64, x: TracerValue) -> Result<TracerValue> {
        self.check(x)?;
        if !alpha.is_finite() {
            return Err(Error::NonFinite("traced scale"));
        }
        let kind = NodeKind::Scale {
            alpha,
            parent: x.node,
        };
        self.push(kind, x.dim, |vals| Ok(vals[x.node].scaled(alpha)))
    }

    pub fn neg(&mut self, x: TracerValue) -> Result<TracerValue> {
        self.check(x)?;
        self.push(NodeKind::Negate { parent: x.node }, x.dim, |vals| {
            Ok(vals[x.node].scaled(-1.0))
        })
    }

    /// Marks `x` as the end of a sub-map. The simplifier treats each stage
    /// separately.
    pub fn checkpoint(&mut self, x: TracerValue) -> Result<TracerValue> {
        self.check(x)?;
        self.stages.push(x.node);
        Ok(x)
    }

    /// Product of two traced values. Always rejected.
    pub fn mul(&mut self, a: TracerValue, b: TracerValue) -> Result<TracerValue> {
        self.check(a)?;
        self.check(b)?;
        Err(Error::NonAffineOperation(
            "product of two traced values".into(),
        ))
    }

    /// Elementwise nonlinearity. Always rejected.
    pub fn map(&mut self, x: TracerValue, _f: fn(f64) -> f64) -> Result<TracerValue> {
        self.check(x)?;
        Err(Error::NonAffineOperation(
            "elementwise function of a traced value".into(),
        ))
    }

    /// Reading a traced value for control flow. Always rejected.
    pub fn branch_on(&self, x: TracerValue) -> Result<bool> {
        self.check(x)?;
        Err(Error::NonAffineOperation("branch on traced data".into()))
    }

    /// Data-dependent indexing. Always rejected.
    pub fn gather(&mut self, x: TracerValue, _index: TracerValue) -> Result<TracerValue> {
        self.check(x)?;
        Err(Error::NonAffineOperation("data-dependent indexing".into()))
    }

    /// Concrete value of `x` when tracing numerically.
    pub fn value(&self, x: TracerValue) -> Option<&Vector> {
        self.values.as_ref().map(|v| &v[x.node])
    }

    pub fn finish(self, output: TracerValue) -> Result<AffineGraph> {
        self.check(output)?;
        Ok(AffineGraph::from_parts(
            self.nodes,
            output.node,
            self.stages,
        ))
    }
}

/// A program over traced values.
pub trait AffineProgram {
    fn run(&self, tracer: &mut Tracer, x: TracerValue) -> Result<TracerValue>;
}

impl<F> AffineProgram for F
where
    F: Fn(&mut Tracer, TracerValue) -> Result<TracerValue>,
{
    fn run(&self, tracer: &mut Tracer, x: TracerValue) -> Result<TracerValue> {
        self(tracer, x)
    }
}

/// Boxed program with a known input dimension, as returned by the method
/// builders.
#[derive(Clone)]
pub struct Program {
    dim: usize,
    name: String,
    body: Arc<dyn Fn(&mut Tracer, TracerValue) -> Result<TracerValue> + Send + Sync>,
}

impl std::fmt::Debug for Program {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Program({}, d={})", self.name, self.dim)
    }
}

impl Program {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        body: impl Fn(&mut Tracer, TracerValue) -> Result<TracerValue> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            name: name.into(),
            body: Arc::new(body),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn trace(&self) -> Result<AffineGraph> {
        trace(self, self.dim)
    }

    /// Runs the program on concrete data without building a graph first.
    pub fn run_numeric(&self, x: &Vector) -> Result<Vector> {
        run_numeric(self, x)
    }
}

impl AffineProgram for Program {
    fn run(&self, tracer: &mut Tracer, x: TracerValue) -> Result<TracerValue> {
        (self.body)(tracer, x)
    }
}

/// Records `program` into a pruned affine graph.
pub fn trace<P: AffineProgram + ?Sized>(program: &P, input_dim: usize) -> Result<AffineGraph> {
    let (mut tracer, x) = Tracer::symbolic(input_dim);
    let out = program.run(&mut tracer, x)?;
    tracer.finish(out)
}

/// Executes `program` eagerly on `x`.
pub fn run_numeric<P: AffineProgram + ?Sized>(program: &P, x: &Vector) -> Result<Vector> {
    let (mut tracer, input) = Tracer::numeric(x);
    let out = program.run(&mut tracer, input)?;
    Ok(tracer.value(out).expect("numeric tracer").clone())
}
