use serde_json::{json, Value};

use crate::error::{dim_err, Error, Result};
use crate::linops::{DenseMatrix, LinearOperator, Vector};

pub type NodeId = usize;

#[derive(Debug, Clone)]
pub enum NodeKind {
    Input,
    Linear { op: LinearOperator, parent: NodeId },
    Shift { shift: Vector, parent: NodeId },
    Scale { alpha: f64, parent: NodeId },
    Negate { parent: NodeId },
    Add { left: NodeId, right: NodeId },
}

impl NodeKind {
    pub fn parents(&self) -> Vec<NodeId> {
        match self {
            NodeKind::Input => vec![],
            NodeKind::Linear { parent, .. }
            | NodeKind::Shift { parent, .. }
            | NodeKind::Scale { parent, .. }
            | NodeKind::Negate { parent } => vec![*parent],
            NodeKind::Add { left, right } => vec![*left, *right],
        }
    }

    fn remap(&self, map: &[Option<NodeId>]) -> NodeKind {
        let m = |id: &NodeId| map[*id].expect("parent kept");
        match self {
            NodeKind::Input => NodeKind::Input,
            NodeKind::Linear { op, parent } => NodeKind::Linear {
                op: op.clone(),
                parent: m(parent),
            },
            NodeKind::Shift { shift, parent } => NodeKind::Shift {
                shift: shift.clone(),
                parent: m(parent),
            },
            NodeKind::Scale { alpha, parent } => NodeKind::Scale {
                alpha: *alpha,
                parent: m(parent),
            },
            NodeKind::Negate { parent } => NodeKind::Negate { parent: m(parent) },
            NodeKind::Add { left, right } => NodeKind::Add {
                left: m(left),
                right: m(right),
            },
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            NodeKind::Input => "input",
            NodeKind::Linear { .. } => "linear",
            NodeKind::Shift { .. } => "shift",
            NodeKind::Scale { .. } => "scale",
            NodeKind::Negate { .. } => "negate",
            NodeKind::Add { .. } => "add",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub dim: usize,
}

/// Single-input, single-output DAG of affine operations in topological
/// order. `stages` lists interior nodes that split the graph into
/// sequential sub-maps.
#[derive(Debug, Clone)]
pub struct AffineGraph {
    nodes: Vec<TraceNode>,
    input: NodeId,
    output: NodeId,
    stages: Vec<NodeId>,
}

impl AffineGraph {
    /// Builds from raw parts, pruning nodes that do not reach the output.
    pub(crate) fn from_parts(nodes: Vec<TraceNode>, output: NodeId, stages: Vec<NodeId>) -> Self {
        let n = nodes.len();
        let mut live = vec![false; n];
        live[0] = true;
        live[output] = true;
        for id in (0..n).rev() {
            if live[id] {
                for p in nodes[id].kind.parents() {
                    live[p] = true;
                }
            }
        }
        let mut map = vec![None; n];
        let mut kept = Vec::new();
        for node in &nodes {
            if live[node.id] {
                let new_id = kept.len();
                map[node.id] = Some(new_id);
                kept.push(TraceNode {
                    id: new_id,
                    kind: node.kind.remap(&map),
                    dim: node.dim,
                });
            }
        }
        let output = map[output].expect("output kept");
        let mut new_stages: Vec<NodeId> = stages
            .iter()
            .filter_map(|s| map[*s])
            .filter(|&s| s != 0 && s != output)
            .collect();
        new_stages.sort_unstable();
        new_stages.dedup();
        Self {
            nodes: kept,
            input: 0,
            output,
            stages: new_stages,
        }
    }

    /// The identity map on `dim`.
    pub fn identity(dim: usize) -> Self {
        Self {
            nodes: vec![TraceNode {
                id: 0,
                kind: NodeKind::Input,
                dim,
            }],
            input: 0,
            output: 0,
            stages: vec![],
        }
    }

    pub fn nodes(&self) -> &[TraceNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input_id(&self) -> NodeId {
        self.input
    }

    pub fn output_id(&self) -> NodeId {
        self.output
    }

    pub fn stages(&self) -> &[NodeId] {
        &self.stages
    }

    pub fn input_dim(&self) -> usize {
        self.nodes[self.input].dim
    }

    pub fn output_dim(&self) -> usize {
        self.nodes[self.output].dim
    }

    pub fn is_linear(&self) -> bool {
        !self
            .nodes
            .iter()
            .any(|n| matches!(n.kind, NodeKind::Shift { .. }))
    }

    /// Number of consumers of each node, plus one for the output.
    pub(crate) fn use_counts(&self) -> Vec<usize> {
        let mut uses = vec![0usize; self.nodes.len()];
        for node in &self.nodes {
            for p in node.kind.parents() {
                uses[p] += 1;
            }
        }
        uses[self.output] += 1;
        uses
    }

    /// Linear part: every Shift node is bypassed.
    pub fn strip_shifts(&self) -> AffineGraph {
        let n = self.nodes.len();
        let mut redirect: Vec<NodeId> = (0..n).collect();
        let mut nodes = Vec::with_capacity(n);
        for node in &self.nodes {
            let r = |id: NodeId| redirect[id];
            let kind = match &node.kind {
                NodeKind::Shift { parent, .. } => {
                    redirect[node.id] = r(*parent);
                    continue;
                }
                NodeKind::Input => NodeKind::Input,
                NodeKind::Linear { op, parent } => NodeKind::Linear {
                    op: op.clone(),
                    parent: r(*parent),
                },
                NodeKind::Scale { alpha, parent } => NodeKind::Scale {
                    alpha: *alpha,
                    parent: r(*parent),
                },
                NodeKind::Negate { parent } => NodeKind::Negate { parent: r(*parent) },
                NodeKind::Add { left, right } => NodeKind::Add {
                    left: r(*left),
                    right: r(*right),
                },
            };
            nodes.push(TraceNode {
                id: node.id,
                kind,
                dim: node.dim,
            });
        }
        // Renumber densely while keeping topological order.
        let mut map = vec![None; n];
        for (new_id, node) in nodes.iter().enumerate() {
            map[node.id] = Some(new_id);
        }
        let renumbered: Vec<TraceNode> = nodes
            .iter()
            .enumerate()
            .map(|(new_id, node)| TraceNode {
                id: new_id,
                kind: node.kind.remap(&map),
                dim: node.dim,
            })
            .collect();
        let output = map[redirect[self.output]].expect("output kept");
        let stages = self
            .stages
            .iter()
            .filter_map(|s| map[redirect[*s]])
            .collect();
        AffineGraph::from_parts(renumbered, output, stages)
    }

    /// `compose(outer, inner)` evaluates `outer(inner(x))`. The seam becomes
    /// a stage boundary.
    pub fn compose(outer: &AffineGraph, inner: &AffineGraph) -> Result<AffineGraph> {
        if inner.output_dim() != outer.input_dim() {
            return Err(dim_err("compose", outer.input_dim(), inner.output_dim()));
        }
        let mut nodes = inner.nodes.clone();
        let mut stages = inner.stages.clone();
        let seam = inner.output;
        if seam != inner.input {
            stages.push(seam);
        }
        let mut map: Vec<Option<NodeId>> = vec![None; outer.nodes.len()];
        for node in &outer.nodes {
            if matches!(node.kind, NodeKind::Input) {
                map[node.id] = Some(seam);
                continue;
            }
            let new_id = nodes.len();
            map[node.id] = Some(new_id);
            nodes.push(TraceNode {
                id: new_id,
                kind: node.kind.remap(&map),
                dim: node.dim,
            });
        }
        stages.extend(outer.stages.iter().filter_map(|s| map[*s]));
        let output = map[outer.output].expect("outer output mapped");
        Ok(AffineGraph::from_parts(nodes, output, stages))
    }

    /// `k`-fold composition `g ∘ ⋯ ∘ g`; `k = 0` gives the identity.
    pub fn power(&self, k: usize) -> Result<AffineGraph> {
        let mut acc = AffineGraph::identity(self.input_dim());
        for _ in 0..k {
            acc = AffineGraph::compose(self, &acc)?;
        }
        Ok(acc)
    }

    /// Splits at stage boundaries into sequential sub-graphs whose
    /// composition is this graph. Falls back to a single piece when an edge
    /// crosses a boundary.
    pub fn split_stages(&self) -> Vec<AffineGraph> {
        if self.stages.is_empty() {
            return vec![self.clone()];
        }
        let mut bounds = vec![self.input];
        bounds.extend(self.stages.iter().copied());
        bounds.push(self.output);
        bounds.dedup();
        let mut pieces = Vec::new();
        for w in bounds.windows(2) {
            let (start, end) = (w[0], w[1]);
            if end <= start {
                return vec![self.clone()];
            }
            let mut map: Vec<Option<NodeId>> = vec![None; self.nodes.len()];
            map[start] = Some(0);
            let mut nodes = vec![TraceNode {
                id: 0,
                kind: NodeKind::Input,
                dim: self.nodes[start].dim,
            }];
            for node in &self.nodes[start + 1..=end] {
                if node
                    .kind
                    .parents()
                    .iter()
                    .any(|p| *p < start || (map[*p].is_none()))
                {
                    return vec![self.clone()];
                }
                let new_id = nodes.len();
                map[node.id] = Some(new_id);
                nodes.push(TraceNode {
                    id: new_id,
                    kind: node.kind.remap(&map),
                    dim: node.dim,
                });
            }
            pieces.push(AffineGraph::from_parts(nodes, map[end].unwrap(), vec![]));
        }
        pieces
    }

    /// Forward evaluation on a block of columns. With `allow_shifts`, each
    /// shift is broadcast over every column.
    pub(crate) fn forward(&self, x: &DenseMatrix, allow_shifts: bool) -> Result<DenseMatrix> {
        if x.rows() != self.input_dim() {
            return Err(dim_err("graph evaluation", self.input_dim(), x.rows()));
        }
        let mut uses = self.use_counts();
        let mut values: Vec<Option<DenseMatrix>> = vec![None; self.nodes.len()];
        values[self.input] = Some(x.clone());
        for node in &self.nodes {
            let value = {
                let get = |id: NodeId| values[id].as_ref().expect("parent evaluated");
                match &node.kind {
                    NodeKind::Input => continue,
                    NodeKind::Linear { op, parent } => op.apply_mat(get(*parent))?,
                    NodeKind::Shift { shift, parent } => {
                        if !allow_shifts {
                            return Err(Error::ShiftInLinearGraph);
                        }
                        let mut out = get(*parent).clone();
                        for (i, s) in shift.iter().enumerate() {
                            out.row_mut(i).iter_mut().for_each(|v| *v += s);
                        }
                        out
                    }
                    NodeKind::Scale { alpha, parent } => get(*parent).scaled(*alpha),
                    NodeKind::Negate { parent } => get(*parent).scaled(-1.0),
                    NodeKind::Add { left, right } => get(*left).add(get(*right))?,
                }
            };
            for p in node.kind.parents() {
                uses[p] -= 1;
                if uses[p] == 0 {
                    values[p] = None;
                }
            }
            values[node.id] = Some(value);
        }
        Ok(values[self.output].take().expect("output evaluated"))
    }

    /// JSON document describing nodes, kinds and operator leaves.
    pub fn to_json(&self) -> Value {
        let nodes: Vec<Value> = self
            .nodes
            .iter()
            .map(|node| {
                let mut obj = json!({
                    "id": node.id,
                    "kind": node.kind.label(),
                    "dim": node.dim,
                    "parents": node.kind.parents(),
                });
                match &node.kind {
                    NodeKind::Linear { op, .. } => {
                        obj["op"] = json!({
                            "name": op.name(),
                            "rows": op.rows(),
                            "cols": op.cols(),
                            "cost_class": op.cost_class().as_str(),
                        });
                    }
                    NodeKind::Shift { shift, .. } => obj["shift"] = json!(shift.as_slice()),
                    NodeKind::Scale { alpha, .. } => obj["alpha"] = json!(alpha),
                    _ => {}
                }
                obj
            })
            .collect();
        json!({
            "input_dim": self.input_dim(),
            "output_dim": self.output_dim(),
            "input": self.input,
            "output": self.output,
            "stages": self.stages,
            "nodes": nodes,
        })
    }
}

/// Evaluates the affine map on one vector.
pub fn eval_affine(g: &AffineGraph, x: &Vector) -> Result<Vector> {
    if x.len() != g.input_dim() {
        return Err(dim_err("eval_affine", g.input_dim(), x.len()));
    }
    Ok(Vector::from(
        g.forward(&DenseMatrix::column(x), true)?.into_data(),
    ))
}

/// `strip_shifts` as a free function.
pub fn strip_shifts(g: &AffineGraph) -> AffineGraph {
    g.strip_shifts()
}

/// `compose(g1, g2)(x) = g1(g2(x))`.
pub fn compose(g1: &AffineGraph, g2: &AffineGraph) -> Result<AffineGraph> {
    AffineGraph::compose(g1, g2)
}
