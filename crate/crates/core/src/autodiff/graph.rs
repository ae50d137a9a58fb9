use std::borrow::Cow;
use std::collections::BTreeMap;

use thiserror::Error;

use crate::tensor::{matmul_into, matmul_nt_into, matmul_tn_into, Tensor};

/// Probability floor applied inside the logarithm of [`Graph::cross_entropy`].
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("shape mismatch in {op}: {shapes:?}")]
    ShapeMismatch { op: &'static str, shapes: Vec<Vec<usize>> },
    #[error("{op} at node {node} produced a non-finite value")]
    NonFinite { op: &'static str, node: usize },
    #[error("row {row} out of range for a table with {rows} rows")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("target index {index} out of range for a distribution over {len} entries")]
    TargetOutOfRange { index: usize, len: usize },
    #[error("backward needs a scalar output, node {node} has shape {shape:?}")]
    NonScalarOutput { node: usize, shape: Vec<usize> },
    #[error("{op} needs at least one input")]
    NoInputs { op: &'static str },
    #[error("dropout probability {0} outside [0, 1)")]
    InvalidDropout(f64),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The primitive set, for callers that dispatch on a kind rather than call
/// the typed builder methods directly.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    MatMul,
    Add,
    Mul,
    Tanh,
    Sigmoid,
    /// Concatenate along axis 0 (rows) or 1 (columns).
    Concat {
        axis: usize,
    },
    /// Gather the listed rows of the single input.
    RowLookup {
        rows: Vec<usize>,
    },
    Scale(f64),
    /// Multiply by a pregenerated (inverted) dropout mask.
    DropoutMask(Tensor),
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(usize),
    MatMul(NodeId, NodeId),
    /// Second operand may be a single row broadcast over the first's rows.
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Concat {
        inputs: Vec<NodeId>,
        axis: usize,
    },
    Gather {
        table: NodeId,
        rows: Vec<usize>,
    },
    Scale(NodeId, f64),
    Dropout {
        x: NodeId,
        mask: Tensor,
    },
    Transpose(NodeId),
    Sum(NodeId),
    Softmax(NodeId),
    CrossEntropy {
        probs: NodeId,
        target: usize,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Concat { .. } => "concat",
            Op::Gather { .. } => "row-lookup",
            Op::Scale(..) => "scale",
            Op::Dropout { .. } => "dropout",
            Op::Transpose(_) => "transpose",
            Op::Sum(_) => "sum",
            Op::Softmax(_) => "softmax",
            Op::CrossEntropy { .. } => "cross-entropy",
        }
    }
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

/// A tape of primitive applications in topological (insertion) order.
///
/// Leaves may borrow their values, so parameters and cached encoder outputs
/// are never copied into the graph.
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients of a scalar output with respect to every parameter leaf.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    by_param: BTreeMap<usize, Tensor>,
}

impl Gradients {
    pub fn get(&self, param: usize) -> Option<&Tensor> {
        self.by_param.get(&param)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Tensor)> {
        self.by_param.iter().map(|(k, v)| (*k, v))
    }

    pub fn into_map(self) -> BTreeMap<usize, Tensor> {
        self.by_param
    }

    pub fn len(&self) -> usize {
        self.by_param.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
    }
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape2(t: &Tensor) -> (usize, usize) {
    match t.shape() {
        [r, c] => (*r, *c),
        [c] => (1, *c),
        s => (s[..s.len() - 1].iter().product(), s[s.len() - 1]),
    }
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<NodeId> {
        let id = self.nodes.len();
        if !value.is_finite() {
            return Err(GraphError::NonFinite { op: op.name(), node: id });
        }
        let requires_grad = match &op {
            Op::Input => false,
            Op::Param(_) => true,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Mul(a, b) => {
                self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad
            }
            Op::Tanh(a) | Op::Sigmoid(a) | Op::Scale(a, _) | Op::Transpose(a) | Op::Sum(a) | Op::Softmax(a) => {
                self.nodes[a.0].requires_grad
            }
            Op::Dropout { x, .. } => self.nodes[x.0].requires_grad,
            Op::Gather { table, .. } => self.nodes[table.0].requires_grad,
            Op::CrossEntropy { probs, .. } => self.nodes[probs.0].requires_grad,
            Op::Concat { inputs, .. } => inputs.iter().any(|i| self.nodes[i.0].requires_grad),
        };
        self.nodes.push(Node { value: Cow::Owned(value), op, requires_grad });
        Ok(NodeId(id))
    }

    /// A constant leaf owned by the graph.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.leaf(Cow::Owned(value), Op::Input)
    }

    /// A constant leaf borrowed from the caller.
    pub fn input_ref(&mut self, value: &'a Tensor) -> NodeId {
        self.leaf(Cow::Borrowed(value), Op::Input)
    }

    /// A parameter leaf; `backward` reports a gradient for it under `param`.
    pub fn param(&mut self, param: usize, value: &'a Tensor) -> NodeId {
        self.leaf(Cow::Borrowed(value), Op::Param(param))
    }

    /// A parameter leaf owning its value (used by perturbation checks).
    pub fn param_owned(&mut self, param: usize, value: Tensor) -> NodeId {
        self.leaf(Cow::Owned(value), Op::Param(param))
    }

    fn leaf(&mut self, value: Cow<'a, Tensor>, op: Op) -> NodeId {
        let requires_grad = matches!(op, Op::Param(_));
        self.nodes.push(Node { value, op, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    /// Applies a primitive by kind.
    pub fn apply(&mut self, kind: Primitive, inputs: &[NodeId]) -> Result<NodeId> {
        let unary = |op: &'static str| -> Result<NodeId> {
            match inputs {
                [a] => Ok(*a),
                _ => Err(GraphError::ShapeMismatch { op, shapes: vec![vec![inputs.len()]] }),
            }
        };
        let binary = |op: &'static str| -> Result<(NodeId, NodeId)> {
            match inputs {
                [a, b] => Ok((*a, *b)),
                _ => Err(GraphError::ShapeMismatch { op, shapes: vec![vec![inputs.len()]] }),
            }
        };
        match kind {
            Primitive::MatMul => {
                let (a, b) = binary("matmul")?;
                self.matmul(a, b)
            }
            Primitive::Add => {
                let (a, b) = binary("add")?;
                self.add(a, b)
            }
            Primitive::Mul => {
                let (a, b) = binary("mul")?;
                self.mul(a, b)
            }
            Primitive::Tanh => {
                let a = unary("tanh")?;
                self.tanh(a)
            }
            Primitive::Sigmoid => {
                let a = unary("sigmoid")?;
                self.sigmoid(a)
            }
            Primitive::Concat { axis } => self.concat(inputs, axis),
            Primitive::RowLookup { rows } => {
                let a = unary("row-lookup")?;
                self.rows(a, &rows)
            }
            Primitive::Scale(k) => {
                let a = unary("scale")?;
                self.scale(a, k)
            }
            Primitive::DropoutMask(mask) => {
                let a = unary("dropout")?;
                self.dropout(a, mask)
            }
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        let ((m, k), (k2, n)) = (shape2(av), shape2(bv));
        if av.shape().len() != 2 || bv.shape().len() != 2 || k != k2 {
            return Err(GraphError::ShapeMismatch {
                op: "matmul",
                shapes: vec![av.shape().to_vec(), bv.shape().to_vec()],
            });
        }
        let mut out = vec![0.0; m * n];
        matmul_into(av.data(), bv.data(), &mut out, m, k, n);
        self.push(Tensor::new(vec![m, n], out), Op::MatMul(a, b))
    }

    /// Elementwise sum. `b` may also be a single row added to every row of `a`.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        let out = if av.shape() == bv.shape() {
            av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect()
        } else if av.shape().len() == 2 && bv.shape() == [1, av.cols()] {
            let c = av.cols();
            av.data().iter().enumerate().map(|(i, x)| x + bv.data()[i % c]).collect()
        } else {
            return Err(GraphError::ShapeMismatch {
                op: "add",
                shapes: vec![av.shape().to_vec(), bv.shape().to_vec()],
            });
        };
        let shape = av.shape().to_vec();
        self.push(Tensor::new(shape, out), Op::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(GraphError::ShapeMismatch {
                op: "mul",
                shapes: vec![av.shape().to_vec(), bv.shape().to_vec()],
            });
        }
        let out = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let shape = av.shape().to_vec();
        self.push(Tensor::new(shape, out), Op::Mul(a, b))
    }

    fn map_unary(&mut self, a: NodeId, op: Op, f: impl Fn(f64) -> f64) -> Result<NodeId> {
        let av = self.value(a);
        let out = av.data().iter().map(|&x| f(x)).collect();
        let shape = av.shape().to_vec();
        self.push(Tensor::new(shape, out), op)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.map_unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.map_unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> Result<NodeId> {
        self.map_unary(a, Op::Scale(a, k), |x| x * k)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let neg = self.scale(b, -1.0)?;
        self.add(a, neg)
    }

    /// Multiplies by `mask`, which must match the input's shape.
    pub fn dropout(&mut self, x: NodeId, mask: Tensor) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.shape() != mask.shape() {
            return Err(GraphError::ShapeMismatch {
                op: "dropout",
                shapes: vec![xv.shape().to_vec(), mask.shape().to_vec()],
            });
        }
        let out = xv.data().iter().zip(mask.data()).map(|(a, m)| a * m).collect();
        let shape = xv.shape().to_vec();
        self.push(Tensor::new(shape, out), Op::Dropout { x, mask })
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let av = self.value(a);
        if av.shape().len() != 2 {
            return Err(GraphError::ShapeMismatch { op: "transpose", shapes: vec![av.shape().to_vec()] });
        }
        let (r, c) = shape2(av);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = av.data()[i * c + j];
            }
        }
        self.push(Tensor::new(vec![c, r], out), Op::Transpose(a))
    }

    /// Sum of every entry, as a 1×1 tensor.
    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Concatenates 2-D inputs along `axis` (0 stacks rows, 1 joins columns).
    pub fn concat(&mut self, inputs: &[NodeId], axis: usize) -> Result<NodeId> {
        if inputs.is_empty() {
            return Err(GraphError::NoInputs { op: "concat" });
        }
        let shapes: Vec<Vec<usize>> = inputs.iter().map(|i| self.value(*i).shape().to_vec()).collect();
        let bad = || GraphError::ShapeMismatch { op: "concat", shapes: shapes.clone() };
        if axis > 1 || shapes.iter().any(|s| s.len() != 2) {
            return Err(bad());
        }
        let (out, shape) = if axis == 0 {
            let c = shapes[0][1];
            if shapes.iter().any(|s| s[1] != c) {
                return Err(bad());
            }
            let rows: usize = shapes.iter().map(|s| s[0]).sum();
            let mut out = Vec::with_capacity(rows * c);
            for i in inputs {
                out.extend_from_slice(self.value(*i).data());
            }
            (out, vec![rows, c])
        } else {
            let r = shapes[0][0];
            if shapes.iter().any(|s| s[0] != r) {
                return Err(bad());
            }
            let cols: usize = shapes.iter().map(|s| s[1]).sum();
            let mut out = Vec::with_capacity(r * cols);
            for row in 0..r {
                for i in inputs {
                    out.extend_from_slice(self.value(*i).row_slice(row));
                }
            }
            (out, vec![r, cols])
        };
        self.push(Tensor::new(shape, out), Op::Concat { inputs: inputs.to_vec(), axis })
    }

    /// Gathers rows of a 2-D table into a `rows.len() × cols` tensor.
    pub fn rows(&mut self, table: NodeId, rows: &[usize]) -> Result<NodeId> {
        let tv = self.value(table);
        if tv.shape().len() != 2 || rows.is_empty() {
            return Err(GraphError::ShapeMismatch {
                op: "row-lookup",
                shapes: vec![tv.shape().to_vec(), vec![rows.len()]],
            });
        }
        let (r, c) = shape2(tv);
        let mut out = Vec::with_capacity(rows.len() * c);
        for &row in rows {
            if row >= r {
                return Err(GraphError::RowOutOfRange { row, rows: r });
            }
            out.extend_from_slice(tv.row_slice(row));
        }
        self.push(Tensor::new(vec![rows.len(), c], out), Op::Gather { table, rows: rows.to_vec() })
    }

    pub fn row(&mut self, table: NodeId, row: usize) -> Result<NodeId> {
        self.rows(table, &[row])
    }

    /// Row-wise softmax over the last dimension, with max subtraction.
    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let out = softmax_rows(self.value(a));
        self.push(out, Op::Softmax(a))
    }

    /// `−ln max(p[target], 1e-12)` for a single-row distribution.
    pub fn cross_entropy(&mut self, probs: NodeId, target: usize) -> Result<NodeId> {
        let pv = self.value(probs);
        if pv.rows() != 1 {
            return Err(GraphError::ShapeMismatch { op: "cross-entropy", shapes: vec![pv.shape().to_vec()] });
        }
        if target >= pv.cols() {
            return Err(GraphError::TargetOutOfRange { index: target, len: pv.cols() });
        }
        let loss = cross_entropy(pv.data(), target);
        self.push(Tensor::scalar(loss), Op::CrossEntropy { probs, target })
    }

    /// Reverse-mode sweep from a scalar `output`.
    ///
    /// Every parameter leaf gets an entry, zero when the output does not
    /// depend on it. A parameter id registered twice accumulates.
    pub fn backward(&self, output: NodeId) -> Result<Gradients> {
        let out = self.value(output);
        if out.numel() != 1 {
            return Err(GraphError::NonScalarOutput { node: output.0, shape: out.shape().to_vec() });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Tensor::filled(out.shape(), 1.0));
        let mut result = Gradients::default();

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if let Op::Param(p) = node.op {
                let g = grads[idx].take().unwrap_or_else(|| Tensor::zeros(node.value.shape()));
                match result.by_param.get_mut(&p) {
                    Some(acc) => acc.add_assign(&g),
                    None => {
                        result.by_param.insert(p, g);
                    }
                }
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            if !node.requires_grad {
                continue;
            }
            self.propagate(idx, &g, &mut grads);
        }
        // Parameter leaves after the output never reach the loop above.
        for node in &self.nodes[output.0 + 1..] {
            if let Op::Param(p) = node.op {
                result.by_param.entry(p).or_insert_with(|| Tensor::zeros(node.value.shape()));
            }
        }
        Ok(result)
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let y = &*node.value;
        let mut accumulate = |target: NodeId, delta: Tensor| {
            if !self.nodes[target.0].requires_grad {
                return;
            }
            match &mut grads[target.0] {
                Some(acc) => acc.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Input | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ((m, k), (_, n)) = (shape2(av), shape2(bv));
                if self.nodes[a.0].requires_grad {
                    let mut da = vec![0.0; m * k];
                    matmul_nt_into(g.data(), bv.data(), &mut da, m, n, k);
                    accumulate(*a, Tensor::new(vec![m, k], da));
                }
                if self.nodes[b.0].requires_grad {
                    let mut db = vec![0.0; k * n];
                    matmul_tn_into(av.data(), g.data(), &mut db, m, k, n);
                    accumulate(*b, Tensor::new(vec![k, n], db));
                }
            }
            Op::Add(a, b) => {
                accumulate(*a, g.clone());
                let bv = self.value(*b);
                if bv.shape() == g.shape() {
                    accumulate(*b, g.clone());
                } else {
                    let c = g.cols();
                    let mut db = vec![0.0; c];
                    for (i, v) in g.data().iter().enumerate() {
                        db[i % c] += v;
                    }
                    accumulate(*b, Tensor::new(bv.shape().to_vec(), db));
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let da = g.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
                let db = g.data().iter().zip(av.data()).map(|(x, y)| x * y).collect();
                accumulate(*a, Tensor::new(g.shape().to_vec(), da));
                accumulate(*b, Tensor::new(g.shape().to_vec(), db));
            }
            Op::Tanh(a) => {
                let d = g.data().iter().zip(y.data()).map(|(g, y)| g * (1.0 - y * y)).collect();
                accumulate(*a, Tensor::new(g.shape().to_vec(), d));
            }
            Op::Sigmoid(a) => {
                let d = g.data().iter().zip(y.data()).map(|(g, y)| g * y * (1.0 - y)).collect();
                accumulate(*a, Tensor::new(g.shape().to_vec(), d));
            }
            Op::Scale(a, k) => {
                let d = g.data().iter().map(|v| v * k).collect();
                accumulate(*a, Tensor::new(g.shape().to_vec(), d));
            }
            Op::Dropout { x, mask } => {
                let d = g.data().iter().zip(mask.data()).map(|(g, m)| g * m).collect();
                accumulate(*x, Tensor::new(g.shape().to_vec(), d));
            }
            Op::Transpose(a) => {
                let (r, c) = shape2(g);
                let mut d = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        d[j * r + i] = g.data()[i * c + j];
                    }
                }
                accumulate(*a, Tensor::new(vec![c, r], d));
            }
            Op::Sum(a) => {
                let shape = self.value(*a).shape().to_vec();
                accumulate(*a, Tensor::filled(&shape, g.item()));
            }
            Op::Softmax(a) => {
                let c = y.cols();
                let mut d = vec![0.0; y.numel()];
                for (r, (yr, gr)) in y.data().chunks(c).zip(g.data().chunks(c)).enumerate() {
                    let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                    for j in 0..c {
                        d[r * c + j] = yr[j] * (gr[j] - dot);
                    }
                }
                accumulate(*a, Tensor::new(y.shape().to_vec(), d));
            }
            Op::CrossEntropy { probs, target } => {
                let pv = self.value(*probs);
                let mut d = vec![0.0; pv.numel()];
                let p = pv.data()[*target];
                if p > PROBABILITY_FLOOR {
                    d[*target] = -g.item() / p;
                }
                accumulate(*probs, Tensor::new(pv.shape().to_vec(), d));
            }
            Op::Concat { inputs, axis } => {
                if *axis == 0 {
                    let mut offset = 0;
                    for i in inputs {
                        let n = self.value(*i).numel();
                        let part = g.data()[offset..offset + n].to_vec();
                        accumulate(*i, Tensor::new(self.value(*i).shape().to_vec(), part));
                        offset += n;
                    }
                } else {
                    let rows = g.rows();
                    let total = g.cols();
                    let mut col = 0;
                    for i in inputs {
                        let c = self.value(*i).cols();
                        let mut part = Vec::with_capacity(rows * c);
                        for r in 0..rows {
                            part.extend_from_slice(&g.data()[r * total + col..r * total + col + c]);
                        }
                        accumulate(*i, Tensor::new(vec![rows, c], part));
                        col += c;
                    }
                }
            }
            Op::Gather { table, rows } => {
                let tv = self.value(*table);
                let c = tv.cols();
                let mut d = Tensor::zeros(tv.shape());
                for (k, &row) in rows.iter().enumerate() {
                    let dst = &mut d.data_mut()[row * c..(row + 1) * c];
                    for (o, v) in dst.iter_mut().zip(&g.data()[k * c..(k + 1) * c]) {
                        *o += v;
                    }
                }
                accumulate(*table, d);
            }
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax outside of any graph.
pub fn softmax_rows(t: &Tensor) -> Tensor {
    let c = t.cols();
    let mut out = t.data().to_vec();
    for row in out.chunks_mut(c) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Tensor::new(t.shape().to_vec(), out)
}

/// `−ln max(p[target], 1e-12)`.
pub fn cross_entropy(probs: &[f64], target: usize) -> f64 {
    -probs[target].max(PROBABILITY_FLOOR).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn matmul_example() {
        let mut g = Graph::new();
        let a = g.input(Tensor::from_rows(&[vec![1.0, 2.0]]));
        let b = g.input(Tensor::from_rows(&[vec![3.0], vec![4.0]]));
        let c = g.apply(Primitive::MatMul, &[a, b]).unwrap();
        assert_eq!(g.value(c).data(), &[11.0]);
    }

    #[test]
    fn tanh_of_zero() {
        let mut g = Graph::new();
        let a = g.input(Tensor::row(vec![0.0; 3]));
        let t = g.tanh(a).unwrap();
        assert_eq!(g.value(t).data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn row_lookup_example() {
        let mut g = Graph::new();
        let m = g.input(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]));
        let r = g.apply(Primitive::RowLookup { rows: vec![2] }, &[m]).unwrap();
        assert_eq!(g.value(r).data(), &[5.0, 6.0]);
        assert_eq!(g.row(m, 3).unwrap_err(), GraphError::RowOutOfRange { row: 3, rows: 3 });
    }

    #[test]
    fn shape_mismatch_names_shapes() {
        let mut g = Graph::new();
        let a = g.input(Tensor::zeros(&[1, 3]));
        let b = g.input(Tensor::zeros(&[2, 1]));
        match g.matmul(a, b).unwrap_err() {
            GraphError::ShapeMismatch { op, shapes } => {
                assert_eq!(op, "matmul");
                assert_eq!(shapes, vec![vec![1, 3], vec![2, 1]]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_output_is_rejected() {
        let mut g = Graph::new();
        let a = g.input(Tensor::row(vec![1e300]));
        let b = g.scale(a, 1e300).unwrap_err();
        assert_eq!(b, GraphError::NonFinite { op: "scale", node: 1 });
    }

    #[test]
    fn softmax_examples() {
        let s = softmax_rows(&Tensor::row(vec![0.0, 0.0]));
        assert_eq!(s.data(), &[0.5, 0.5]);
        for c in [-7.0, 0.0, 3.5, 40.0] {
            let s = softmax_rows(&Tensor::row(vec![c; 3]));
            for v in s.data() {
                assert!(close(*v, 1.0 / 3.0, 1e-15));
            }
        }
        // exp(1)/(exp(1)+exp(2)) evaluated with mpmath at 30 digits.
        let s = softmax_rows(&Tensor::row(vec![1.0, 2.0]));
        assert!(close(s.data()[0], 0.26894, 1e-5));
        assert!(close(s.data()[1], 0.73106, 1e-5));
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[0.0, 1.0, 0.0], 1), 0.0);
        assert!(close(cross_entropy(&[0.25; 4], 3), 1.38629, 1e-5));
        assert!(close(cross_entropy(&[0.0, 1.0], 0), 27.631, 1e-3));

        let mut g = Graph::new();
        let p = g.input(Tensor::row(vec![0.5, 0.5]));
        assert_eq!(g.cross_entropy(p, 2).unwrap_err(), GraphError::TargetOutOfRange { index: 2, len: 2 });
    }

    #[test]
    fn backward_of_square() {
        let x = Tensor::scalar(3.0);
        let mut g = Graph::new();
        let xn = g.param(0, &x);
        let sq = g.mul(xn, xn).unwrap();
        let grads = g.backward(sq).unwrap();
        assert_eq!(grads.get(0).unwrap().data(), &[6.0]);
    }

    #[test]
    fn softmax_sum_has_zero_gradient() {
        let v = Tensor::row(vec![0.3, -1.2, 2.0, 0.0]);
        let mut g = Graph::new();
        let vn = g.param(0, &v);
        let s = g.softmax_rows(vn).unwrap();
        let total = g.sum(s).unwrap();
        let grads = g.backward(total).unwrap();
        for d in grads.get(0).unwrap().data() {
            assert!(d.abs() < 1e-15, "{d}");
        }
    }

    #[test]
    fn unused_parameters_get_zero_gradients() {
        let a = Tensor::row(vec![1.0, 2.0]);
        let unused = Tensor::zeros(&[2, 3]);
        let mut g = Graph::new();
        let an = g.param(0, &a);
        g.param(1, &unused);
        let s = g.sum(an).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(0).unwrap().data(), &[1.0, 1.0]);
        assert_eq!(grads.get(1).unwrap(), &Tensor::zeros(&[2, 3]));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let a = Tensor::row(vec![1.0, 2.0]);
        let mut g = Graph::new();
        let an = g.param(0, &a);
        assert!(matches!(g.backward(an), Err(GraphError::NonScalarOutput { .. })));
    }

    #[test]
    fn broadcast_add_gradient_sums_rows() {
        let m = Tensor::zeros(&[3, 2]);
        let b = Tensor::row(vec![1.0, -1.0]);
        let mut g = Graph::new();
        let mn = g.param(0, &m);
        let bn = g.param(1, &b);
        let s = g.add(mn, bn).unwrap();
        let total = g.sum(s).unwrap();
        let grads = g.backward(total).unwrap();
        assert_eq!(grads.get(1).unwrap().data(), &[3.0, 3.0]);
    }
}
