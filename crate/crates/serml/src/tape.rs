//! Reverse-mode automatic differentiation over flat `f64` buffers.
//!
//! Forward computation appends nodes to a [`Tape`]; [`Tape::backward`] walks
//! the arena in reverse and accumulates parameter gradients into
//! [`Gradients`]. Node ids are created in topological order by construction,
//! so no explicit sort is needed.

use std::collections::BTreeMap;

use crate::params::{Gradients, ParamId, ParamStore};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NodeId(u32);

impl NodeId {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug)]
struct GradSink {
    param: ParamId,
    offset: usize,
}

enum Op {
    Leaf(Option<GradSink>),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddN(Vec<NodeId>),
    Scale(NodeId, f64),
    Offset(NodeId),
    Concat(Vec<NodeId>),
    Slice { src: NodeId, start: usize },
    /// `W·x` with `W` row-major `rows × cols`, `x` of length `cols`.
    MatVec { w: NodeId, x: NodeId },
    /// `Wᵀ·x` with `W` row-major `rows × cols`, `x` of length `rows`.
    MatTVec { w: NodeId, x: NodeId },
    Tanh(NodeId),
    Sigmoid(NodeId),
    Dot(NodeId, NodeId),
    /// Σᵢ uᵢ·rᵢ·vᵢ
    TripleDot(NodeId, NodeId, NodeId),
    SumSq(NodeId),
    Softmax(NodeId),
    /// Σₖ wₖ·vecₖ with scalar weights `w` of length k.
    WeightedSum { weights: NodeId, vectors: Vec<NodeId> },
    /// −log softmax(logits)[class], numerically fused.
    NllFromLogits { logits: NodeId, class: usize },
    Relu(NodeId),
}

struct Node {
    value: Vec<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.idx()].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.len(), 1, "scalar() on non-scalar node");
        v[0]
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId((self.nodes.len() - 1) as u32)
    }

    pub fn constant(&mut self, v: &[f64]) -> NodeId {
        self.push(v.to_vec(), Op::Leaf(None))
    }

    pub fn zeros(&mut self, n: usize) -> NodeId {
        self.push(vec![0.0; n], Op::Leaf(None))
    }

    /// Leaf over a whole parameter tensor; gradients flow back into it.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        let mat = store.get(id);
        self.push(
            mat.data.clone(),
            Op::Leaf(Some(GradSink {
                param: id,
                offset: 0,
            })),
        )
    }

    /// Leaf over one row of a parameter tensor (embedding lookup).
    pub fn param_row(&mut self, store: &ParamStore, id: ParamId, row: usize) -> NodeId {
        let mat = store.get(id);
        self.push(
            mat.row(row).to_vec(),
            Op::Leaf(Some(GradSink {
                param: id,
                offset: row * mat.cols,
            })),
        )
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        assert_eq!(v.len(), self.value(b).len(), "add length mismatch");
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.value(a).len(), self.value(b).len(), "sub length mismatch");
        let v: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x - y)
            .collect();
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.value(a).len(), self.value(b).len(), "mul length mismatch");
        let v: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        self.push(v, Op::Mul(a, b))
    }

    /// Elementwise sum of same-length nodes. Empty input yields scalar zero.
    pub fn add_n(&mut self, parts: &[NodeId]) -> NodeId {
        if parts.is_empty() {
            return self.zeros(1);
        }
        let n = self.value(parts[0]).len();
        let mut v = vec![0.0; n];
        for p in parts {
            for (acc, x) in v.iter_mut().zip(self.value(*p)) {
                *acc += x;
            }
        }
        self.push(v, Op::AddN(parts.to_vec()))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v: Vec<f64> = self.value(a).iter().map(|x| x * c).collect();
        self.push(v, Op::Scale(a, c))
    }

    pub fn offset(&mut self, a: NodeId, c: f64) -> NodeId {
        let v: Vec<f64> = self.value(a).iter().map(|x| x + c).collect();
        self.push(v, Op::Offset(a))
    }

    /// Mean of scalar nodes; empty input yields scalar zero.
    pub fn mean(&mut self, parts: &[NodeId]) -> NodeId {
        if parts.is_empty() {
            return self.zeros(1);
        }
        let s = self.add_n(parts);
        self.scale(s, 1.0 / parts.len() as f64)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut v = Vec::new();
        for p in parts {
            v.extend_from_slice(self.value(*p));
        }
        self.push(v, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, src: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.value(src)[start..start + len].to_vec();
        self.push(v, Op::Slice { src, start })
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> NodeId {
        let wv = self.value(w);
        let xv = self.value(x);
        let cols = xv.len();
        assert!(cols > 0 && wv.len().is_multiple_of(cols), "matvec shape mismatch");
        let rows = wv.len() / cols;
        let mut out = vec![0.0; rows];
        for i in 0..rows {
            let mut s = 0.0;
            for j in 0..cols {
                s += wv[i * cols + j] * xv[j];
            }
            out[i] = s;
        }
        self.push(out, Op::MatVec { w, x })
    }

    pub fn mat_t_vec(&mut self, w: NodeId, x: NodeId) -> NodeId {
        let wv = self.value(w);
        let xv = self.value(x);
        let rows = xv.len();
        assert!(rows > 0 && wv.len().is_multiple_of(rows), "mat_t_vec shape mismatch");
        let cols = wv.len() / rows;
        let mut out = vec![0.0; cols];
        for i in 0..rows {
            for j in 0..cols {
                out[j] += wv[i * cols + j] * xv[i];
            }
        }
        self.push(out, Op::MatTVec { w, x })
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v: Vec<f64> = self.value(a).iter().map(|x| x.tanh()).collect();
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v: Vec<f64> = self.value(a).iter().map(|x| sigmoid(*x)).collect();
        self.push(v, Op::Sigmoid(a))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.value(a).len(), self.value(b).len(), "dot length mismatch");
        let s: f64 = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .sum();
        self.push(vec![s], Op::Dot(a, b))
    }

    pub fn triple_dot(&mut self, u: NodeId, r: NodeId, v: NodeId) -> NodeId {
        let (uv, rv, vv) = (self.value(u), self.value(r), self.value(v));
        assert!(uv.len() == rv.len() && rv.len() == vv.len(), "triple_dot length mismatch");
        let s: f64 = uv
            .iter()
            .zip(rv)
            .zip(vv)
            .map(|((a, b), c)| a * b * c)
            .sum();
        self.push(vec![s], Op::TripleDot(u, r, v))
    }

    pub fn sum_sq(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.value(a).iter().map(|x| x * x).sum();
        self.push(vec![s], Op::SumSq(a))
    }

    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let v = softmax(self.value(a));
        self.push(v, Op::Softmax(a))
    }

    pub fn weighted_sum(&mut self, weights: NodeId, vectors: &[NodeId]) -> NodeId {
        let k = self.value(weights).len();
        assert_eq!(k, vectors.len(), "weighted_sum arity mismatch");
        assert!(k > 0, "weighted_sum over empty set");
        let n = self.value(vectors[0]).len();
        let mut out = vec![0.0; n];
        for (i, vec_id) in vectors.iter().enumerate() {
            let wi = self.value(weights)[i];
            for (acc, x) in out.iter_mut().zip(self.value(*vec_id)) {
                *acc += wi * x;
            }
        }
        self.push(
            out,
            Op::WeightedSum {
                weights,
                vectors: vectors.to_vec(),
            },
        )
    }

    pub fn nll_from_logits(&mut self, logits: NodeId, class: usize) -> NodeId {
        let lv = self.value(logits);
        assert!(class < lv.len(), "class index out of range");
        let m = lv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + lv.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        self.push(vec![lse - lv[class]], Op::NllFromLogits { logits, class })
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        // `f64::max` would swallow NaN; divergence detection needs it kept.
        let v: Vec<f64> = self
            .value(a)
            .iter()
            .map(|x| if *x > 0.0 || x.is_nan() { *x } else { 0.0 })
            .collect();
        self.push(v, Op::Relu(a))
    }

    /// Propagate d(loss)/d(node) from `loss` (a scalar node) back to every
    /// parameter leaf, accumulating into `grads`.
    pub fn backward(&self, loss: NodeId, grads: &mut Gradients) {
        assert_eq!(self.value(loss).len(), 1, "backward from non-scalar");
        let mut adj: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[loss.idx()] = Some(vec![1.0]);

        for i in (0..=loss.idx()).rev() {
            let Some(g) = adj[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf(sink) => {
                    if let Some(s) = sink {
                        grads.accumulate(s.param, s.offset, &g);
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut adj, self, *a, &g);
                    acc(&mut adj, self, *b, &g);
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, self, *a, &g);
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    acc(&mut adj, self, *b, &neg);
                }
                Op::Mul(a, b) => {
                    let ga: Vec<f64> = g.iter().zip(self.value(*b)).map(|(g, y)| g * y).collect();
                    let gb: Vec<f64> = g.iter().zip(self.value(*a)).map(|(g, x)| g * x).collect();
                    acc(&mut adj, self, *a, &ga);
                    acc(&mut adj, self, *b, &gb);
                }
                Op::AddN(parts) => {
                    for p in parts {
                        acc(&mut adj, self, *p, &g);
                    }
                }
                Op::Scale(a, c) => {
                    let ga: Vec<f64> = g.iter().map(|x| x * c).collect();
                    acc(&mut adj, self, *a, &ga);
                }
                Op::Offset(a) => {
                    acc(&mut adj, self, *a, &g);
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let n = self.value(*p).len();
                        acc(&mut adj, self, *p, &g[start..start + n]);
                        start += n;
                    }
                }
                Op::Slice { src, start } => {
                    let n = self.value(*src).len();
                    let mut gs = vec![0.0; n];
                    gs[*start..*start + g.len()].copy_from_slice(&g);
                    acc(&mut adj, self, *src, &gs);
                }
                Op::MatVec { w, x } => {
                    let xv = self.value(*x);
                    let wv = self.value(*w);
                    let cols = xv.len();
                    let rows = g.len();
                    let mut gw = vec![0.0; wv.len()];
                    let mut gx = vec![0.0; cols];
                    for i in 0..rows {
                        for j in 0..cols {
                            gw[i * cols + j] = g[i] * xv[j];
                            gx[j] += wv[i * cols + j] * g[i];
                        }
                    }
                    acc(&mut adj, self, *w, &gw);
                    acc(&mut adj, self, *x, &gx);
                }
                Op::MatTVec { w, x } => {
                    let xv = self.value(*x);
                    let wv = self.value(*w);
                    let rows = xv.len();
                    let cols = g.len();
                    let mut gw = vec![0.0; wv.len()];
                    let mut gx = vec![0.0; rows];
                    for i in 0..rows {
                        for j in 0..cols {
                            gw[i * cols + j] = xv[i] * g[j];
                            gx[i] += wv[i * cols + j] * g[j];
                        }
                    }
                    acc(&mut adj, self, *w, &gw);
                    acc(&mut adj, self, *x, &gx);
                }
                Op::Tanh(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[i].value)
                        .map(|(g, t)| g * (1.0 - t * t))
                        .collect();
                    acc(&mut adj, self, *a, &ga);
                }
                Op::Sigmoid(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[i].value)
                        .map(|(g, s)| g * s * (1.0 - s))
                        .collect();
                    acc(&mut adj, self, *a, &ga);
                }
                Op::Dot(a, b) => {
                    let ga: Vec<f64> = self.value(*b).iter().map(|y| g[0] * y).collect();
                    let gb: Vec<f64> = self.value(*a).iter().map(|x| g[0] * x).collect();
                    acc(&mut adj, self, *a, &ga);
                    acc(&mut adj, self, *b, &gb);
                }
                Op::TripleDot(u, r, v) => {
                    let (uv, rv, vv) = (self.value(*u), self.value(*r), self.value(*v));
                    let gu: Vec<f64> = rv.iter().zip(vv).map(|(r, v)| g[0] * r * v).collect();
                    let gr: Vec<f64> = uv.iter().zip(vv).map(|(u, v)| g[0] * u * v).collect();
                    let gv: Vec<f64> = uv.iter().zip(rv).map(|(u, r)| g[0] * u * r).collect();
                    acc(&mut adj, self, *u, &gu);
                    acc(&mut adj, self, *r, &gr);
                    acc(&mut adj, self, *v, &gv);
                }
                Op::SumSq(a) => {
                    let ga: Vec<f64> = self.value(*a).iter().map(|x| 2.0 * x * g[0]).collect();
                    acc(&mut adj, self, *a, &ga);
                }
                Op::Softmax(a) => {
                    let y = &self.nodes[i].value;
                    let dot: f64 = g.iter().zip(y).map(|(g, y)| g * y).sum();
                    let ga: Vec<f64> = g.iter().zip(y).map(|(g, y)| y * (g - dot)).collect();
                    acc(&mut adj, self, *a, &ga);
                }
                Op::WeightedSum { weights, vectors } => {
                    let wv = self.value(*weights);
                    let mut gw = vec![0.0; wv.len()];
                    for (k, vec_id) in vectors.iter().enumerate() {
                        gw[k] = g.iter().zip(self.value(*vec_id)).map(|(g, x)| g * x).sum();
                        let gv: Vec<f64> = g.iter().map(|g| g * wv[k]).collect();
                        acc(&mut adj, self, *vec_id, &gv);
                    }
                    acc(&mut adj, self, *weights, &gw);
                }
                Op::NllFromLogits { logits, class } => {
                    let p = softmax(self.value(*logits));
                    let gl: Vec<f64> = p
                        .iter()
                        .enumerate()
                        .map(|(j, pj)| g[0] * (pj - if j == *class { 1.0 } else { 0.0 }))
                        .collect();
                    acc(&mut adj, self, *logits, &gl);
                }
                Op::Relu(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(self.value(*a))
                        .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                        .collect();
                    acc(&mut adj, self, *a, &ga);
                }
            }
        }
    }
}

fn acc(adj: &mut [Option<Vec<f64>>], tape: &Tape, id: NodeId, g: &[f64]) {
    let slot = &mut adj[id.idx()];
    match slot {
        Some(buf) => {
            for (b, x) in buf.iter_mut().zip(g) {
                *b += x;
            }
        }
        None => {
            debug_assert_eq!(tape.value(id).len(), g.len());
            *slot = Some(g.to_vec());
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Per-tape memo of parameter leaves so shared tensors enter the graph once.
#[derive(Default)]
pub struct LeafCache {
    whole: BTreeMap<usize, NodeId>,
    rows: BTreeMap<(usize, usize), NodeId>,
}

impl LeafCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn leaf(&mut self, tape: &mut Tape, store: &ParamStore, id: ParamId) -> NodeId {
        *self
            .whole
            .entry(id.0)
            .or_insert_with(|| tape.param(store, id))
    }

    pub fn row_leaf(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        id: ParamId,
        row: usize,
    ) -> NodeId {
        *self
            .rows
            .entry((id.0, row))
            .or_insert_with(|| tape.param_row(store, id, row))
    }
}
