//! Tape-based reverse-mode automatic differentiation over vectors.
//!
//! Every node holds a 1-D value. Parameters are not copied onto the tape:
//! ops such as [`Graph::linear`] and [`Graph::row`] read weights straight
//! from the borrowed [`ParamSet`] and [`Graph::backward`] accumulates their
//! gradients into a gradient set with the same layout.

use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{axpy, dot, Gradients, ParamSet, Real};
use crate::error::{Error, Result};

/// Index of a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Row { table: usize, row: usize },
    Linear { w: usize, b: Option<usize>, x: NodeId },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Slice { x: NodeId, start: usize },
    Concat(Vec<NodeId>),
    Dots { keys: Vec<NodeId>, query: NodeId },
    Softmax(NodeId),
    Mix { weights: NodeId, values: Vec<NodeId> },
    CrossEntropy { logits: NodeId, target: usize },
    Mean(Vec<NodeId>),
}

#[derive(Debug)]
struct Node<T> {
    value: Vec<T>,
    op: Op,
    /// Softmax probabilities kept for the cross-entropy backward pass.
    aux: Vec<T>,
}

pub struct Graph<'p, T> {
    params: &'p ParamSet<T>,
    nodes: Vec<Node<T>>,
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new(params: &'p ParamSet<T>) -> Self {
        Graph {
            params,
            nodes: Vec::with_capacity(512),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[T] {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Vec<T>, op: Op) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            aux: Vec::new(),
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Vec<T>) -> NodeId {
        self.push(value, Op::Constant)
    }

    /// Row `row` of parameter matrix `table` (embedding lookup).
    pub fn row(&mut self, table: usize, row: usize) -> NodeId {
        let value = self.params.tensors()[table].row(row).to_vec();
        self.push(value, Op::Row { table, row })
    }

    /// `W x + b` with `W` of shape `[out, in]`.
    pub fn linear(&mut self, w: usize, b: Option<usize>, x: NodeId) -> NodeId {
        let wt = &self.params.tensors()[w];
        let out = wt.shape()[0];
        let xv = &self.nodes[x.0].value;
        let mut y: Vec<T> = match b {
            Some(b) => self.params.tensors()[b].data().to_vec(),
            None => vec![T::zero(); out],
        };
        for (o, yo) in y.iter_mut().enumerate() {
            *yo += dot(wt.row(o), xv);
        }
        self.push(y, Op::Linear { w, b, x })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.zip(a, b, |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.zip(a, b, |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.zip(a, b, |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    fn zip(&self, a: NodeId, b: NodeId, f: impl Fn(T, T) -> T) -> Vec<T> {
        let (a, b) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0]
            .value
            .iter()
            .map(|&x| T::one() / (T::one() + (-x).exp()))
            .collect();
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.iter().map(|x| x.tanh()).collect();
        self.push(v, Op::Tanh(a))
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.nodes[x.0].value[start..start + len].to_vec();
        self.push(v, Op::Slice { x, start })
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut v = Vec::new();
        for p in parts {
            v.extend_from_slice(&self.nodes[p.0].value);
        }
        self.push(v, Op::Concat(parts.to_vec()))
    }

    /// Scores `keys[j] · query` for every key.
    pub fn dots(&mut self, keys: &[NodeId], query: NodeId) -> NodeId {
        let q = &self.nodes[query.0].value;
        let v = keys.iter().map(|k| dot(&self.nodes[k.0].value, q)).collect();
        self.push(
            v,
            Op::Dots {
                keys: keys.to_vec(),
                query,
            },
        )
    }

    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let v = softmax(&self.nodes[a.0].value);
        self.push(v, Op::Softmax(a))
    }

    /// `Σ_j weights[j] · values[j]`
    pub fn mix(&mut self, weights: NodeId, values: &[NodeId]) -> NodeId {
        let w = &self.nodes[weights.0].value;
        let dim = self.nodes[values[0].0].value.len();
        let mut out = vec![T::zero(); dim];
        for (wj, v) in w.iter().zip(values) {
            axpy(*wj, &self.nodes[v.0].value, &mut out);
        }
        self.push(
            out,
            Op::Mix {
                weights,
                values: values.to_vec(),
            },
        )
    }

    /// Negative log-likelihood of `target` under `softmax(logits)`.
    pub fn cross_entropy(&mut self, logits: NodeId, target: usize) -> NodeId {
        let z = &self.nodes[logits.0].value;
        let probs = softmax(z);
        let loss = log_sum_exp(z) - z[target];
        let id = self.push(vec![loss], Op::CrossEntropy { logits, target });
        self.nodes[id.0].aux = probs;
        id
    }

    /// Mean of scalar nodes.
    pub fn mean(&mut self, scalars: &[NodeId]) -> NodeId {
        let n = T::lit(scalars.len() as f64);
        let sum: T = scalars.iter().map(|s| self.nodes[s.0].value[0]).sum();
        self.push(vec![sum / n], Op::Mean(scalars.to_vec()))
    }

    /// Back-propagates from scalar node `root`, adding parameter gradients
    /// into `grads`.
    pub fn backward(&self, root: NodeId, grads: &mut Gradients<T>) -> Result<()> {
        self.params.check_layout(grads)?;
        let mut g: Vec<Vec<T>> = (0..=root.0).map(|_| Vec::new()).collect();
        g[root.0] = vec![T::one()];
        let pg = grads.tensors_mut();

        fn acc<T: Real>(g: &mut [Vec<T>], id: NodeId, len: usize) -> &mut Vec<T> {
            let slot = &mut g[id.0];
            if slot.is_empty() {
                *slot = vec![T::zero(); len];
            }
            slot
        }

        for i in (0..=root.0).rev() {
            if g[i].is_empty() {
                continue;
            }
            let gi = core::mem::take(&mut g[i]);
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Row { table, row } => {
                    let cols = gi.len();
                    let dst = &mut pg[*table].data_mut()[row * cols..(row + 1) * cols];
                    axpy(T::one(), &gi, dst);
                }
                Op::Linear { w, b, x } => {
                    let wt = &self.params.tensors()[*w];
                    let xv = &self.nodes[x.0].value;
                    if let Some(b) = b {
                        axpy(T::one(), &gi, pg[*b].data_mut());
                    }
                    let cols = xv.len();
                    {
                        let gw = pg[*w].data_mut();
                        for (o, &go) in gi.iter().enumerate() {
                            if go != T::zero() {
                                axpy(go, xv, &mut gw[o * cols..(o + 1) * cols]);
                            }
                        }
                    }
                    let gx = acc(&mut g, *x, cols);
                    for (o, &go) in gi.iter().enumerate() {
                        if go != T::zero() {
                            axpy(go, wt.row(o), gx);
                        }
                    }
                }
                Op::Add(a, b) => {
                    axpy(T::one(), &gi, acc(&mut g, *a, gi.len()));
                    axpy(T::one(), &gi, acc(&mut g, *b, gi.len()));
                }
                Op::Sub(a, b) => {
                    axpy(T::one(), &gi, acc(&mut g, *a, gi.len()));
                    axpy(-T::one(), &gi, acc(&mut g, *b, gi.len()));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga = acc(&mut g, *a, gi.len());
                    for k in 0..gi.len() {
                        ga[k] += gi[k] * bv[k];
                    }
                    let gb = acc(&mut g, *b, gi.len());
                    for k in 0..gi.len() {
                        gb[k] += gi[k] * av[k];
                    }
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let ga = acc(&mut g, *a, gi.len());
                    for k in 0..gi.len() {
                        ga[k] += gi[k] * y[k] * (T::one() - y[k]);
                    }
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let ga = acc(&mut g, *a, gi.len());
                    for k in 0..gi.len() {
                        ga[k] += gi[k] * (T::one() - y[k] * y[k]);
                    }
                }
                Op::Slice { x, start } => {
                    let len = self.nodes[x.0].value.len();
                    let gx = acc(&mut g, *x, len);
                    axpy(T::one(), &gi, &mut gx[*start..*start + gi.len()]);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let len = self.nodes[p.0].value.len();
                        axpy(T::one(), &gi[off..off + len], acc(&mut g, *p, len));
                        off += len;
                    }
                }
                Op::Dots { keys, query } => {
                    let q = &self.nodes[query.0].value;
                    let dim = q.len();
                    for (j, k) in keys.iter().enumerate() {
                        axpy(gi[j], q, acc(&mut g, *k, dim));
                    }
                    let gq = acc(&mut g, *query, dim);
                    for (j, k) in keys.iter().enumerate() {
                        axpy(gi[j], &self.nodes[k.0].value, gq);
                    }
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let s = dot(&gi, y);
                    let ga = acc(&mut g, *a, gi.len());
                    for k in 0..gi.len() {
                        ga[k] += y[k] * (gi[k] - s);
                    }
                }
                Op::Mix { weights, values } => {
                    let w = &self.nodes[weights.0].value;
                    let dim = gi.len();
                    let gw: Vec<T> = values
                        .iter()
                        .map(|v| dot(&gi, &self.nodes[v.0].value))
                        .collect();
                    axpy(T::one(), &gw, acc(&mut g, *weights, values.len()));
                    for (j, v) in values.iter().enumerate() {
                        axpy(w[j], &gi, acc(&mut g, *v, dim));
                    }
                }
                Op::CrossEntropy { logits, target } => {
                    let p = &node.aux;
                    let gz = acc(&mut g, *logits, p.len());
                    axpy(gi[0], p, gz);
                    gz[*target] -= gi[0];
                }
                Op::Mean(parts) => {
                    let share = gi[0] / T::lit(parts.len() as f64);
                    for p in parts {
                        acc(&mut g, *p, 1)[0] += share;
                    }
                }
            }
        }
        if !grads.is_finite() {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        Ok(())
    }
}

pub(crate) fn log_sum_exp<T: Real>(z: &[T]) -> T {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let s: T = z.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

pub(crate) fn softmax<T: Real>(z: &[T]) -> Vec<T> {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = z.iter().map(|&x| (x - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|x| x / s).collect()
}
