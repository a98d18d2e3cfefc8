//! Reverse-mode automatic differentiation over [`Matrix`] values.
//!
//! A [`Tape`] records every operation of one forward pass. Parameters are
//! read from a borrowed [`Params`]; [`Tape::backward`] returns gradients for
//! all of them. Losses with hand-derived gradients plug in through
//! [`CustomBackward`].

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::params::{Gradients, ParamId, Params};
use crate::math::{exp, sqrt, tanh};
use crate::tensor::dot;
use crate::Matrix;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Gradient rule for an operation computed outside the tape.
pub trait CustomBackward {
    /// Gradients of the inputs (in registration order) given the gradient of
    /// the output. `None` means zero.
    fn backward(&self, out_grad: &Matrix) -> Vec<Option<Matrix>>;
}

/// Sequence layout for batched self-attention: `batch` sequences of
/// `len` rows each, stacked; `key_mask[b * len + t]` is false at padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionLayout {
    pub batch: usize,
    pub len: usize,
    pub heads: usize,
    pub key_mask: Vec<bool>,
}

enum Op {
    Constant,
    Param(ParamId),
    Gather { param: ParamId, ids: Vec<usize> },
    Add(Var, Var),
    AddRowBias(Var, Var),
    MatMul(Var, Var),
    MatMulTransB(Var, Var),
    Scale(Var, f64),
    LayerNorm { x: Var, g: Var, b: Var, xhat: Matrix, inv_std: Vec<f64> },
    Gelu(Var),
    Attention { q: Var, k: Var, v: Var, layout: AttentionLayout, probs: Vec<f64> },
    SelectRows { x: Var, rows: Vec<usize> },
    MeanPool { x: Var, groups: Vec<Vec<usize>> },
    SoftmaxCrossEntropy { logits: Var, targets: Vec<usize>, weights: Vec<f64>, probs: Matrix },
    WeightedSum(Vec<(Var, f64)>),
    Custom { inputs: Vec<Var>, backward: Box<dyn CustomBackward> },
}

struct Node {
    value: Matrix,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p Params,
    nodes: Vec<Node>,
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_C: f64 = 0.044_715;

impl<'p> Tape<'p> {
    pub fn new(params: &'p Params) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p Params {
        self.params
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        match self.nodes[v.0].op {
            Op::Param(id) => self.params.get(id),
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Constant)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.push(Matrix::zeros(0, 0), Op::Param(id))
    }

    /// Rows `ids` of a parameter matrix. Panics on an out-of-range id.
    pub fn gather(&mut self, param: ParamId, ids: Vec<usize>) -> Var {
        let table = self.params.get(param);
        let mut out = Matrix::zeros(ids.len(), table.cols());
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(table.row(id));
        }
        self.push(out, Op::Gather { param, ids })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b))
    }

    /// `x + 1·b` for a `1×D` row `b`.
    pub fn add_row_bias(&mut self, x: Var, b: Var) -> Var {
        let mut out = self.value(x).clone();
        let bias = self.value(b);
        assert_eq!(bias.shape(), (1, out.cols()), "bias shape");
        for r in 0..out.rows() {
            for (o, bv) in out.row_mut(r).iter_mut().zip(bias.data()) {
                *o += bv;
            }
        }
        self.push(out, Op::AddRowBias(x, b))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul_t(self.value(b));
        self.push(out, Op::MatMulTransB(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).scaled(s);
        self.push(out, Op::Scale(a, s))
    }

    /// Row-wise layer normalisation with `1×D` scale `g` and offset `b`.
    pub fn layer_norm(&mut self, x: Var, g: Var, b: Var) -> Var {
        let xv = self.value(x);
        let (n, d) = xv.shape();
        let mut xhat = Matrix::zeros(n, d);
        let mut inv_std = vec![0.0; n];
        for r in 0..n {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / sqrt(var + LAYER_NORM_EPS);
            inv_std[r] = is;
            for (h, v) in xhat.row_mut(r).iter_mut().zip(row) {
                *h = (v - mean) * is;
            }
        }
        let gv = self.value(g).data();
        let bv = self.value(b).data();
        let mut out = xhat.clone();
        for r in 0..n {
            for ((o, gi), bi) in out.row_mut(r).iter_mut().zip(gv).zip(bv) {
                *o = *o * gi + bi;
            }
        }
        self.push(out, Op::LayerNorm { x, g, b, xhat, inv_std })
    }

    /// Tanh approximation of GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            let u = SQRT_2_OVER_PI * (*v + GELU_C * *v * *v * *v);
            *v = 0.5 * *v * (1.0 + tanh(u));
        }
        self.push(out, Op::Gelu(x))
    }

    /// Multi-head scaled dot-product attention within each sequence.
    /// Masked keys are skipped outright, so their values cannot reach any
    /// output.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, layout: AttentionLayout) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let (n, d) = qv.shape();
        let AttentionLayout { batch, len, heads, .. } = layout;
        assert_eq!(n, batch * len, "attention rows");
        assert_eq!(d % heads, 0, "hidden size not divisible by heads");
        let dh = d / heads;
        let scale = 1.0 / sqrt(dh as f64);
        let mut out = Matrix::zeros(n, d);
        let mut probs = vec![0.0; batch * heads * len * len];
        let mut scores = vec![0.0; len];
        for b in 0..batch {
            let keys: Vec<usize> = (0..len).filter(|&t| layout.key_mask[b * len + t]).collect();
            for h in 0..heads {
                let cols = h * dh..(h + 1) * dh;
                for i in 0..len {
                    let qi = &qv.row(b * len + i)[cols.clone()];
                    let mut max = f64::NEG_INFINITY;
                    for &j in &keys {
                        let s = dot(qi, &kv.row(b * len + j)[cols.clone()]) * scale;
                        scores[j] = s;
                        max = max.max(s);
                    }
                    let mut z = 0.0;
                    for &j in &keys {
                        scores[j] = exp(scores[j] - max);
                        z += scores[j];
                    }
                    let base = ((b * heads + h) * len + i) * len;
                    let out_row = &mut out.row_mut(b * len + i)[cols.clone()];
                    for &j in &keys {
                        let p = scores[j] / z;
                        probs[base + j] = p;
                        for (o, x) in out_row.iter_mut().zip(&vv.row(b * len + j)[cols.clone()]) {
                            *o += p * x;
                        }
                    }
                }
            }
        }
        self.push(out, Op::Attention { q, k, v, layout, probs })
    }

    pub fn select_rows(&mut self, x: Var, rows: Vec<usize>) -> Var {
        let xv = self.value(x);
        let mut out = Matrix::zeros(rows.len(), xv.cols());
        for (r, &src) in rows.iter().enumerate() {
            out.row_mut(r).copy_from_slice(xv.row(src));
        }
        self.push(out, Op::SelectRows { x, rows })
    }

    /// Output row `r` is the mean of the rows of `x` listed in `groups[r]`;
    /// an empty group gives a zero row.
    pub fn mean_pool(&mut self, x: Var, groups: Vec<Vec<usize>>) -> Var {
        let xv = self.value(x);
        let mut out = Matrix::zeros(groups.len(), xv.cols());
        for (r, g) in groups.iter().enumerate() {
            if g.is_empty() {
                continue;
            }
            let inv = 1.0 / g.len() as f64;
            let row = out.row_mut(r);
            for &src in g {
                for (o, v) in row.iter_mut().zip(xv.row(src)) {
                    *o += v;
                }
            }
            row.iter_mut().for_each(|o| *o *= inv);
        }
        self.push(out, Op::MeanPool { x, groups })
    }

    /// `Σ_r weights[r] · CE(softmax(logits[r]), targets[r])` as a `1×1` value.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: Vec<usize>, weights: Vec<f64>) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.rows(), targets.len(), "one target per row");
        assert_eq!(weights.len(), targets.len(), "one weight per row");
        let mut probs = lv.clone();
        let mut loss = 0.0;
        for (r, (&t, &w)) in targets.iter().zip(&weights).enumerate() {
            let row = probs.row_mut(r);
            let lse = crate::math::softmax_in_place(row);
            loss += w * (lse - lv.get(r, t));
        }
        self.push(Matrix::scalar(loss), Op::SoftmaxCrossEntropy { logits, targets, weights, probs })
    }

    /// `Σ w · x` over `1×1` values.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Var {
        let s = terms.iter().map(|&(v, w)| w * self.value(v).item()).sum();
        self.push(Matrix::scalar(s), Op::WeightedSum(terms.to_vec()))
    }

    pub fn custom(&mut self, value: Matrix, inputs: Vec<Var>, backward: Box<dyn CustomBackward>) -> Var {
        self.push(value, Op::Custom { inputs, backward })
    }

    /// Gradients of the `1×1` node `root` with respect to every parameter.
    pub fn backward(&self, root: Var) -> Gradients {
        let mut grads = self.params.zeros_like();
        let mut adj: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[root.0] = Some(Matrix::filled(1, 1, 1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => grads.get_mut(*id).add_assign(&g),
                Op::Gather { param, ids } => {
                    let dst = grads.get_mut(*param);
                    for (r, &id) in ids.iter().enumerate() {
                        for (d, s) in dst.row_mut(id).iter_mut().zip(g.row(r)) {
                            *d += s;
                        }
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, *a, &g);
                    accumulate_owned(&mut adj, *b, g);
                }
                Op::AddRowBias(x, b) => {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (d, s) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *d += s;
                        }
                    }
                    accumulate_owned(&mut adj, *b, gb);
                    accumulate_owned(&mut adj, *x, g);
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&g);
                    accumulate_owned(&mut adj, *a, ga);
                    accumulate_owned(&mut adj, *b, gb);
                }
                Op::MatMulTransB(a, b) => {
                    let ga = g.matmul(self.value(*b));
                    let gb = g.t_matmul(self.value(*a));
                    accumulate_owned(&mut adj, *a, ga);
                    accumulate_owned(&mut adj, *b, gb);
                }
                Op::Scale(a, s) => accumulate_owned(&mut adj, *a, g.scaled(*s)),
                Op::LayerNorm { x, g: gv, b, xhat, inv_std } => {
                    let gamma = self.value(*gv).data();
                    let (n, d) = xhat.shape();
                    let mut dgamma = Matrix::zeros(1, d);
                    let mut dbeta = Matrix::zeros(1, d);
                    let mut dx = Matrix::zeros(n, d);
                    let mut dxhat = vec![0.0; d];
                    for r in 0..n {
                        let gr = g.row(r);
                        let hr = xhat.row(r);
                        for c in 0..d {
                            dgamma.data_mut()[c] += gr[c] * hr[c];
                            dbeta.data_mut()[c] += gr[c];
                            dxhat[c] = gr[c] * gamma[c];
                        }
                        let mean_d = dxhat.iter().sum::<f64>() / d as f64;
                        let mean_dh = dot(&dxhat, hr) / d as f64;
                        for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
                            *o = inv_std[r] * (dxhat[c] - mean_d - hr[c] * mean_dh);
                        }
                    }
                    accumulate_owned(&mut adj, *x, dx);
                    accumulate_owned(&mut adj, *gv, dgamma);
                    accumulate_owned(&mut adj, *b, dbeta);
                }
                Op::Gelu(x) => {
                    let mut dx = g;
                    for (d, &v) in dx.data_mut().iter_mut().zip(self.value(*x).data()) {
                        let u = SQRT_2_OVER_PI * (v + GELU_C * v * v * v);
                        let t = tanh(u);
                        let du = SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_C * v * v);
                        *d *= 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
                    }
                    accumulate_owned(&mut adj, *x, dx);
                }
                Op::Attention { q, k, v, layout, probs } => {
                    let (dq, dk, dv) = self.attention_backward(&g, *q, *k, *v, layout, probs);
                    accumulate_owned(&mut adj, *q, dq);
                    accumulate_owned(&mut adj, *k, dk);
                    accumulate_owned(&mut adj, *v, dv);
                }
                Op::SelectRows { x, rows } => {
                    let xv = self.value(*x);
                    let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                    for (r, &src) in rows.iter().enumerate() {
                        for (d, s) in dx.row_mut(src).iter_mut().zip(g.row(r)) {
                            *d += s;
                        }
                    }
                    accumulate_owned(&mut adj, *x, dx);
                }
                Op::MeanPool { x, groups } => {
                    let xv = self.value(*x);
                    let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                    for (r, grp) in groups.iter().enumerate() {
                        if grp.is_empty() {
                            continue;
                        }
                        let inv = 1.0 / grp.len() as f64;
                        for &src in grp {
                            for (d, s) in dx.row_mut(src).iter_mut().zip(g.row(r)) {
                                *d += inv * s;
                            }
                        }
                    }
                    accumulate_owned(&mut adj, *x, dx);
                }
                Op::SoftmaxCrossEntropy { logits, targets, weights, probs } => {
                    let up = g.item();
                    let mut dl = probs.clone();
                    for (r, (&t, &w)) in targets.iter().zip(weights).enumerate() {
                        let row = dl.row_mut(r);
                        row[t] -= 1.0;
                        row.iter_mut().for_each(|x| *x *= up * w);
                    }
                    accumulate_owned(&mut adj, *logits, dl);
                }
                Op::WeightedSum(terms) => {
                    let up = g.item();
                    for &(v, w) in terms {
                        if w != 0.0 {
                            accumulate_owned(&mut adj, v, Matrix::scalar(up * w));
                        }
                    }
                }
                Op::Custom { inputs, backward } => {
                    for (v, gi) in inputs.iter().zip(backward.backward(&g)) {
                        if let Some(gi) = gi {
                            accumulate_owned(&mut adj, *v, gi);
                        }
                    }
                }
            }
        }
        grads
    }

    fn attention_backward(
        &self,
        g: &Matrix,
        q: Var,
        k: Var,
        v: Var,
        layout: &AttentionLayout,
        probs: &[f64],
    ) -> (Matrix, Matrix, Matrix) {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let (n, d) = qv.shape();
        let (batch, len, heads) = (layout.batch, layout.len, layout.heads);
        let dh = d / heads;
        let scale = 1.0 / sqrt(dh as f64);
        let mut dq = Matrix::zeros(n, d);
        let mut dk = Matrix::zeros(n, d);
        let mut dv = Matrix::zeros(n, d);
        let mut dp = vec![0.0; len];
        for b in 0..batch {
            let keys: Vec<usize> = (0..len).filter(|&t| layout.key_mask[b * len + t]).collect();
            for h in 0..heads {
                let cols = h * dh..(h + 1) * dh;
                for i in 0..len {
                    let base = ((b * heads + h) * len + i) * len;
                    let go = &g.row(b * len + i)[cols.clone()];
                    let mut inner = 0.0;
                    for &j in &keys {
                        let p = probs[base + j];
                        dp[j] = dot(go, &vv.row(b * len + j)[cols.clone()]);
                        inner += p * dp[j];
                        for (o, x) in dv.row_mut(b * len + j)[cols.clone()].iter_mut().zip(go) {
                            *o += p * x;
                        }
                    }
                    for &j in &keys {
                        let ds = probs[base + j] * (dp[j] - inner) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        let kj = &kv.row(b * len + j)[cols.clone()];
                        for (o, x) in dq.row_mut(b * len + i)[cols.clone()].iter_mut().zip(kj) {
                            *o += ds * x;
                        }
                        let qi = &qv.row(b * len + i)[cols.clone()];
                        for (o, x) in dk.row_mut(b * len + j)[cols.clone()].iter_mut().zip(qi) {
                            *o += ds * x;
                        }
                    }
                }
            }
        }
        (dq, dk, dv)
    }
}

fn accumulate(adj: &mut [Option<Matrix>], v: Var, g: &Matrix) {
    match &mut adj[v.0] {
        Some(a) => a.add_assign(g),
        slot => *slot = Some(g.clone()),
    }
}

fn accumulate_owned(adj: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut adj[v.0] {
        Some(a) => a.add_assign(&g),
        slot => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::grad_check::{grad_check, GradCheckOptions};
    use crate::rng::{stream, Stream};
    use rand_distr::{Distribution, Normal};

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = stream(seed, Stream::Init, &[]);
        let n = Normal::new(0.0, 1.0).unwrap();
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| n.sample(&mut rng)).collect())
    }

    #[test]
    fn every_op_passes_finite_differences() {
        let mut p = Params::new();
        let x = p.add("x", random(6, 4, 1));
        let w = p.add("w", random(4, 4, 2));
        let wk = p.add("wk", random(4, 4, 3));
        let b = p.add("b", random(1, 4, 4));
        let g = p.add("g", random(1, 4, 5));
        let emb = p.add("emb", random(5, 4, 6));
        let f = |params: &Params| {
            let mut t = Tape::new(params);
            let xv = t.param(x);
            let e = t.gather(emb, vec![0, 3, 3, 1, 4, 2]);
            let h = t.add(xv, e);
            let gv = t.param(g);
            let bv = t.param(b);
            let h = t.layer_norm(h, gv, bv);
            let wv = t.param(w);
            let wkv = t.param(wk);
            let q = t.matmul(h, wv);
            let k = t.matmul(h, wkv);
            let layout = AttentionLayout {
                batch: 2,
                len: 3,
                heads: 2,
                key_mask: vec![true, true, false, true, true, true],
            };
            let a = t.attention(q, k, h, layout);
            let a = t.gelu(a);
            let a = t.add_row_bias(a, bv);
            let a = t.scale(a, 0.7);
            let pooled = t.mean_pool(a, vec![vec![0, 1], vec![3], vec![], vec![4, 5, 2]]);
            let sel = t.select_rows(pooled, vec![0, 1, 3, 3]);
            let ev = t.param(emb);
            let logits = t.matmul_t(sel, ev);
            let ce = t.softmax_cross_entropy(logits, vec![1, 0, 4, 2], vec![0.25, 0.25, 0.5, 0.1]);
            let total = t.weighted_sum(&[(ce, 1.5)]);
            (t.value(total).item(), t.backward(total))
        };
        let report = grad_check(f, &mut p, &GradCheckOptions::default());
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn masked_keys_cannot_leak() {
        let mut p = Params::new();
        let x = p.add("x", random(4, 4, 9));
        let run = |params: &Params| {
            let mut t = Tape::new(params);
            let xv = t.param(x);
            let layout = AttentionLayout {
                batch: 1,
                len: 4,
                heads: 2,
                key_mask: vec![true, true, true, false],
            };
            let a = t.attention(xv, xv, xv, layout);
            t.value(a).clone()
        };
        let before = run(&p);
        p.get_mut(x).row_mut(3).iter_mut().for_each(|v| *v += 10.0);
        let after = run(&p);
        for r in 0..3 {
            assert_eq!(before.row(r), after.row(r));
        }
    }
}
