//! Minimal reverse-mode tape over `Mat`, sized for tiny token mixers.
//!
//! Parameters live outside the tape in a `ParamSet`; ops reference them by
//! index, and `backward` accumulates into a caller-owned gradient buffer that
//! parallels the set. Every loop runs in a fixed order, so gradients are
//! bit-deterministic for a given graph.

use crate::error::{Error, Result};
use crate::mat::{matmul_into, Mat};
use crate::real::Real;
use std::rc::Rc;

pub type Id = usize;

/// Named parameter tensors in fixed creation order; that order defines the
/// checkpoint layout and the optimizer state layout.
#[derive(Debug, Clone)]
pub struct ParamSet<R> {
    names: Vec<String>,
    mats: Vec<Mat<R>>,
}

impl<R: Real> ParamSet<R> {
    pub fn new() -> ParamSet<R> {
        ParamSet { names: Vec::new(), mats: Vec::new() }
    }

    pub fn add(&mut self, name: &str, mat: Mat<R>) -> usize {
        assert!(
            !self.names.iter().any(|n| n == name),
            "duplicate parameter name {name}"
        );
        self.names.push(name.to_string());
        self.mats.push(mat);
        self.mats.len() - 1
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn get(&self, i: usize) -> &Mat<R> {
        &self.mats[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Mat<R> {
        &mut self.mats[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat<R>)> {
        self.names.iter().map(|n| n.as_str()).zip(self.mats.iter())
    }

    /// Zeroed gradient buffer shaped like this set.
    pub fn zeros_like(&self) -> Vec<Mat<R>> {
        self.mats.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect()
    }

    pub fn total_scalars(&self) -> usize {
        self.mats.iter().map(|m| m.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.mats.iter().all(|m| m.all_finite())
    }

    pub fn cast<S: Real>(&self) -> ParamSet<S> {
        ParamSet {
            names: self.names.clone(),
            mats: self.mats.iter().map(|m| m.cast()).collect(),
        }
    }
}

/// Which keys each query may attend. Row-major n x n, query i attends key j
/// iff `allowed[i * n + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttnMask {
    pub n: usize,
    pub allowed: Vec<bool>,
}

impl AttnMask {
    pub fn full(n: usize) -> AttnMask {
        AttnMask { n, allowed: vec![true; n * n] }
    }

    #[inline]
    pub fn is_allowed(&self, q: usize, k: usize) -> bool {
        self.allowed[q * self.n + k]
    }
}

enum Op<R> {
    Input,
    Linear { x: Id, w: usize, b: usize },
    Silu { x: Id },
    Attention { q: Id, k: Id, v: Id, probs: Mat<R>, mask: Rc<AttnMask> },
    Add { a: Id, b: Id },
    PosAdd { x: Id, p: usize },
    RowSlice { x: Id, row: usize },
    ConcatConstLeft { left_cols: usize, right: Id },
}

struct Node<R> {
    value: Mat<R>,
    grad: Option<Mat<R>>,
    op: Op<R>,
}

pub struct Tape<R: Real> {
    nodes: Vec<Node<R>>,
}

impl<R: Real> Tape<R> {
    pub fn new() -> Tape<R> {
        Tape { nodes: Vec::with_capacity(64) }
    }

    fn push(&mut self, value: Mat<R>, op: Op<R>) -> Id {
        self.nodes.push(Node { value, grad: None, op });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: Id) -> &Mat<R> {
        &self.nodes[id].value
    }

    pub fn input(&mut self, value: Mat<R>) -> Id {
        self.push(value, Op::Input)
    }

    /// y = x W + b, with W the `w` param (k x m) and b the `b` param (1 x m).
    pub fn linear(&mut self, params: &ParamSet<R>, x: Id, w: usize, b: usize) -> Id {
        let xv = &self.nodes[x].value;
        let wv = params.get(w);
        let bv = params.get(b);
        assert_eq!(bv.rows, 1, "bias must be a row vector");
        assert_eq!(bv.cols, wv.cols, "bias width must match output width");
        let mut out = Mat::zeros(xv.rows, wv.cols);
        matmul_into(&mut out, xv, wv);
        for i in 0..out.rows {
            for (o, &bb) in out.row_mut(i).iter_mut().zip(bv.row(0)) {
                *o += bb;
            }
        }
        self.push(out, Op::Linear { x, w, b })
    }

    pub fn silu(&mut self, x: Id) -> Id {
        let xv = &self.nodes[x].value;
        let mut out = xv.clone();
        for v in out.data.iter_mut() {
            let s = R::ONE / (R::ONE + (-*v).exp());
            *v = *v * s;
        }
        self.push(out, Op::Silu { x })
    }

    pub fn add(&mut self, a: Id, b: Id) -> Id {
        let av = &self.nodes[a].value;
        let bv = &self.nodes[b].value;
        assert_eq!((av.rows, av.cols), (bv.rows, bv.cols));
        let mut out = av.clone();
        for (o, &v) in out.data.iter_mut().zip(&bv.data) {
            *o += v;
        }
        self.push(out, Op::Add { a, b })
    }

    /// y = x + P[i, :] for each row i; P is the positional table param.
    pub fn pos_add(&mut self, params: &ParamSet<R>, x: Id, p: usize) -> Id {
        let xv = &self.nodes[x].value;
        let pv = params.get(p);
        assert!(pv.rows >= xv.rows, "positional table shorter than sequence");
        assert_eq!(pv.cols, xv.cols);
        let mut out = xv.clone();
        for i in 0..out.rows {
            for (o, &pp) in out.row_mut(i).iter_mut().zip(pv.row(i)) {
                *o += pp;
            }
        }
        self.push(out, Op::PosAdd { x, p })
    }

    /// Single-head scaled dot-product attention under a mask.
    pub fn attention(&mut self, q: Id, k: Id, v: Id, mask: Rc<AttnMask>) -> Id {
        let qv = &self.nodes[q].value;
        let kv = &self.nodes[k].value;
        let vv = &self.nodes[v].value;
        let n = qv.rows;
        assert_eq!(kv.rows, n);
        assert_eq!(vv.rows, n);
        assert_eq!(mask.n, n, "mask size must match sequence length");
        assert_eq!(qv.cols, kv.cols);
        let scale = R::from_f64(1.0 / (qv.cols as f64).sqrt());
        let mut probs = Mat::zeros(n, n);
        for i in 0..n {
            // Max-shifted softmax over the allowed keys, in key order.
            let mut m = f64::NEG_INFINITY;
            for j in 0..n {
                if mask.is_allowed(i, j) {
                    let mut s = R::ZERO;
                    for (a, b) in qv.row(i).iter().zip(kv.row(j)) {
                        s += *a * *b;
                    }
                    let s = (s * scale).to_f64();
                    *probs.at_mut(i, j) = R::from_f64(s);
                    if s > m {
                        m = s;
                    }
                }
            }
            assert!(m.is_finite(), "attention row {i} has no allowed key");
            let mut total = R::ZERO;
            for j in 0..n {
                if mask.is_allowed(i, j) {
                    let e = (*probs.at_mut(i, j) - R::from_f64(m)).exp();
                    *probs.at_mut(i, j) = e;
                    total += e;
                } else {
                    *probs.at_mut(i, j) = R::ZERO;
                }
            }
            for j in 0..n {
                *probs.at_mut(i, j) = probs.at(i, j) / total;
            }
        }
        let mut out = Mat::zeros(n, vv.cols);
        for i in 0..n {
            for j in 0..n {
                let p = probs.at(i, j);
                if p != R::ZERO {
                    let vj = vv.row(j);
                    for (o, &vvj) in out.row_mut(i).iter_mut().zip(vj) {
                        *o += p * vvj;
                    }
                }
            }
        }
        self.push(out, Op::Attention { q, k, v, probs, mask })
    }

    /// y[0, :] = x[row, :] as a 1 x c node.
    pub fn row_slice(&mut self, x: Id, row: usize) -> Id {
        let xv = &self.nodes[x].value;
        let out = Mat { rows: 1, cols: xv.cols, data: xv.row(row).to_vec() };
        self.push(out, Op::RowSlice { x, row })
    }

    /// y = [left | right] columnwise; `left` is constant, gradient flows only
    /// into `right`.
    pub fn concat_const_left(&mut self, left: &Mat<R>, right: Id) -> Id {
        let rv = &self.nodes[right].value;
        assert_eq!(left.rows, rv.rows);
        let mut out = Mat::zeros(left.rows, left.cols + rv.cols);
        for i in 0..left.rows {
            out.row_mut(i)[..left.cols].copy_from_slice(left.row(i));
            out.row_mut(i)[left.cols..].copy_from_slice(rv.row(i));
        }
        self.push(out, Op::ConcatConstLeft { left_cols: left.cols, right })
    }

    fn grad_buf(&mut self, id: Id) -> &mut Mat<R> {
        let (rows, cols) = (self.nodes[id].value.rows, self.nodes[id].value.cols);
        self.nodes[id].grad.get_or_insert_with(|| Mat::zeros(rows, cols))
    }

    /// Reverse pass. `seeds` adds dL/d node; gradients for parameters
    /// accumulate into `grads` (parallel to `params`), which is NOT zeroed
    /// here so batches can accumulate across elements.
    pub fn backward(
        &mut self,
        params: &ParamSet<R>,
        seeds: Vec<(Id, Mat<R>)>,
        grads: &mut [Mat<R>],
    ) -> Result<()> {
        assert_eq!(grads.len(), params.len());
        for (id, seed) in seeds {
            self.grad_buf(id).add_assign(&seed);
        }
        for id in (0..self.nodes.len()).rev() {
            let Some(dy) = self.nodes[id].grad.take() else {
                continue;
            };
            if !dy.all_finite() {
                return Err(Error::Numeric(format!("non-finite gradient at node {id}")));
            }
            // Work around the borrow of nodes[id] while mutating parents.
            let op = std::mem::replace(&mut self.nodes[id].op, Op::Input);
            match &op {
                Op::Input => {}
                Op::Linear { x, w, b } => {
                    let (x, w, b) = (*x, *w, *b);
                    let wv = params.get(w);
                    // dx[i, k] = dot(dy[i, :], W[k, :])
                    {
                        let dx = self.grad_buf(x);
                        for i in 0..dy.rows {
                            let dyi = dy.row(i);
                            let dxi = dx.row_mut(i);
                            for k in 0..wv.rows {
                                let mut s = R::ZERO;
                                for (a, b) in dyi.iter().zip(wv.row(k)) {
                                    s += *a * *b;
                                }
                                dxi[k] += s;
                            }
                        }
                    }
                    // dW[k, :] += x[i, k] * dy[i, :]; db += column sums.
                    let xv = &self.nodes[x].value;
                    let dw = &mut grads[w];
                    for i in 0..dy.rows {
                        let dyi = dy.row(i);
                        for k in 0..xv.cols {
                            let xik = xv.at(i, k);
                            for (o, &d) in dw.row_mut(k).iter_mut().zip(dyi) {
                                *o += xik * d;
                            }
                        }
                    }
                    let db = &mut grads[b];
                    for i in 0..dy.rows {
                        for (o, &d) in db.row_mut(0).iter_mut().zip(dy.row(i)) {
                            *o += d;
                        }
                    }
                }
                Op::Silu { x } => {
                    let x = *x;
                    let xv = self.nodes[x].value.clone();
                    let dx = self.grad_buf(x);
                    for ((o, &xi), &d) in dx.data.iter_mut().zip(&xv.data).zip(&dy.data) {
                        let s = R::ONE / (R::ONE + (-xi).exp());
                        *o += d * (s + xi * s * (R::ONE - s));
                    }
                }
                Op::Add { a, b } => {
                    let (a, b) = (*a, *b);
                    self.grad_buf(a).add_assign(&dy);
                    self.grad_buf(b).add_assign(&dy);
                }
                Op::PosAdd { x, p } => {
                    let (x, p) = (*x, *p);
                    self.grad_buf(x).add_assign(&dy);
                    let dp = &mut grads[p];
                    for i in 0..dy.rows {
                        for (o, &d) in dp.row_mut(i).iter_mut().zip(dy.row(i)) {
                            *o += d;
                        }
                    }
                }
                Op::Attention { q, k, v, probs, mask } => {
                    let (q, k, v) = (*q, *k, *v);
                    let n = probs.rows;
                    let qv = self.nodes[q].value.clone();
                    let kv = self.nodes[k].value.clone();
                    let vv = self.nodes[v].value.clone();
                    let scale = R::from_f64(1.0 / (qv.cols as f64).sqrt());
                    // dP[i, j] = dot(dy[i, :], V[j, :]); dV[j, :] += p_ij dy[i, :]
                    let mut dp = Mat::zeros(n, n);
                    {
                        let dv = self.grad_buf(v);
                        for i in 0..n {
                            let dyi = dy.row(i);
                            for j in 0..n {
                                let pij = probs.at(i, j);
                                let mut s = R::ZERO;
                                for (a, b) in dyi.iter().zip(vv.row(j)) {
                                    s += *a * *b;
                                }
                                *dp.at_mut(i, j) = s;
                                if pij != R::ZERO {
                                    for (o, &d) in dv.row_mut(j).iter_mut().zip(dyi) {
                                        *o += pij * d;
                                    }
                                }
                            }
                        }
                    }
                    // Softmax backward per row: dS = P * (dP - sum(P .* dP)).
                    let mut ds = Mat::zeros(n, n);
                    for i in 0..n {
                        let mut dot = R::ZERO;
                        for j in 0..n {
                            dot += probs.at(i, j) * dp.at(i, j);
                        }
                        for j in 0..n {
                            if mask.is_allowed(i, j) {
                                *ds.at_mut(i, j) = probs.at(i, j) * (dp.at(i, j) - dot);
                            }
                        }
                    }
                    {
                        let dq = self.grad_buf(q);
                        for i in 0..n {
                            for j in 0..n {
                                let d = ds.at(i, j) * scale;
                                if d != R::ZERO {
                                    for (o, &kk) in dq.row_mut(i).iter_mut().zip(kv.row(j)) {
                                        *o += d * kk;
                                    }
                                }
                            }
                        }
                    }
                    let dk = self.grad_buf(k);
                    for i in 0..n {
                        for j in 0..n {
                            let d = ds.at(i, j) * scale;
                            if d != R::ZERO {
                                for (o, &qq) in dk.row_mut(j).iter_mut().zip(qv.row(i)) {
                                    *o += d * qq;
                                }
                            }
                        }
                    }
                }
                Op::RowSlice { x, row } => {
                    let (x, row) = (*x, *row);
                    let dx = self.grad_buf(x);
                    for (o, &d) in dx.row_mut(row).iter_mut().zip(dy.row(0)) {
                        *o += d;
                    }
                }
                Op::ConcatConstLeft { left_cols, right } => {
                    let (lc, right) = (*left_cols, *right);
                    let dr = self.grad_buf(right);
                    for i in 0..dy.rows {
                        for (o, &d) in dr.row_mut(i).iter_mut().zip(&dy.row(i)[lc..]) {
                            *o += d;
                        }
                    }
                }
            }
            self.nodes[id].op = op;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_stream;

    fn rand_mat(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
        let mut rng = rng_stream(seed, 0);
        Mat {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.normal() * 0.5).collect(),
        }
    }

    /// Scalar loss 0.5 * sum(out^2) of a small graph; checks every parameter
    /// gradient against central finite differences.
    fn fd_check(
        build: impl Fn(&mut Tape<f64>, &ParamSet<f64>, &Mat<f64>) -> Id,
        params: ParamSet<f64>,
        input: Mat<f64>,
    ) {
        let mut params = params;
        let loss = |p: &ParamSet<f64>, inp: &Mat<f64>| -> f64 {
            let mut t = Tape::new();
            let out = build(&mut t, p, inp);
            let v = t.value(out);
            0.5 * v.data.iter().map(|x| x * x).sum::<f64>()
        };
        // Analytic gradient.
        let mut tape = Tape::new();
        let out = build(&mut tape, &params, &input);
        let seed = tape.value(out).clone();
        let mut grads = params.zeros_like();
        tape.backward(&params, vec![(out, seed)], &mut grads).unwrap();
        // FD on every entry of every parameter.
        let eps = 1e-6;
        for pi in 0..params.len() {
            for e in 0..params.get(pi).data.len() {
                let orig = params.get(pi).data[e];
                params.get_mut(pi).data[e] = orig + eps;
                let lp = loss(&params, &input);
                params.get_mut(pi).data[e] = orig - eps;
                let lm = loss(&params, &input);
                params.get_mut(pi).data[e] = orig;
                let fd = (lp - lm) / (2.0 * eps);
                let an = grads[pi].data[e];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-8);
                assert!(
                    rel < 1e-5,
                    "param {} entry {e}: analytic {an} vs fd {fd} (rel {rel})",
                    params.name(pi)
                );
            }
        }
    }

    #[test]
    fn linear_silu_gradients() {
        let mut params = ParamSet::new();
        params.add("w", rand_mat(3, 4, 1));
        params.add("b", rand_mat(1, 4, 2));
        params.add("w2", rand_mat(4, 2, 3));
        params.add("b2", rand_mat(1, 2, 4));
        let input = rand_mat(2, 3, 5);
        fd_check(
            |t, p, inp| {
                let x = t.input(inp.clone());
                let h = t.linear(p, x, 0, 1);
                let h = t.silu(h);
                t.linear(p, h, 2, 3)
            },
            params,
            input,
        );
    }

    #[test]
    fn attention_gradients_masked() {
        let n = 4;
        let mut allowed = vec![false; n * n];
        for i in 0..n {
            for j in 0..=i {
                allowed[i * n + j] = true; // causal
            }
        }
        let mask = Rc::new(AttnMask { n, allowed });
        let mut params = ParamSet::new();
        params.add("wq", rand_mat(3, 3, 11));
        params.add("bq", rand_mat(1, 3, 12));
        params.add("wk", rand_mat(3, 3, 13));
        params.add("bk", rand_mat(1, 3, 14));
        params.add("wv", rand_mat(3, 3, 15));
        params.add("bv", rand_mat(1, 3, 16));
        let input = rand_mat(n, 3, 17);
        fd_check(
            move |t, p, inp| {
                let x = t.input(inp.clone());
                let q = t.linear(p, x, 0, 1);
                let k = t.linear(p, x, 2, 3);
                let v = t.linear(p, x, 4, 5);
                t.attention(q, k, v, mask.clone())
            },
            params,
            input,
        );
    }

    #[test]
    fn pos_add_row_slice_concat_gradients() {
        let mut params = ParamSet::new();
        params.add("pos", rand_mat(5, 3, 21));
        params.add("w", rand_mat(5, 2, 22));
        params.add("b", rand_mat(1, 2, 23));
        let input = rand_mat(3, 3, 24);
        let left = rand_mat(1, 2, 25);
        fd_check(
            move |t, p, inp| {
                let x = t.input(inp.clone());
                let x = t.pos_add(p, x, 0);
                let r = t.row_slice(x, 1);
                let left64 = Mat { rows: 1, cols: 2, data: left.data.clone() };
                let cc = t.concat_const_left(&left64, r);
                t.linear(p, cc, 1, 2)
            },
            params,
            input,
        );
    }

    #[test]
    fn add_residual_gradients() {
        let mut params = ParamSet::new();
        params.add("w", rand_mat(3, 3, 31));
        params.add("b", rand_mat(1, 3, 32));
        let input = rand_mat(2, 3, 33);
        fd_check(
            |t, p, inp| {
                let x = t.input(inp.clone());
                let h = t.linear(p, x, 0, 1);
                let h = t.silu(h);
                t.add(x, h)
            },
            params,
            input,
        );
    }

    #[test]
    fn masked_attention_blocks_information() {
        // Strict causality: changing a later row must not move earlier outputs.
        let n = 4;
        let mut allowed = vec![false; n * n];
        for i in 0..n {
            for j in 0..=i {
                allowed[i * n + j] = true;
            }
        }
        let mask = Rc::new(AttnMask { n, allowed });
        let run = |inp: &Mat<f64>| {
            let mut t = Tape::new();
            let x = t.input(inp.clone());
            let out = t.attention(x, x, x, mask.clone());
            t.value(out).clone()
        };
        let base = rand_mat(n, 3, 41);
        let mut bumped = base.clone();
        bumped.row_mut(3)[0] += 10.0;
        let (a, b) = (run(&base), run(&bumped));
        for i in 0..3 {
            assert_eq!(a.row(i), b.row(i), "row {i} must be untouched");
        }
        assert_ne!(a.row(3), b.row(3));
    }
}
