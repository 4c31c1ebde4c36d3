use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{gemm_nn, gemm_nt, gemm_tn};
use super::tensor::Tensor;
use super::functions::LOG_EPS;
use crate::error::{Error, Result};
use crate::math;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    /// `[.., k] x [k, n]`; the left operand may carry any leading shape.
    MatMul(Var, Var),
    /// `[g, m, k] x [g, k, n]`, or `[g, m, k] x [g, n, k]^T` when transposed.
    BatchMatMul { a: Var, b: Var, transpose_b: bool },
    Add(Var, Var),
    /// Right operand is tiled over the left (bias rows, positional tables).
    AddTiled(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    /// Natural log with the input clamped to `[LOG_EPS, inf)`.
    Ln(Var),
    /// Softmax over the trailing axis; masked entries are exactly zero.
    Softmax { input: Var },
    Concat(Var, Var),
    SliceCols { input: Var, start: usize },
    SliceRows { input: Var, start: usize },
    Sum(Var),
    Mean(Var),
    /// Row-wise normalisation followed by `gamma * x_hat + beta`.
    LayerNorm { input: Var, gamma: Var, beta: Var, x_hat: Vec<f64>, inv_std: Vec<f64> },
    Reshape(Var),
    /// `[a, b, c, d] -> [a, c, b, d]`
    SwapAxes12(Var),
    /// `[g, m, n] -> [g, n]` as `sum_m w[g, m] * x[g, m, :]`
    WeightedPool { input: Var, weights: Vec<f64> },
    /// Mean over elements of `-w [y ln p + (1 - y) ln (1 - p)]`, `p` clamped.
    WeightedBce { input: Var, targets: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Tape of operations. Nodes are appended in evaluation order, so every
/// node's inputs precede it and the tape is already topologically sorted.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients keyed by node. Nodes that do not influence the loss (or were
/// recorded as constants) report zeros.
#[derive(Debug)]
pub struct GradientMap {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl GradientMap {
    pub fn get(&self, var: Var) -> Tensor {
        match self.grads.get(var.0).and_then(|g| g.as_ref()) {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }

    pub fn take(&mut self, var: Var) -> Tensor {
        match self.grads.get_mut(var.0).and_then(|g| g.take()) {
            Some(g) => g,
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// A leaf that never receives gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { op, value, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    // ---- operations ----

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b));
        assert_eq!(sb.len(), 2, "matmul rhs must be 2-D, got {sb:?}");
        let (k, n) = (sb[0], sb[1]);
        assert_eq!(*sa.last().unwrap(), k, "matmul inner dims {sa:?} x {sb:?}");
        let m = self.value(a).len() / k;
        let mut out = vec![0.0; m * n];
        gemm_nn(self.data(a), self.data(b), &mut out, m, k, n);
        let mut shape = sa;
        *shape.last_mut().unwrap() = n;
        let rg = self.rg(a) || self.rg(b);
        self.push(Op::MatMul(a, b), Tensor::from_parts(shape, out), rg)
    }

    pub fn batch_matmul(&mut self, a: Var, b: Var, transpose_b: bool) -> Var {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        assert!(sa.len() == 3 && sb.len() == 3 && sa[0] == sb[0], "bmm shapes {sa:?} {sb:?}");
        let (g, m, k) = (sa[0], sa[1], sa[2]);
        let n = if transpose_b {
            assert_eq!(sb[2], k, "bmm^T inner dims {sa:?} {sb:?}");
            sb[1]
        } else {
            assert_eq!(sb[1], k, "bmm inner dims {sa:?} {sb:?}");
            sb[2]
        };
        let mut out = vec![0.0; g * m * n];
        {
            let (da, db) = (self.data(a), self.data(b));
            for i in 0..g {
                let ab = &da[i * m * k..(i + 1) * m * k];
                let bb = &db[i * k * n..(i + 1) * k * n];
                let cb = &mut out[i * m * n..(i + 1) * m * n];
                if transpose_b {
                    gemm_nt(ab, bb, cb, m, k, n);
                } else {
                    gemm_nn(ab, bb, cb, m, k, n);
                }
            }
        }
        let rg = self.rg(a) || self.rg(b);
        self.push(Op::BatchMatMul { a, b, transpose_b }, Tensor::from_parts(vec![g, m, n], out), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let out = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x + y).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(b);
        self.push(Op::Add(a, b), Tensor::from_parts(shape, out), rg)
    }

    /// `a + tile(b)`, where `b` matches the trailing block of `a`.
    pub fn add_tiled(&mut self, a: Var, b: Var) -> Var {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        assert!(lb > 0 && la % lb == 0, "add_tiled: {la} not a multiple of {lb}");
        let db = self.data(b);
        let out = self.data(a).iter().enumerate().map(|(i, x)| x + db[i % lb]).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(b);
        self.push(Op::AddTiled(a, b), Tensor::from_parts(shape, out), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let out = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x * y).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(b);
        self.push(Op::Mul(a, b), Tensor::from_parts(shape, out), rg)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.data(a).iter().map(|x| x * c).collect();
        self.unary(Op::Scale(a, c), a, out)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.data(a).iter().map(|&x| math::sigmoid(x)).collect();
        self.unary(Op::Sigmoid(a), a, out)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.data(a).iter().map(|&x| math::tanh(x)).collect();
        self.unary(Op::Tanh(a), a, out)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.data(a).iter().map(|&x| x.max(0.0)).collect();
        self.unary(Op::Relu(a), a, out)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let out = self.data(a).iter().map(|&x| math::ln(x.max(LOG_EPS))).collect();
        self.unary(Op::Ln(a), a, out)
    }

    fn unary(&mut self, op: Op, a: Var, out: Vec<f64>) -> Var {
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a);
        self.push(op, Tensor::from_parts(shape, out), rg)
    }

    /// Softmax over the trailing axis with max subtraction. `mask[i] == false`
    /// excludes entry `i`; a row with every entry masked becomes all zeros.
    pub fn softmax(&mut self, a: Var, mask: Option<Vec<bool>>) -> Var {
        let n = self.value(a).last_dim();
        let x = self.data(a);
        if let Some(m) = &mask {
            assert_eq!(m.len(), x.len(), "softmax mask length");
        }
        let mut out = vec![0.0; x.len()];
        for (r, (row, o)) in x.chunks(n).zip(out.chunks_mut(n)).enumerate() {
            let keep = |j: usize| mask.as_ref().is_none_or(|m| m[r * n + j]);
            let mut max = f64::NEG_INFINITY;
            for (j, &v) in row.iter().enumerate() {
                if keep(j) && v > max {
                    max = v;
                }
            }
            if max == f64::NEG_INFINITY {
                continue;
            }
            let mut z = 0.0;
            for (j, &v) in row.iter().enumerate() {
                if keep(j) {
                    o[j] = math::exp(v - max);
                    z += o[j];
                }
            }
            for v in o.iter_mut() {
                *v /= z;
            }
        }
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a);
        self.push(Op::Softmax { input: a }, Tensor::from_parts(shape, out), rg)
    }

    /// Concatenate two 2-D tensors along columns.
    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        assert!(sa.len() == 2 && sb.len() == 2 && sa[0] == sb[0], "concat {sa:?} {sb:?}");
        let (rows, p, q) = (sa[0], sa[1], sb[1]);
        let mut out = Vec::with_capacity(rows * (p + q));
        for r in 0..rows {
            out.extend_from_slice(&self.data(a)[r * p..(r + 1) * p]);
            out.extend_from_slice(&self.data(b)[r * q..(r + 1) * q]);
        }
        let rg = self.rg(a) || self.rg(b);
        self.push(Op::Concat(a, b), Tensor::from_parts(vec![rows, p + q], out), rg)
    }

    /// Columns `start..start + len` of a 2-D tensor.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let s = self.shape(a).to_vec();
        assert!(s.len() == 2 && start + len <= s[1], "slice_cols {s:?} {start}+{len}");
        let mut out = Vec::with_capacity(s[0] * len);
        for r in 0..s[0] {
            out.extend_from_slice(&self.data(a)[r * s[1] + start..r * s[1] + start + len]);
        }
        let rg = self.rg(a);
        self.push(Op::SliceCols { input: a, start }, Tensor::from_parts(vec![s[0], len], out), rg)
    }

    /// Rows `start..start + len` along the leading axis.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let s = self.shape(a).to_vec();
        assert!(start + len <= s[0], "slice_rows {s:?} {start}+{len}");
        let inner: usize = s[1..].iter().product();
        let out = self.data(a)[start * inner..(start + len) * inner].to_vec();
        let mut shape = s;
        shape[0] = len;
        let rg = self.rg(a);
        self.push(Op::SliceRows { input: a, start }, Tensor::from_parts(shape, out), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.data(a).iter().sum();
        let rg = self.rg(a);
        self.push(Op::Sum(a), Tensor::scalar(s), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.data(a).iter().sum::<f64>() / n;
        let rg = self.rg(a);
        self.push(Op::Mean(a), Tensor::scalar(s), rg)
    }

    /// Layer normalisation over the trailing axis with learned gain and bias.
    pub fn layer_norm(&mut self, a: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let n = self.value(a).last_dim();
        assert!(self.value(gamma).len() == n && self.value(beta).len() == n, "layer_norm params");
        let x = self.data(a);
        let rows = x.len() / n;
        let mut x_hat = vec![0.0; x.len()];
        let mut inv_std = vec![0.0; rows];
        for r in 0..rows {
            let row = &x[r * n..(r + 1) * n];
            let mu = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
            let is = 1.0 / math::sqrt(var + eps);
            inv_std[r] = is;
            for j in 0..n {
                x_hat[r * n + j] = (row[j] - mu) * is;
            }
        }
        let (g, b) = (self.data(gamma), self.data(beta));
        let out = x_hat.iter().enumerate().map(|(i, xh)| g[i % n] * xh + b[i % n]).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(gamma) || self.rg(beta);
        self.push(Op::LayerNorm { input: a, gamma, beta, x_hat, inv_std }, Tensor::from_parts(shape, out), rg)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        assert_eq!(shape.iter().product::<usize>(), self.value(a).len(), "reshape size");
        let out = self.data(a).to_vec();
        let rg = self.rg(a);
        self.push(Op::Reshape(a), Tensor::from_parts(shape.to_vec(), out), rg)
    }

    /// Swap the middle two axes of a 4-D tensor.
    pub fn swap_axes12(&mut self, a: Var) -> Var {
        let s = self.shape(a).to_vec();
        assert_eq!(s.len(), 4, "swap_axes12 needs 4-D, got {s:?}");
        let out = swap12(self.data(a), s[0], s[1], s[2], s[3]);
        let rg = self.rg(a);
        self.push(Op::SwapAxes12(a), Tensor::from_parts(vec![s[0], s[2], s[1], s[3]], out), rg)
    }

    /// `[g, m, n] -> [g, n]`: weighted sum over the middle axis.
    pub fn weighted_pool(&mut self, a: Var, weights: Vec<f64>) -> Var {
        let s = self.shape(a).to_vec();
        assert!(s.len() == 3 && weights.len() == s[0] * s[1], "weighted_pool {s:?}");
        let (g, m, n) = (s[0], s[1], s[2]);
        let x = self.data(a);
        let mut out = vec![0.0; g * n];
        for gi in 0..g {
            for mi in 0..m {
                let w = weights[gi * m + mi];
                if w == 0.0 {
                    continue;
                }
                let row = &x[(gi * m + mi) * n..(gi * m + mi + 1) * n];
                for (o, v) in out[gi * n..(gi + 1) * n].iter_mut().zip(row) {
                    *o += w * v;
                }
            }
        }
        let rg = self.rg(a);
        self.push(Op::WeightedPool { input: a, weights }, Tensor::from_parts(vec![g, n], out), rg)
    }

    /// Mean weighted binary cross-entropy of probabilities `p` against
    /// `targets`, with per-element weights. `p` is clamped to
    /// `[LOG_EPS, 1 - LOG_EPS]` before the log.
    pub fn weighted_bce(&mut self, p: Var, targets: Vec<f64>, weights: Vec<f64>) -> Var {
        let x = self.data(p);
        assert!(targets.len() == x.len() && weights.len() == x.len(), "bce lengths");
        let mut total = 0.0;
        for ((&pi, &y), &w) in x.iter().zip(&targets).zip(&weights) {
            let pc = pi.clamp(LOG_EPS, 1.0 - LOG_EPS);
            total -= w * (y * math::ln(pc) + (1.0 - y) * math::ln(1.0 - pc));
        }
        let loss = total / x.len() as f64;
        let rg = self.rg(p);
        self.push(Op::WeightedBce { input: p, targets, weights }, Tensor::scalar(loss), rg)
    }

    // ---- reverse pass ----

    /// Reverse-mode gradient of a scalar node with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<GradientMap> {
        let loss_value = self.value(loss);
        if !loss_value.is_scalar() {
            return Err(Error::NonScalarLoss(loss_value.shape().to_vec()));
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(loss_value.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(upstream) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.propagate(idx, &upstream, &mut grads);
            grads[idx] = Some(upstream);
        }
        Ok(GradientMap { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, delta: Vec<f64>) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(g) => {
                for (a, d) in g.data_mut().iter_mut().zip(&delta) {
                    *a += d;
                }
            }
            slot @ None => *slot = Some(Tensor::from_parts(self.shape(v).to_vec(), delta)),
        }
    }

    fn propagate(&self, idx: usize, up: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let gy = up.data();
        let y = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let sb = self.shape(*b);
                let (k, n) = (sb[0], sb[1]);
                let m = self.value(*a).len() / k;
                if self.rg(*a) {
                    let mut da = vec![0.0; m * k];
                    gemm_nt(gy, self.data(*b), &mut da, m, n, k);
                    self.accumulate(grads, *a, da);
                }
                if self.rg(*b) {
                    let mut db = vec![0.0; k * n];
                    gemm_tn(self.data(*a), gy, &mut db, m, k, n);
                    self.accumulate(grads, *b, db);
                }
            }
            Op::BatchMatMul { a, b, transpose_b } => {
                let sa = self.shape(*a);
                let (g, m, k) = (sa[0], sa[1], sa[2]);
                let n = node.value.shape()[2];
                let (da_src, db_src) = (self.data(*a), self.data(*b));
                if self.rg(*a) {
                    let mut da = vec![0.0; g * m * k];
                    for i in 0..g {
                        let gyb = &gy[i * m * n..(i + 1) * m * n];
                        let bb = &db_src[i * k * n..(i + 1) * k * n];
                        let out = &mut da[i * m * k..(i + 1) * m * k];
                        if *transpose_b {
                            // a [m,k] = gy [m,n] x b [n,k]
                            gemm_nn(gyb, bb, out, m, n, k);
                        } else {
                            // a [m,k] = gy [m,n] x b[k,n]^T
                            gemm_nt(gyb, bb, out, m, n, k);
                        }
                    }
                    self.accumulate(grads, *a, da);
                }
                if self.rg(*b) {
                    let mut db = vec![0.0; g * k * n];
                    for i in 0..g {
                        let gyb = &gy[i * m * n..(i + 1) * m * n];
                        let ab = &da_src[i * m * k..(i + 1) * m * k];
                        let out = &mut db[i * k * n..(i + 1) * k * n];
                        if *transpose_b {
                            // b [n,k] = gy^T [n,m] x a [m,k]
                            gemm_tn(gyb, ab, out, m, n, k);
                        } else {
                            // b [k,n] = a^T [k,m] x gy [m,n]
                            gemm_tn(ab, gyb, out, m, k, n);
                        }
                    }
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, gy.to_vec());
                self.accumulate(grads, *b, gy.to_vec());
            }
            Op::AddTiled(a, b) => {
                self.accumulate(grads, *a, gy.to_vec());
                if self.rg(*b) {
                    let lb = self.value(*b).len();
                    let mut db = vec![0.0; lb];
                    for (i, g) in gy.iter().enumerate() {
                        db[i % lb] += g;
                    }
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    let d = gy.iter().zip(self.data(*b)).map(|(g, x)| g * x).collect();
                    self.accumulate(grads, *a, d);
                }
                if self.rg(*b) {
                    let d = gy.iter().zip(self.data(*a)).map(|(g, x)| g * x).collect();
                    self.accumulate(grads, *b, d);
                }
            }
            Op::Scale(a, c) => {
                self.accumulate(grads, *a, gy.iter().map(|g| g * c).collect());
            }
            Op::Sigmoid(a) => {
                let d = gy.iter().zip(y).map(|(g, s)| g * s * (1.0 - s)).collect();
                self.accumulate(grads, *a, d);
            }
            Op::Tanh(a) => {
                let d = gy.iter().zip(y).map(|(g, t)| g * (1.0 - t * t)).collect();
                self.accumulate(grads, *a, d);
            }
            Op::Relu(a) => {
                let d = gy.iter().zip(self.data(*a)).map(|(g, x)| if *x > 0.0 { *g } else { 0.0 }).collect();
                self.accumulate(grads, *a, d);
            }
            Op::Ln(a) => {
                let d = gy
                    .iter()
                    .zip(self.data(*a))
                    .map(|(g, x)| if *x >= LOG_EPS { g / x } else { 0.0 })
                    .collect();
                self.accumulate(grads, *a, d);
            }
            Op::Softmax { input } => {
                let n = node.value.last_dim();
                let mut d = vec![0.0; y.len()];
                for ((yr, gr), dr) in y.chunks(n).zip(gy.chunks(n)).zip(d.chunks_mut(n)) {
                    let s: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..n {
                        dr[j] = yr[j] * (gr[j] - s);
                    }
                }
                self.accumulate(grads, *input, d);
            }
            Op::Concat(a, b) => {
                let (p, q) = (self.shape(*a)[1], self.shape(*b)[1]);
                let rows = self.shape(*a)[0];
                let mut da = Vec::with_capacity(rows * p);
                let mut db = Vec::with_capacity(rows * q);
                for r in 0..rows {
                    da.extend_from_slice(&gy[r * (p + q)..r * (p + q) + p]);
                    db.extend_from_slice(&gy[r * (p + q) + p..(r + 1) * (p + q)]);
                }
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *b, db);
            }
            Op::SliceCols { input, start } => {
                let s = self.shape(*input);
                let (rows, cols) = (s[0], s[1]);
                let len = node.value.shape()[1];
                let mut d = vec![0.0; rows * cols];
                for r in 0..rows {
                    d[r * cols + start..r * cols + start + len].copy_from_slice(&gy[r * len..(r + 1) * len]);
                }
                self.accumulate(grads, *input, d);
            }
            Op::SliceRows { input, start } => {
                let total = self.value(*input).len();
                let inner = total / self.shape(*input)[0];
                let mut d = vec![0.0; total];
                d[start * inner..start * inner + gy.len()].copy_from_slice(gy);
                self.accumulate(grads, *input, d);
            }
            Op::Sum(a) => {
                let len = self.value(*a).len();
                self.accumulate(grads, *a, vec![gy[0]; len]);
            }
            Op::Mean(a) => {
                let len = self.value(*a).len();
                self.accumulate(grads, *a, vec![gy[0] / len as f64; len]);
            }
            Op::LayerNorm { input, gamma, beta, x_hat, inv_std } => {
                let n = node.value.last_dim();
                let g = self.data(*gamma);
                if self.rg(*gamma) {
                    let mut dg = vec![0.0; n];
                    for (i, (gv, xh)) in gy.iter().zip(x_hat).enumerate() {
                        dg[i % n] += gv * xh;
                    }
                    self.accumulate(grads, *gamma, dg);
                }
                if self.rg(*beta) {
                    let mut db = vec![0.0; n];
                    for (i, gv) in gy.iter().enumerate() {
                        db[i % n] += gv;
                    }
                    self.accumulate(grads, *beta, db);
                }
                if self.rg(*input) {
                    let mut dx = vec![0.0; gy.len()];
                    let nf = n as f64;
                    for (r, is) in inv_std.iter().enumerate() {
                        let sl = r * n..(r + 1) * n;
                        let (gr, xr) = (&gy[sl.clone()], &x_hat[sl.clone()]);
                        let mut sum_d = 0.0;
                        let mut sum_dx = 0.0;
                        for j in 0..n {
                            let dxh = gr[j] * g[j];
                            sum_d += dxh;
                            sum_dx += dxh * xr[j];
                        }
                        for j in 0..n {
                            let dxh = gr[j] * g[j];
                            dx[r * n + j] = is / nf * (nf * dxh - sum_d - xr[j] * sum_dx);
                        }
                    }
                    self.accumulate(grads, *input, dx);
                }
            }
            Op::Reshape(a) => {
                self.accumulate(grads, *a, gy.to_vec());
            }
            Op::SwapAxes12(a) => {
                let s = node.value.shape();
                self.accumulate(grads, *a, swap12(gy, s[0], s[1], s[2], s[3]));
            }
            Op::WeightedPool { input, weights } => {
                let s = self.shape(*input);
                let (g, m, n) = (s[0], s[1], s[2]);
                let mut d = vec![0.0; g * m * n];
                for gi in 0..g {
                    for mi in 0..m {
                        let w = weights[gi * m + mi];
                        if w == 0.0 {
                            continue;
                        }
                        let dst = &mut d[(gi * m + mi) * n..(gi * m + mi + 1) * n];
                        for (o, u) in dst.iter_mut().zip(&gy[gi * n..(gi + 1) * n]) {
                            *o = w * u;
                        }
                    }
                }
                self.accumulate(grads, *input, d);
            }
            Op::WeightedBce { input, targets, weights } => {
                let x = self.data(*input);
                let scale = gy[0] / x.len() as f64;
                let d = x
                    .iter()
                    .zip(targets)
                    .zip(weights)
                    .map(|((&p, &t), &w)| {
                        if p < LOG_EPS || p > 1.0 - LOG_EPS {
                            0.0
                        } else {
                            -scale * w * (t / p - (1.0 - t) / (1.0 - p))
                        }
                    })
                    .collect();
                self.accumulate(grads, *input, d);
            }
        }
    }
}

fn swap12(x: &[f64], a: usize, b: usize, c: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for ai in 0..a {
        for bi in 0..b {
            for ci in 0..c {
                let src = ((ai * b + bi) * c + ci) * d;
                let dst = ((ai * c + ci) * b + bi) * d;
                out[dst..dst + d].copy_from_slice(&x[src..src + d]);
            }
        }
    }
    out
}
