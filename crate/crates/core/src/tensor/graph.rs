use std::collections::HashMap;

use super::params::{Gradients, ParamId, ParamStore};
use super::{check_tau, log_softmax_row, softmax_row, Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Value<T> {
    Owned(Tensor<T>),
    Param(ParamId),
}

enum Op<T> {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    Relu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    GatherRows(Var, Vec<usize>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Transpose(Var),
    Softmax(Var, T),
    LogSoftmax(Var, T),
    Pick(Var, Vec<Option<usize>>),
    Sum(Var),
}

struct Node<T> {
    value: Value<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// One forward pass worth of recorded operations.
///
/// Parameters are read from the borrowed [`ParamStore`] without copying.
/// Every op checks its output for NaN/Inf. `backward` returns per-parameter
/// gradients instead of mutating the store so that several graphs can be
/// evaluated against the same frozen parameters.
pub struct Graph<'p, T: Real> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_vars: HashMap<ParamId, Var>,
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Graph {
            params,
            nodes: Vec::with_capacity(256),
            param_vars: HashMap::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.params.value(*id),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, name: &str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::Numeric(format!("{name} produced a non-finite value")));
        }
        let needs_grad = match &op {
            Op::Input => false,
            Op::Param(_) => true,
            Op::MatMul(a, b) | Op::MatMulNt(a, b) | Op::Add(a, b) | Op::Mul(a, b) | Op::AddRow(a, b) => {
                self.needs(*a) || self.needs(*b)
            }
            Op::LayerNorm { x, gain, bias, .. } => {
                self.needs(*x) || self.needs(*gain) || self.needs(*bias)
            }
            Op::ConcatCols(vs) => vs.iter().any(|v| self.needs(*v)),
            Op::Scale(a, _)
            | Op::Relu(a)
            | Op::GatherRows(a, _)
            | Op::SliceCols(a, _)
            | Op::Transpose(a)
            | Op::Softmax(a, _)
            | Op::LogSoftmax(a, _)
            | Op::Pick(a, _)
            | Op::Sum(a) => self.needs(*a),
        };
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A constant leaf; never receives a gradient.
    pub fn input(&mut self, t: Tensor<T>) -> Result<Var> {
        self.push(t, Op::Input, "input")
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Param(id),
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    fn mat(&self, v: Var, what: &str) -> Result<(usize, usize)> {
        match self.shape(v) {
            [r, c] => Ok((*r, *c)),
            s => Err(Error::Shape(format!("{what} expects a matrix, got {s:?}"))),
        }
    }

    /// `a · b` for `a: [m, k]`, `b: [k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.mat(a, "matmul")?;
        let (k2, n) = self.mat(b, "matmul")?;
        if k != k2 {
            return Err(Error::Shape(format!("matmul [{m}x{k}]·[{k2}x{n}]")));
        }
        let mut out = vec![T::zero(); m * n];
        mm(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), "matmul")
    }

    /// `a · bᵀ` for `a: [m, k]`, `b: [n, k]`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.mat(a, "matmul_nt")?;
        let (n, k2) = self.mat(b, "matmul_nt")?;
        if k != k2 {
            return Err(Error::Shape(format!("matmul_nt [{m}x{k}]·[{n}x{k2}]ᵀ")));
        }
        let mut out = vec![T::zero(); m * n];
        mm_nt(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        self.push(Tensor::new(vec![m, n], out)?, Op::MatMulNt(a, b), "matmul_nt")
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b), "add")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor::new(shape, data)?, Op::Mul(a, b), "mul")
    }

    /// Adds the vector `b: [n]` to every row of `a: [m, n]`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, n) = self.mat(a, "add_row")?;
        if self.shape(b) != [n] {
            return Err(Error::Shape(format!(
                "add_row: row {:?} onto [{m}x{n}]",
                self.shape(b)
            )));
        }
        let mut out = self.value(a).clone();
        let bias = self.value(b).data();
        for row in out.data_mut().chunks_exact_mut(n) {
            for (o, &v) in row.iter_mut().zip(bias) {
                *o += v;
            }
        }
        self.push(out, Op::AddRow(a, b), "add_row")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let c = T::of(c);
        let out = self.value(a).map(|v| v * c);
        self.push(out, Op::Scale(a, c), "scale")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|v| v.max(T::zero()));
        self.push(out, Op::Relu(a), "relu")
    }

    /// Row-wise layer normalization with learned gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (m, n) = self.mat(x, "layer_norm")?;
        if self.shape(gain) != [n] || self.shape(bias) != [n] {
            return Err(Error::Shape("layer_norm gain/bias width".into()));
        }
        let eps = T::of(eps);
        let nf = T::of(n as f64);
        let xs = self.value(x).data();
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        let mut xhat = vec![T::zero(); m * n];
        let mut rstd = vec![T::zero(); m];
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let row = &xs[i * n..(i + 1) * n];
            let mean = row.iter().copied().sum::<T>() / nf;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
            let r = T::one() / (var + eps).sqrt();
            rstd[i] = r;
            for j in 0..n {
                let h = (row[j] - mean) * r;
                xhat[i * n + j] = h;
                out[i * n + j] = h * g[j] + b[j];
            }
        }
        let op = Op::LayerNorm {
            x,
            gain,
            bias,
            xhat,
            rstd,
        };
        self.push(Tensor::new(vec![m, n], out)?, op, "layer_norm")
    }

    /// Selects rows of `x: [m, n]`; indices may repeat.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let (m, n) = self.mat(x, "gather_rows")?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= m) {
            return Err(Error::Shape(format!("gather_rows index {bad} of {m} rows")));
        }
        let src = self.value(x);
        let mut out = Vec::with_capacity(idx.len() * n);
        for &i in idx {
            out.extend_from_slice(src.row(i));
        }
        self.push(
            Tensor::new(vec![idx.len(), n], out)?,
            Op::GatherRows(x, idx.to_vec()),
            "gather_rows",
        )
    }

    /// Embedding lookup: rows of `table` selected by token ids.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        self.gather_rows(table, ids)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Shape("concat_cols of nothing".into()));
        }
        let (m, _) = self.mat(parts[0], "concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.mat(p, "concat_cols")?;
            if r != m {
                return Err(Error::Shape(format!("concat_cols rows {r} vs {m}")));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * total);
        for i in 0..m {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(i));
            }
        }
        self.push(
            Tensor::new(vec![m, total], out)?,
            Op::ConcatCols(parts.to_vec()),
            "concat_cols",
        )
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.mat(x, "slice_cols")?;
        if start + len > n {
            return Err(Error::Shape(format!("slice_cols {start}+{len} of {n}")));
        }
        let src = self.value(x);
        let mut out = Vec::with_capacity(m * len);
        for i in 0..m {
            out.extend_from_slice(&src.row(i)[start..start + len]);
        }
        self.push(
            Tensor::new(vec![m, len], out)?,
            Op::SliceCols(x, start),
            "slice_cols",
        )
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.mat(x, "transpose")?;
        let src = self.value(x).data();
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = src[i * n + j];
            }
        }
        self.push(Tensor::new(vec![n, m], out)?, Op::Transpose(x), "transpose")
    }

    fn rowwise(&self, x: Var, tau: f64, what: &str) -> Result<(usize, usize)> {
        check_tau(tau)?;
        let (m, n) = self.value(x).dims2();
        if self.value(x).is_empty() {
            return Err(Error::InvalidArgument(format!("{what} over an empty axis")));
        }
        Ok((m, n))
    }

    /// Row-wise tempered softmax.
    pub fn softmax(&mut self, x: Var, tau: f64) -> Result<Var> {
        let (m, n) = self.rowwise(x, tau, "softmax")?;
        let t = T::of(tau);
        let src = self.value(x);
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            softmax_row(src.row(i), t, &mut out[i * n..(i + 1) * n]);
        }
        let shape = src.shape().to_vec();
        self.push(Tensor::new(shape, out)?, Op::Softmax(x, t), "softmax")
    }

    /// Row-wise tempered log-softmax.
    pub fn log_softmax(&mut self, x: Var, tau: f64) -> Result<Var> {
        let (m, n) = self.rowwise(x, tau, "log_softmax")?;
        let t = T::of(tau);
        let src = self.value(x);
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            log_softmax_row(src.row(i), t, &mut out[i * n..(i + 1) * n]);
        }
        let shape = src.shape().to_vec();
        self.push(Tensor::new(shape, out)?, Op::LogSoftmax(x, t), "log_softmax")
    }

    /// `out[i] = x[i, targets[i]]`, or 0 where the target is `None`.
    pub fn pick(&mut self, x: Var, targets: &[Option<usize>]) -> Result<Var> {
        let (m, n) = self.value(x).dims2();
        if targets.len() != m {
            return Err(Error::Shape(format!(
                "pick: {} targets for {m} rows",
                targets.len()
            )));
        }
        if let Some(bad) = targets.iter().flatten().find(|&&t| t >= n) {
            return Err(Error::Shape(format!("pick: class {bad} of {n}")));
        }
        let src = self.value(x);
        let out = targets
            .iter()
            .enumerate()
            .map(|(i, t)| t.map_or(T::zero(), |t| src.row(i)[t]))
            .collect();
        self.push(
            Tensor::new(vec![m], out)?,
            Op::Pick(x, targets.to_vec()),
            "pick",
        )
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).sum();
        self.push(Tensor::scalar(s), Op::Sum(x), "sum")
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len().max(1);
        let s = self.sum(x)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// Sum of same-shaped values; a constant zero scalar when `xs` is empty.
    pub fn add_all(&mut self, xs: &[Var]) -> Result<Var> {
        let Some((&first, rest)) = xs.split_first() else {
            return self.input(Tensor::scalar(T::zero()));
        };
        rest.iter().try_fold(first, |acc, &x| self.add(acc, x))
    }

    /// Summed negative log-likelihood of `targets` under tempered softmax of
    /// `logits`; rows whose target is `None` contribute nothing.
    pub fn nll_sum(&mut self, logits: Var, targets: &[Option<usize>], tau: f64) -> Result<Var> {
        let lp = self.log_softmax(logits, tau)?;
        let picked = self.pick(lp, targets)?;
        let s = self.sum(picked)?;
        self.scale(s, -1.0)
    }

    /// Mean cross-entropy over rows with a target.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[Option<usize>]) -> Result<Var> {
        let count = targets.iter().filter(|t| t.is_some()).count();
        let s = self.nll_sum(logits, targets, 1.0)?;
        self.scale(s, 1.0 / count.max(1) as f64)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.shape(loss), T::one()));
        let mut out = Gradients::empty(self.params.len());
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backprop(idx, &node.op, g, &mut grads, &mut out);
        }
        Ok(out)
    }

    fn backprop(
        &self,
        idx: usize,
        op: &Op<T>,
        g: Tensor<T>,
        grads: &mut [Option<Tensor<T>>],
        out: &mut Gradients<T>,
    ) {
        let gd = g.data();
        match op {
            Op::Input => {}
            Op::Param(id) => out.0[id.0] = Some(g),
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2();
                let (_, n) = self.value(*b).dims2();
                if self.needs(*a) {
                    let b_data = self.value(*b).data();
                    self.acc(grads, *a, |da| mm_nt(gd, b_data, da, m, n, k));
                }
                if self.needs(*b) {
                    let a_data = self.value(*a).data();
                    self.acc(grads, *b, |db| mm_tn(a_data, gd, db, m, k, n));
                }
            }
            Op::MatMulNt(a, b) => {
                let (m, k) = self.value(*a).dims2();
                let (n, _) = self.value(*b).dims2();
                if self.needs(*a) {
                    let b_data = self.value(*b).data();
                    self.acc(grads, *a, |da| mm(gd, b_data, da, m, n, k));
                }
                if self.needs(*b) {
                    let a_data = self.value(*a).data();
                    self.acc(grads, *b, |db| mm_tn(gd, a_data, db, m, n, k));
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if self.needs(v) {
                        self.acc(grads, v, |d| axpy(d, gd, T::one()));
                    }
                }
            }
            Op::Mul(a, b) => {
                for (v, w) in [(*a, *b), (*b, *a)] {
                    if self.needs(v) {
                        let wd = self.value(w).data();
                        self.acc(grads, v, |d| {
                            for ((o, &gi), &wi) in d.iter_mut().zip(gd).zip(wd) {
                                *o += gi * wi;
                            }
                        });
                    }
                }
            }
            Op::AddRow(a, b) => {
                if self.needs(*a) {
                    self.acc(grads, *a, |d| axpy(d, gd, T::one()));
                }
                if self.needs(*b) {
                    let n = self.value(*b).len();
                    self.acc(grads, *b, |d| {
                        for row in gd.chunks_exact(n) {
                            axpy(d, row, T::one());
                        }
                    });
                }
            }
            Op::Scale(a, c) => self.acc(grads, *a, |d| axpy(d, gd, *c)),
            Op::Relu(a) => {
                let xd = self.value(*a).data();
                self.acc(grads, *a, |d| {
                    for ((o, &gi), &x) in d.iter_mut().zip(gd).zip(xd) {
                        if x > T::zero() {
                            *o += gi;
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            } => {
                let n = self.value(*gain).len();
                let gv = self.value(*gain).data();
                if self.needs(*gain) {
                    self.acc(grads, *gain, |d| {
                        for (gr, hr) in gd.chunks_exact(n).zip(xhat.chunks_exact(n)) {
                            for j in 0..n {
                                d[j] += gr[j] * hr[j];
                            }
                        }
                    });
                }
                if self.needs(*bias) {
                    self.acc(grads, *bias, |d| {
                        for gr in gd.chunks_exact(n) {
                            axpy(d, gr, T::one());
                        }
                    });
                }
                if self.needs(*x) {
                    let nf = T::of(n as f64);
                    self.acc(grads, *x, |d| {
                        for (i, (gr, hr)) in gd.chunks_exact(n).zip(xhat.chunks_exact(n)).enumerate() {
                            let mut s1 = T::zero();
                            let mut s2 = T::zero();
                            for j in 0..n {
                                let dh = gr[j] * gv[j];
                                s1 += dh;
                                s2 += dh * hr[j];
                            }
                            let r = rstd[i] / nf;
                            let dr = &mut d[i * n..(i + 1) * n];
                            for j in 0..n {
                                let dh = gr[j] * gv[j];
                                dr[j] += r * (nf * dh - s1 - hr[j] * s2);
                            }
                        }
                    });
                }
            }
            Op::GatherRows(a, idx_rows) => {
                let (_, n) = self.value(*a).dims2();
                self.acc(grads, *a, |d| {
                    for (r, &i) in idx_rows.iter().enumerate() {
                        axpy(&mut d[i * n..(i + 1) * n], &gd[r * n..(r + 1) * n], T::one());
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let (m, total) = g.dims2();
                let mut off = 0;
                for &p in parts {
                    let (_, w) = self.value(p).dims2();
                    if self.needs(p) {
                        self.acc(grads, p, |d| {
                            for i in 0..m {
                                axpy(
                                    &mut d[i * w..(i + 1) * w],
                                    &gd[i * total + off..i * total + off + w],
                                    T::one(),
                                );
                            }
                        });
                    }
                    off += w;
                }
            }
            Op::SliceCols(a, start) => {
                let (m, n) = self.value(*a).dims2();
                let (_, w) = g.dims2();
                self.acc(grads, *a, |d| {
                    for i in 0..m {
                        axpy(
                            &mut d[i * n + start..i * n + start + w],
                            &gd[i * w..(i + 1) * w],
                            T::one(),
                        );
                    }
                });
            }
            Op::Transpose(a) => {
                let (m, n) = self.value(*a).dims2();
                self.acc(grads, *a, |d| {
                    for i in 0..m {
                        for j in 0..n {
                            d[i * n + j] += gd[j * m + i];
                        }
                    }
                });
            }
            Op::Softmax(a, tau) => {
                let y = self.value(Var(idx));
                let (_, n) = y.dims2();
                let inv = T::one() / *tau;
                self.acc(grads, *a, |d| {
                    for ((dr, yr), gr) in d
                        .chunks_exact_mut(n)
                        .zip(y.data().chunks_exact(n))
                        .zip(gd.chunks_exact(n))
                    {
                        let dot: T = yr.iter().zip(gr).map(|(&p, &q)| p * q).sum();
                        for j in 0..n {
                            dr[j] += yr[j] * (gr[j] - dot) * inv;
                        }
                    }
                });
            }
            Op::LogSoftmax(a, tau) => {
                let y = self.value(Var(idx));
                let (_, n) = y.dims2();
                let inv = T::one() / *tau;
                self.acc(grads, *a, |d| {
                    for ((dr, yr), gr) in d
                        .chunks_exact_mut(n)
                        .zip(y.data().chunks_exact(n))
                        .zip(gd.chunks_exact(n))
                    {
                        let s: T = gr.iter().copied().sum();
                        for j in 0..n {
                            dr[j] += (gr[j] - yr[j].exp() * s) * inv;
                        }
                    }
                });
            }
            Op::Pick(a, targets) => {
                let (_, n) = self.value(*a).dims2();
                self.acc(grads, *a, |d| {
                    for (i, t) in targets.iter().enumerate() {
                        if let Some(t) = t {
                            d[i * n + t] += gd[i];
                        }
                    }
                });
            }
            Op::Sum(a) => {
                let s = gd[0];
                self.acc(grads, *a, |d| {
                    for o in d.iter_mut() {
                        *o += s;
                    }
                });
            }
        }
    }

    fn acc(&self, grads: &mut [Option<Tensor<T>>], v: Var, f: impl FnOnce(&mut [T])) {
        let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(self.shape(v)));
        f(slot.data_mut());
    }
}

fn axpy<T: Real>(y: &mut [T], x: &[T], a: T) {
    for (o, &v) in y.iter_mut().zip(x) {
        *o += a * v;
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = acc.iter().copied().sum::<T>();
    for (&x, &y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `c[m,n] += a[m,k] · b[k,n]`
fn mm<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            axpy(crow, &b[p * n..(p + 1) * n], aip);
        }
    }
}

/// `c[m,n] += a[m,k] · b[n,k]ᵀ`
fn mm_nt<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..n {
            c[i * n + j] += dot(ar, &b[j * k..(j + 1) * k]);
        }
    }
}

/// `c[k,n] += a[m,k]ᵀ · b[m,n]`
fn mm_tn<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let br = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            axpy(&mut c[p * n..(p + 1) * n], br, aip);
        }
    }
}
