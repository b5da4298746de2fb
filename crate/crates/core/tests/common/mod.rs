//! Independent oracles shared by the integration tests and the acceptance
//! runner. Nothing here calls the code it checks except to obtain the value
//! under test.
#![allow(dead_code)]

use levrl::tensor::{Graph, ParamStore, Real, Tensor, Var};
use levrl::vocab::Token;
use levrl::Result;
use rand::Rng;

// ---------------------------------------------------------------- gradients

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    MatMul,
    MatMulNt,
    Add,
    Mul,
    AddRow,
    Scale,
    Relu,
    LayerNorm,
    GatherRows,
    Embedding,
    ConcatCols,
    SliceCols,
    Transpose,
    Softmax,
    LogSoftmax,
    Pick,
    Sum,
    Mean,
    AddAll,
    NllSum,
    CrossEntropy,
}

pub const ALL_OPS: [Op; 21] = [
    Op::MatMul,
    Op::MatMulNt,
    Op::Add,
    Op::Mul,
    Op::AddRow,
    Op::Scale,
    Op::Relu,
    Op::LayerNorm,
    Op::GatherRows,
    Op::Embedding,
    Op::ConcatCols,
    Op::SliceCols,
    Op::Transpose,
    Op::Softmax,
    Op::LogSoftmax,
    Op::Pick,
    Op::Sum,
    Op::Mean,
    Op::AddAll,
    Op::NllSum,
    Op::CrossEntropy,
];

/// One randomly shaped instance of an op.
#[derive(Clone, Debug)]
pub struct Case {
    pub op: Op,
    /// Values already rounded to f32 so both precisions see the same point.
    pub inputs: Vec<Tensor<f64>>,
    pub idx: Vec<usize>,
    pub targets: Vec<Option<usize>>,
    pub scalar: f64,
    pub start: usize,
    pub len: usize,
}

fn rand_tensor<R: Rng>(rng: &mut R, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5f64..1.5) as f32 as f64).collect();
    Tensor::from_f64(shape, &v).unwrap()
}

fn targets<R: Rng>(rng: &mut R, m: usize, n: usize) -> Vec<Option<usize>> {
    let mut t: Vec<Option<usize>> = (0..m)
        .map(|_| if rng.gen_bool(0.8) { Some(rng.gen_range(0..n)) } else { None })
        .collect();
    t[0] = Some(rng.gen_range(0..n));
    t
}

impl Case {
    pub fn sample<R: Rng>(op: Op, rng: &mut R) -> Case {
        let (m, n, k) = (rng.gen_range(1..=6), rng.gen_range(1..=6), rng.gen_range(1..=6));
        let mut c = Case {
            op,
            inputs: vec![],
            idx: vec![],
            targets: vec![],
            scalar: 0.0,
            start: 0,
            len: 0,
        };
        match op {
            Op::MatMul => c.inputs = vec![rand_tensor(rng, &[m, k]), rand_tensor(rng, &[k, n])],
            Op::MatMulNt => c.inputs = vec![rand_tensor(rng, &[m, k]), rand_tensor(rng, &[n, k])],
            Op::Add | Op::Mul => c.inputs = vec![rand_tensor(rng, &[m, n]), rand_tensor(rng, &[m, n])],
            Op::AddRow => c.inputs = vec![rand_tensor(rng, &[m, n]), rand_tensor(rng, &[n])],
            Op::Scale => {
                c.inputs = vec![rand_tensor(rng, &[m, n])];
                c.scalar = rng.gen_range(-2.0..2.0);
            }
            Op::Relu => {
                // keep clear of the kink so central differences are exact
                let v: Vec<f64> = (0..m * n)
                    .map(|_| {
                        let x: f64 = rng.gen_range(0.05..1.5);
                        (if rng.gen_bool(0.5) { x } else { -x }) as f32 as f64
                    })
                    .collect();
                c.inputs = vec![Tensor::from_f64(&[m, n], &v).unwrap()];
            }
            Op::LayerNorm => {
                let n = n.max(2);
                c.inputs = vec![rand_tensor(rng, &[m, n]), rand_tensor(rng, &[n]), rand_tensor(rng, &[n])];
                c.scalar = 1e-5;
            }
            Op::GatherRows | Op::Embedding => {
                c.inputs = vec![rand_tensor(rng, &[m, n])];
                c.idx = (0..rng.gen_range(1..=8)).map(|_| rng.gen_range(0..m)).collect();
            }
            Op::ConcatCols => {
                c.inputs = (0..rng.gen_range(1..=4))
                    .map(|_| {
                        let w = rng.gen_range(1..=4);
                        rand_tensor(rng, &[m, w])
                    })
                    .collect();
            }
            Op::SliceCols => {
                c.inputs = vec![rand_tensor(rng, &[m, n])];
                c.start = rng.gen_range(0..n);
                c.len = rng.gen_range(1..=n - c.start);
            }
            Op::Transpose | Op::Sum | Op::Mean => c.inputs = vec![rand_tensor(rng, &[m, n])],
            Op::Softmax | Op::LogSoftmax => {
                c.inputs = vec![rand_tensor(rng, &[m, n])];
                c.scalar = rng.gen_range(0.3..2.0);
            }
            Op::Pick => {
                c.inputs = vec![rand_tensor(rng, &[m, n])];
                c.targets = targets(rng, m, n);
            }
            Op::AddAll => {
                c.inputs = (0..rng.gen_range(1..=4)).map(|_| rand_tensor(rng, &[m, n])).collect();
            }
            Op::NllSum => {
                c.inputs = vec![rand_tensor(rng, &[m, n])];
                c.targets = targets(rng, m, n);
                c.scalar = rng.gen_range(0.3..2.0);
            }
            Op::CrossEntropy => {
                c.inputs = vec![rand_tensor(rng, &[m, n])];
                c.targets = targets(rng, m, n);
            }
        }
        c
    }

    pub fn build<T: Real>(&self, g: &mut Graph<'_, T>, x: &[Var]) -> Result<Var> {
        match self.op {
            Op::MatMul => g.matmul(x[0], x[1]),
            Op::MatMulNt => g.matmul_nt(x[0], x[1]),
            Op::Add => g.add(x[0], x[1]),
            Op::Mul => g.mul(x[0], x[1]),
            Op::AddRow => g.add_row(x[0], x[1]),
            Op::Scale => g.scale(x[0], self.scalar),
            Op::Relu => g.relu(x[0]),
            Op::LayerNorm => g.layer_norm(x[0], x[1], x[2], self.scalar),
            Op::GatherRows => g.gather_rows(x[0], &self.idx),
            Op::Embedding => g.embedding(x[0], &self.idx),
            Op::ConcatCols => g.concat_cols(x),
            Op::SliceCols => g.slice_cols(x[0], self.start, self.len),
            Op::Transpose => g.transpose(x[0]),
            Op::Softmax => g.softmax(x[0], self.scalar),
            Op::LogSoftmax => g.log_softmax(x[0], self.scalar),
            Op::Pick => g.pick(x[0], &self.targets),
            Op::Sum => g.sum(x[0]),
            Op::Mean => g.mean(x[0]),
            Op::AddAll => g.add_all(x),
            Op::NllSum => g.nll_sum(x[0], &self.targets, self.scalar),
            Op::CrossEntropy => g.cross_entropy(x[0], &self.targets),
        }
    }

    fn store<T: Real>(&self) -> ParamStore<T> {
        let mut s = ParamStore::new();
        for (i, t) in self.inputs.iter().enumerate() {
            s.add(format!("x{i}"), t.cast()).unwrap();
        }
        s
    }

    /// `sum(op(x) * w)` for fixed weights `w`, so every output element
    /// contributes to the checked gradient.
    fn loss<T: Real>(&self, store: &ParamStore<T>, weights: &[f64]) -> Result<(f64, Option<levrl::tensor::Gradients<T>>)> {
        let mut g = Graph::new(store);
        let xs: Vec<Var> = (0..self.inputs.len())
            .map(|i| g.param(store.id(&format!("x{i}")).unwrap()))
            .collect();
        let out = self.build(&mut g, &xs)?;
        let shape = g.shape(out).to_vec();
        let w = g.input(Tensor::from_f64(&shape, &weights[..shape.iter().product::<usize>()])?)?;
        let prod = g.mul(out, w)?;
        let loss = g.sum(prod)?;
        let value = g.value(loss).item().to_f64().unwrap();
        Ok((value, Some(g.backward(loss)?)))
    }

    /// Maximum relative error of the `T` tape gradient against central
    /// differences of the f64 forward pass.
    pub fn max_rel_error<T: Real>(&self, weights: &[f64]) -> Result<f64> {
        let analytic_store = self.store::<T>();
        let (_, grads) = self.loss(&analytic_store, weights)?;
        let grads = grads.unwrap();
        let h = 1e-5;
        let mut worst = 0.0f64;
        for (i, t) in self.inputs.iter().enumerate() {
            let id = analytic_store.id(&format!("x{i}")).unwrap();
            let analytic: Vec<f64> = grads.get(id).map_or(vec![0.0; t.len()], |g| g.to_f64_vec());
            for e in 0..t.len() {
                let eval = |delta: f64| -> Result<f64> {
                    let mut s = self.store::<f64>();
                    s.by_name_mut(&format!("x{i}")).unwrap().tensor.data_mut()[e] += delta;
                    Ok(self.loss(&s, weights)?.0)
                };
                let numeric = (eval(h)? - eval(-h)?) / (2.0 * h);
                let a = analytic[e];
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
                worst = worst.max(err);
            }
        }
        Ok(worst)
    }
}

/// Worst f32 and f64 relative errors of `op` over `shapes` random cases.
pub fn check_op<R: Rng>(op: Op, shapes: usize, rng: &mut R) -> Result<(f64, f64)> {
    let mut worst = (0.0f64, 0.0f64);
    for _ in 0..shapes {
        let case = Case::sample(op, rng);
        let weights: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        worst.0 = worst.0.max(case.max_rel_error::<f32>(&weights)?);
        worst.1 = worst.1.max(case.max_rel_error::<f64>(&weights)?);
    }
    Ok(worst)
}

// ---------------------------------------------------------------- edit distance

/// Edit distance straight from its recursive definition (memoised only to
/// keep exhaustive enumeration affordable).
pub fn brute_levenshtein(a: &[Token], b: &[Token]) -> usize {
    // memo[i][j] caches the distance between the suffixes a[i..] and b[j..]
    fn go(a: &[Token], b: &[Token], i: usize, j: usize, memo: &mut [Vec<Option<usize>>]) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(d) = memo[i][j] {
            return d;
        }
        let d = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo[i][j] = Some(d);
        d
    }
    let mut memo = vec![vec![None; b.len()]; a.len()];
    go(a, b, 0, 0, &mut memo)
}

/// Every sequence of length `0..=max_len` over `alphabet`.
pub fn all_strings(alphabet: &[Token], max_len: usize) -> Vec<Vec<Token>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for &t in alphabet {
                let mut v: Vec<Token> = s.clone();
                v.push(t);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

// ---------------------------------------------------------------- baselines and schedules

/// Mean reward of the other samples, summed directly.
pub fn loo_oracle(rewards: &[f64], i: usize) -> f64 {
    let others: Vec<f64> = rewards
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &r)| r)
        .collect();
    others.iter().sum::<f64>() / others.len() as f64
}

/// Temperatures `tau_0 .. tau_T` by repeated multiplication with
/// `exp(-ln(tau0/tau_t)/T)`.
pub fn iterated_schedule(tau0: f64, tau_t: f64, total: u64) -> Vec<f64> {
    let ratio = (-(tau0 / tau_t).ln() / total as f64).exp();
    let mut out = Vec::with_capacity(total as usize + 1);
    let mut tau = tau0;
    for _ in 0..=total {
        out.push(tau);
        tau *= ratio;
    }
    out
}
