use serde::{Deserialize, Serialize};

use super::{ParamStore, Real, Tensor};
use crate::error::{Error, Result};

fn require_grads<T: Real>(params: &ParamStore<T>) -> Result<()> {
    if let Some(p) = params.iter().find(|p| p.grad.is_none()) {
        return Err(Error::Precondition(format!(
            "parameter `{}` has no gradient",
            p.name
        )));
    }
    Ok(())
}

/// Plain gradient descent: `w -= lr * grad`, then clears every grad.
pub fn sgd_step<T: Real>(params: &mut ParamStore<T>, lr: f64) -> Result<()> {
    require_grads(params)?;
    let lr = T::of(lr);
    for p in params.iter_mut() {
        let g = p.grad.take().expect("checked above");
        for (w, &d) in p.tensor.data_mut().iter_mut().zip(g.data()) {
            *w -= lr * d;
        }
    }
    Ok(())
}

/// Rescales all grads so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Real>(params: &mut ParamStore<T>, max_norm: f64) -> f64 {
    let norm = params.grad_sq_norm().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        params.scale_grads(T::of(max_norm / norm));
    }
    norm
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

pub trait Optimizer<T: Real>: Send {
    /// Applies one update with learning rate `lr` and clears grads.
    fn step(&mut self, params: &mut ParamStore<T>, lr: f64) -> Result<()>;

    /// Named state tensors for checkpointing.
    fn state(&self) -> Vec<(String, Tensor<T>)> {
        Vec::new()
    }

    fn load_state(&mut self, _state: &[(String, Tensor<T>)]) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Sgd;

impl<T: Real> Optimizer<T> for Sgd {
    fn step(&mut self, params: &mut ParamStore<T>, lr: f64) -> Result<()> {
        sgd_step(params, lr)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    config: AdamConfig,
    t: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(params: &ParamStore<T>, config: AdamConfig) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.tensor.shape())).collect();
        Adam {
            config,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}

impl<T: Real> Optimizer<T> for Adam<T> {
    fn step(&mut self, params: &mut ParamStore<T>, lr: f64) -> Result<()> {
        require_grads(params)?;
        if self.m.len() != params.len() {
            return Err(Error::Precondition(
                "optimizer state does not match the parameter set".into(),
            ));
        }
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        let (b1, b2) = (T::of(beta1), T::of(beta2));
        let (one_b1, one_b2) = (T::of(1.0 - beta1), T::of(1.0 - beta2));
        let step = T::of(lr / c1);
        let c2s = T::of(c2.sqrt());
        let eps = T::of(eps);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let g = p.grad.take().expect("checked above");
            let w = p.tensor.data_mut();
            for i in 0..w.len() {
                let gi = g.data()[i];
                let mi = &mut m.data_mut()[i];
                *mi = b1 * *mi + one_b1 * gi;
                let mi = *mi;
                let vi = &mut v.data_mut()[i];
                *vi = b2 * *vi + one_b2 * gi * gi;
                let vhat = vi.sqrt() / c2s;
                w[i] -= step * mi / (vhat + eps);
            }
        }
        Ok(())
    }

    fn state(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = vec![("adam.t".to_string(), Tensor::scalar(T::of(self.t as f64)))];
        for (i, (m, v)) in self.m.iter().zip(&self.v).enumerate() {
            out.push((format!("adam.m.{i}"), m.clone()));
            out.push((format!("adam.v.{i}"), v.clone()));
        }
        out
    }

    fn load_state(&mut self, state: &[(String, Tensor<T>)]) -> Result<()> {
        let find = |name: &str| {
            state
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| Error::Checkpoint(format!("missing optimizer state `{name}`")))
        };
        self.t = find("adam.t")?.item().f64() as u64;
        for i in 0..self.m.len() {
            let m = find(&format!("adam.m.{i}"))?;
            let v = find(&format!("adam.v.{i}"))?;
            if m.shape() != self.m[i].shape() || v.shape() != self.v[i].shape() {
                return Err(Error::Checkpoint(format!("optimizer state {i} has the wrong shape")));
            }
            self.m[i] = m;
            self.v[i] = v;
        }
        Ok(())
    }
}
