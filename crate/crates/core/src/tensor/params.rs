use std::collections::HashMap;

use super::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Parameter<T> {
    pub name: String,
    pub tensor: Tensor<T>,
    pub grad: Option<Tensor<T>>,
}

/// Named trainable tensors. Names are unique; insertion order is stable and
/// defines checkpoint order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
    by_name: HashMap<String, ParamId>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            params: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate parameter name `{name}`"
            )));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter {
            name,
            tensor,
            grad: None,
        });
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].tensor
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Parameter<T>> {
        let id = self.id(name)?;
        Some(&mut self.params[id.0])
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    /// Adds `grads` into every parameter's grad, materializing zeros for
    /// parameters the graph never reached.
    pub fn accumulate(&mut self, grads: &Gradients<T>) {
        for (p, g) in self.params.iter_mut().zip(&grads.0) {
            let acc = p
                .grad
                .get_or_insert_with(|| Tensor::zeros(p.tensor.shape()));
            if let Some(g) = g {
                acc.add_assign(g);
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    pub fn grad_sq_norm(&self) -> f64 {
        self.params
            .iter()
            .filter_map(|p| p.grad.as_ref())
            .map(Tensor::sq_norm)
            .sum()
    }

    pub fn scale_grads(&mut self, factor: T) {
        for g in self.params.iter_mut().filter_map(|p| p.grad.as_mut()) {
            for v in g.data_mut() {
                *v *= factor;
            }
        }
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Parameter {
                    name: p.name.clone(),
                    tensor: p.tensor.cast(),
                    grad: p.grad.as_ref().map(Tensor::cast),
                })
                .collect(),
            by_name: self.by_name.clone(),
        }
    }
}

/// Per-parameter gradients produced by one backward pass, indexed by [`ParamId`].
#[derive(Clone, Debug)]
pub struct Gradients<T>(pub(crate) Vec<Option<Tensor<T>>>);

impl<T: Real> Gradients<T> {
    pub fn empty(n: usize) -> Self {
        Gradients(vec![None; n])
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.0[id.0].as_ref()
    }

    /// Sum in place; the order of additions is the caller's order.
    pub fn merge(&mut self, other: Gradients<T>) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            match (a.as_mut(), b) {
                (Some(x), Some(y)) => x.add_assign(&y),
                (None, Some(y)) => *a = Some(y),
                _ => {}
            }
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.0.iter().flatten().map(Tensor::sq_norm).sum()
    }

    pub fn is_all_zero(&self) -> bool {
        self.0
            .iter()
            .flatten()
            .all(|t| t.data().iter().all(|v| *v == T::zero()))
    }
}
