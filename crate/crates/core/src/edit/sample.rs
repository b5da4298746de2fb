use rand::Rng;

use super::{EditAction, Phase};
use crate::error::{Error, Result};
use crate::tensor::{check_tau, log_softmax_row, Graph, Real, Tensor, Var};
use crate::vocab::Token;

/// Head logits for one phase, as produced by the model.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyOutput<T> {
    Delete(Tensor<T>),
    Insert(Tensor<T>),
    Replace(Tensor<T>),
}

impl<T: Real> PolicyOutput<T> {
    pub fn new(phase: Phase, logits: Tensor<T>) -> Self {
        match phase {
            Phase::Delete => PolicyOutput::Delete(logits),
            Phase::Insert => PolicyOutput::Insert(logits),
            Phase::Replace => PolicyOutput::Replace(logits),
        }
    }

    pub fn phase(&self) -> Phase {
        match self {
            PolicyOutput::Delete(_) => Phase::Delete,
            PolicyOutput::Insert(_) => Phase::Insert,
            PolicyOutput::Replace(_) => Phase::Replace,
        }
    }

    pub fn logits(&self) -> &Tensor<T> {
        match self {
            PolicyOutput::Delete(t) | PolicyOutput::Insert(t) | PolicyOutput::Replace(t) => t,
        }
    }

    fn rows(&self) -> usize {
        match self.logits().shape() {
            [r, _] => *r,
            _ => 0,
        }
    }
}

fn action_from_classes(phase: Phase, classes: Vec<usize>) -> EditAction {
    match phase {
        Phase::Delete => EditAction::Delete(classes.into_iter().map(|c| c == 1).collect()),
        Phase::Insert => EditAction::Insert(classes),
        Phase::Replace => EditAction::Replace(classes.into_iter().map(|c| c as Token).collect()),
    }
}

/// Draws every position independently from its tempered distribution.
/// Returns the action and the summed log-probability of its components.
pub fn sample_edit<T: Real, R: Rng + ?Sized>(
    policy: &PolicyOutput<T>,
    tau: f64,
    rng: &mut R,
) -> Result<(EditAction, f64)> {
    check_tau(tau)?;
    let logits = policy.logits();
    let rows = policy.rows();
    let cols = if rows == 0 { 0 } else { logits.dims2().1 };
    let mut classes = Vec::with_capacity(rows);
    let mut log_prob = 0.0;
    let mut lp = vec![T::zero(); cols];
    for r in 0..rows {
        log_softmax_row(logits.row(r), T::of(tau), &mut lp);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        // fall back to the most likely class if rounding leaves `u` uncovered
        let mut pick = crate::tensor::argmax(&lp);
        for (c, &l) in lp.iter().enumerate() {
            acc += l.f64().exp();
            if u < acc {
                pick = c;
                break;
            }
        }
        log_prob += lp[pick].f64();
        classes.push(pick);
    }
    if !log_prob.is_finite() {
        return Err(Error::Numeric("sampled action has non-finite log-probability".into()));
    }
    Ok((action_from_classes(policy.phase(), classes), log_prob))
}

/// Argmax action (temperature-free).
pub fn greedy_edit<T: Real>(policy: &PolicyOutput<T>) -> EditAction {
    let classes = if policy.rows() == 0 {
        Vec::new()
    } else {
        policy.logits().argmax_rows()
    };
    action_from_classes(policy.phase(), classes)
}

fn check_action<T: Real>(logits: &Tensor<T>, action: &EditAction) -> Result<Vec<Option<usize>>> {
    let classes = action.classes();
    let (rows, cols) = match logits.shape() {
        [r, c] => (*r, *c),
        s => return Err(Error::Shape(format!("policy logits must be a matrix, got {s:?}"))),
    };
    if classes.len() != rows {
        return Err(Error::Shape(format!(
            "action has {} components for {rows} scored positions",
            classes.len()
        )));
    }
    if let Some(c) = classes.iter().find(|&&c| c >= cols) {
        return Err(Error::Shape(format!("class {c} outside {cols} classes")));
    }
    Ok(classes.into_iter().map(Some).collect())
}

/// Log-probability of `action` under the tempered logits, without a graph.
pub fn score_action_value<T: Real>(logits: &Tensor<T>, action: &EditAction, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let targets = check_action(logits, action)?;
    let (_, cols) = logits.dims2();
    let mut lp = vec![T::zero(); cols];
    let mut total = 0.0;
    for (r, t) in targets.iter().enumerate() {
        log_softmax_row(logits.row(r), T::of(tau), &mut lp);
        total += lp[t.unwrap()].f64();
    }
    Ok(total)
}

/// Differentiable log-probability of `action` under tempered `logits`.
pub fn score_action<T: Real>(g: &mut Graph<'_, T>, logits: Var, action: &EditAction, tau: f64) -> Result<Var> {
    let targets = check_action(g.value(logits), action)?;
    if targets.is_empty() {
        return g.input(Tensor::scalar(T::zero()));
    }
    let nll = g.nll_sum(logits, &targets, tau)?;
    g.scale(nll, -1.0)
}
