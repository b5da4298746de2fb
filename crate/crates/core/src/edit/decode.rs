use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sample::greedy_edit;
use super::{clamp_insert_counts, sample_edit, score_action, score_action_value, EditAction, Hypothesis, Phase, PolicyOutput};
use crate::bleu::{sentence_bleu, Smoothing};
use crate::error::{Error, Result};
use crate::model::LevenshteinModel;
use crate::tensor::{Graph, Real, Tensor, Var};
use crate::vocab::Token;

/// One atomic edit inside a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditStep {
    pub iteration: usize,
    pub before: Hypothesis,
    pub action: EditAction,
    pub log_prob: f64,
    pub after: Hypothesis,
    /// Sentence BLEU of `after`, recorded after deletions and after the
    /// replacement that completes an insert+replace pair.
    pub bleu: Option<f64>,
    /// Insert counts were cut to respect `max_seq_len`.
    pub clamped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditTrace {
    pub steps: Vec<EditStep>,
    pub final_hypothesis: Hypothesis,
}

impl EditTrace {
    /// `after` of each step equals `before` of the next.
    pub fn is_chained(&self) -> bool {
        self.steps.windows(2).all(|w| w[0].after == w[1].before)
            && self
                .steps
                .last()
                .is_none_or(|s| s.after == self.final_hypothesis)
    }

    pub fn step_bleu(&self) -> Vec<f64> {
        self.steps.iter().filter_map(|s| s.bleu).collect()
    }

    pub fn total_log_prob(&self) -> f64 {
        self.steps.iter().map(|s| s.log_prob).sum()
    }

    pub fn clamped(&self) -> bool {
        self.steps.iter().any(|s| s.clamped)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeResult {
    pub hypothesis: Hypothesis,
    pub iterations: usize,
}

/// Head logits for `phase`, or `None` when there is nothing to score
/// (no deletable tokens, no placeholders).
pub(crate) fn phase_logits<T: Real>(
    model: &LevenshteinModel<T>,
    g: &mut Graph<'_, T>,
    memory: Var,
    hyp: &Hypothesis,
    phase: Phase,
) -> Result<Option<Var>> {
    let empty = match phase {
        Phase::Delete => hyp.num_deletable() == 0,
        Phase::Insert => false,
        Phase::Replace => hyp.num_placeholders() == 0,
    };
    if empty {
        return Ok(None);
    }
    model.forward(g, phase, hyp, memory).map(Some)
}

/// Chooses an action from precomputed logits (greedy when `tau` is `None`),
/// applies it, and returns the step with its differentiable log-probability.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_from_logits<T: Real, R: Rng + ?Sized>(
    model: &LevenshteinModel<T>,
    g: &mut Graph<'_, T>,
    logits: Option<Var>,
    hyp: &Hypothesis,
    phase: Phase,
    tau: Option<f64>,
    rng: &mut R,
    iteration: usize,
) -> Result<(EditStep, Var)> {
    let max_len = model.config().max_seq_len;
    let Some(logits) = logits else {
        let action = match phase {
            Phase::Delete => EditAction::Delete(vec![]),
            Phase::Insert => EditAction::Insert(vec![0; hyp.num_gaps()]),
            Phase::Replace => EditAction::Replace(vec![]),
        };
        let after = action.apply(hyp, max_len)?;
        let zero = g.input(Tensor::scalar(T::zero()))?;
        let step = EditStep {
            iteration,
            before: hyp.clone(),
            action,
            log_prob: 0.0,
            after,
            bleu: None,
            clamped: false,
        };
        return Ok((step, zero));
    };
    let policy = PolicyOutput::new(phase, g.value(logits).clone());
    let score_tau = tau.unwrap_or(1.0);
    let (mut action, mut log_prob) = match tau {
        Some(t) => sample_edit(&policy, t, rng)?,
        None => {
            let a = greedy_edit(&policy);
            let lp = score_action_value(policy.logits(), &a, 1.0)?;
            (a, lp)
        }
    };
    let mut clamped = false;
    if let EditAction::Insert(counts) = &mut action {
        clamped = clamp_insert_counts(counts, hyp.len(), max_len);
    }
    if clamped {
        log_prob = score_action_value(policy.logits(), &action, score_tau)?;
    }
    let after = action.apply(hyp, max_len)?;
    let lp_var = score_action(g, logits, &action, score_tau)?;
    let step = EditStep {
        iteration,
        before: hyp.clone(),
        action,
        log_prob,
        after,
        bleu: None,
        clamped,
    };
    Ok((step, lp_var))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn take_step<T: Real, R: Rng + ?Sized>(
    model: &LevenshteinModel<T>,
    g: &mut Graph<'_, T>,
    memory: Var,
    hyp: &Hypothesis,
    phase: Phase,
    tau: Option<f64>,
    rng: &mut R,
    iteration: usize,
) -> Result<(EditStep, Var)> {
    let logits = phase_logits(model, g, memory, hyp, phase)?;
    step_from_logits(model, g, logits, hyp, phase, tau, rng, iteration)
}

/// Argmax refinement from the null string. Stops when two consecutive
/// iterations produce the same hypothesis, or after `max_iters`.
pub fn greedy_decode<T: Real>(
    model: &LevenshteinModel<T>,
    source: &[Token],
    max_iters: usize,
) -> Result<DecodeResult> {
    let mut g = model.graph();
    let memory = model.encode(&mut g, source)?;
    let mut hyp = Hypothesis::null();
    let mut prev: Option<Hypothesis> = None;
    let mut unused = rand::rngs::mock::StepRng::new(0, 0);
    for it in 1..=max_iters {
        for phase in [Phase::Delete, Phase::Insert, Phase::Replace] {
            let (step, _) = take_step(model, &mut g, memory, &hyp, phase, None, &mut unused, it)?;
            hyp = step.after;
        }
        if prev.as_ref() == Some(&hyp) {
            return Ok(DecodeResult {
                hypothesis: hyp,
                iterations: it,
            });
        }
        prev = Some(hyp.clone());
    }
    Ok(DecodeResult {
        hypothesis: hyp,
        iterations: max_iters,
    })
}

/// Phases of iteration `it`; the first iteration starts from the null string
/// and has nothing to delete.
pub fn iteration_phases(it: usize) -> &'static [Phase] {
    if it == 1 {
        &[Phase::Insert, Phase::Replace]
    } else {
        &[Phase::Delete, Phase::Insert, Phase::Replace]
    }
}

/// Sampled rollout inside an existing graph; returns the trace and one
/// log-probability node per atomic edit.
pub(crate) fn rollout_in_graph<T: Real, R: Rng + ?Sized>(
    model: &LevenshteinModel<T>,
    g: &mut Graph<'_, T>,
    memory: Var,
    n_iterations: usize,
    tau: f64,
    rng: &mut R,
    scorer: Option<(&[Token], Smoothing)>,
) -> Result<(EditTrace, Vec<Var>)> {
    if n_iterations == 0 {
        return Err(Error::InvalidArgument("rollout needs at least one iteration".into()));
    }
    let mut hyp = Hypothesis::null();
    let mut steps = Vec::new();
    let mut log_probs = Vec::new();
    for it in 1..=n_iterations {
        for &phase in iteration_phases(it) {
            let (mut step, lp) = take_step(model, g, memory, &hyp, phase, Some(tau), rng, it)?;
            if let Some((reference, smoothing)) = scorer {
                if phase != Phase::Insert {
                    step.bleu = Some(sentence_bleu(step.after.content(), reference, smoothing)?);
                }
            }
            hyp = step.after.clone();
            steps.push(step);
            log_probs.push(lp);
        }
    }
    Ok((
        EditTrace {
            steps,
            final_hypothesis: hyp,
        },
        log_probs,
    ))
}

/// Temperature-`tau` rollout from the null string, recording every atomic edit.
#[allow(clippy::too_many_arguments)]
pub fn rollout<T: Real, R: Rng + ?Sized>(
    model: &LevenshteinModel<T>,
    source: &[Token],
    n_iterations: usize,
    tau: f64,
    rng: &mut R,
    record_step_bleu: bool,
    reference: Option<&[Token]>,
    smoothing: Smoothing,
) -> Result<EditTrace> {
    let scorer = match (record_step_bleu, reference) {
        (true, None) => {
            return Err(Error::Precondition(
                "step BLEU requested without a reference".into(),
            ))
        }
        (true, Some(r)) => Some((r, smoothing)),
        (false, _) => None,
    };
    let mut g = model.graph();
    let memory = model.encode(&mut g, source)?;
    rollout_in_graph(model, &mut g, memory, n_iterations, tau, rng, scorer).map(|(t, _)| t)
}
