//! Environments the REINFORCE updates can drive.
//!
//! An [`Episode`] walks a fixed list of [`Slot`]s from an initial state. At
//! each slot the policy is evaluated once ([`Episode::prepare`]) and any
//! number of actions can then be drawn from that evaluation
//! ([`Episode::act`]), each returning the next state and a differentiable
//! log-probability.

use rand::Rng as _;

use super::stats::{slots, Slot, SlotKind};
use crate::bleu::{sentence_bleu, Smoothing};
use crate::edit::{phase_logits, step_from_logits, take_step};
use crate::edit::{Hypothesis, Phase};
use crate::error::{Error, Result};
use crate::model::LevenshteinModel;
use crate::rng::Rng;
use crate::tensor::{softmax_tempered, Graph, ParamId, ParamStore, Real, Tensor, Var};
use crate::vocab::Token;

pub trait Episode<T: Real> {
    type State: Clone + PartialEq;
    type Prepared;

    fn slots(&self) -> &[Slot];

    fn initial(&self) -> Self::State;

    fn prepare(&self, g: &mut Graph<'_, T>, state: &Self::State, slot: Slot) -> Result<Self::Prepared>;

    /// Samples one action at temperature `tau` and applies it.
    fn act(
        &self,
        g: &mut Graph<'_, T>,
        prepared: &Self::Prepared,
        state: &Self::State,
        slot: Slot,
        tau: f64,
        rng: &mut Rng,
    ) -> Result<(Self::State, Var)>;

    fn reward(&self, state: &Self::State) -> Result<f64>;
}

/// Refinement of one source from the null string, rewarded by sentence BLEU
/// against its reference. Insert and replace form one slot, so their
/// log-probabilities are summed.
pub struct LevtEpisode<'a, T: Real> {
    model: &'a LevenshteinModel<T>,
    memory: Var,
    reference: &'a [Token],
    smoothing: Smoothing,
    slots: Vec<Slot>,
}

impl<'a, T: Real> LevtEpisode<'a, T> {
    /// Encodes `source` into `g`; the k samples of every slot share this pass.
    pub fn new(
        model: &'a LevenshteinModel<T>,
        g: &mut Graph<'_, T>,
        source: &[Token],
        reference: &'a [Token],
        n_iterations: usize,
        smoothing: Smoothing,
    ) -> Result<Self> {
        if n_iterations == 0 {
            return Err(Error::InvalidArgument("rollouts need at least one iteration".into()));
        }
        Ok(LevtEpisode {
            model,
            memory: model.encode(g, source)?,
            reference,
            smoothing,
            slots: slots(n_iterations),
        })
    }
}

impl<T: Real> Episode<T> for LevtEpisode<'_, T> {
    type State = Hypothesis;
    type Prepared = Option<Var>;

    fn slots(&self) -> &[Slot] {
        &self.slots
    }

    fn initial(&self) -> Hypothesis {
        Hypothesis::null()
    }

    fn prepare(&self, g: &mut Graph<'_, T>, state: &Hypothesis, slot: Slot) -> Result<Option<Var>> {
        let phase = match slot.kind {
            SlotKind::Delete => Phase::Delete,
            SlotKind::InsertReplace => Phase::Insert,
        };
        phase_logits(self.model, g, self.memory, state, phase)
    }

    fn act(
        &self,
        g: &mut Graph<'_, T>,
        prepared: &Option<Var>,
        state: &Hypothesis,
        slot: Slot,
        tau: f64,
        rng: &mut Rng,
    ) -> Result<(Hypothesis, Var)> {
        let it = slot.iteration;
        match slot.kind {
            SlotKind::Delete => {
                let (step, lp) = step_from_logits(self.model, g, *prepared, state, Phase::Delete, Some(tau), rng, it)?;
                Ok((step.after, lp))
            }
            SlotKind::InsertReplace => {
                let (ins, lp_ins) = step_from_logits(self.model, g, *prepared, state, Phase::Insert, Some(tau), rng, it)?;
                let (rep, lp_rep) = take_step(self.model, g, self.memory, &ins.after, Phase::Replace, Some(tau), rng, it)?;
                Ok((rep.after, g.add(lp_ins, lp_rep)?))
            }
        }
    }

    fn reward(&self, state: &Hypothesis) -> Result<f64> {
        sentence_bleu(state.content(), self.reference, self.smoothing)
    }
}

/// One-slot, two-action task: a single logit pair, action `a` pays
/// `rewards[a]`. The state is the chosen action; no action pays 0.
#[derive(Clone, Debug)]
pub struct Bandit {
    logits: ParamId,
    rewards: [f64; 2],
    slots: [Slot; 1],
}

impl Bandit {
    pub const PARAM: &'static str = "bandit.logits";

    /// Registers a zero-initialized `[1 × 2]` logit parameter (π = ½, ½).
    pub fn new<T: Real>(params: &mut ParamStore<T>, rewards: [f64; 2]) -> Result<Self> {
        let logits = params.add(Self::PARAM, Tensor::zeros(&[1, 2]))?;
        Ok(Bandit {
            logits,
            rewards,
            slots: [Slot {
                iteration: 1,
                kind: SlotKind::InsertReplace,
            }],
        })
    }

    /// π(action) at temperature 1.
    pub fn prob<T: Real>(&self, params: &ParamStore<T>, action: usize) -> f64 {
        softmax_tempered(params.value(self.logits), 1.0)
            .map(|p| p.data()[action].f64())
            .unwrap_or(f64::NAN)
    }
}

impl<T: Real> Episode<T> for Bandit {
    type State = Option<usize>;
    type Prepared = Var;

    fn slots(&self) -> &[Slot] {
        &self.slots
    }

    fn initial(&self) -> Option<usize> {
        None
    }

    fn prepare(&self, g: &mut Graph<'_, T>, _: &Option<usize>, _: Slot) -> Result<Var> {
        Ok(g.param(self.logits))
    }

    fn act(&self, g: &mut Graph<'_, T>, logits: &Var, _: &Option<usize>, _: Slot, tau: f64, rng: &mut Rng) -> Result<(Option<usize>, Var)> {
        let p = softmax_tempered(g.value(*logits), tau)?;
        let action = usize::from(rng.gen::<f64>() >= p.data()[0].f64());
        let nll = g.nll_sum(*logits, &[Some(action)], tau)?;
        Ok((Some(action), g.scale(nll, -1.0)?))
    }

    fn reward(&self, state: &Option<usize>) -> Result<f64> {
        Ok(state.map_or(0.0, |a| self.rewards[a]))
    }
}
