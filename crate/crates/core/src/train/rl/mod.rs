//! REINFORCE fine-tuning with a leave-one-out baseline.
//!
//! Two ways to assign rewards to actions:
//!
//! * episodic: `k` independent rollouts per source; each trajectory's final
//!   BLEU, minus the mean of the other `k − 1`, weights the summed
//!   log-probability of every action in it;
//! * stepwise: a single walk through the rollout slots. At each slot `k`
//!   candidate actions are drawn from the current state, each rewarded by the
//!   BLEU change it causes; the advantage weights that slot's log-probability
//!   only, and the walk continues from one candidate picked uniformly.
//!
//! A batch whose advantages are all zero produces no parameter update at
//! all, not even a moment-decay step of the optimizer.

pub mod episode;
pub mod schedule;
pub mod stats;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use episode::{Bandit, Episode, LevtEpisode};
pub use schedule::{temperature_at, trajectory_violations, ScheduleKind, TemperatureSchedule};
pub use stats::{advantages, loo_baseline, slots, AdvantageRow, AdvantageStats, Slot, SlotKind};

use super::{evaluate, DECODE_ITERS};
use crate::bleu::Smoothing;
use crate::data::Pair;
use crate::edit::rollout;
use crate::error::{Error, Result};
use crate::model::LevenshteinModel;
use crate::rng::{substream, Rng};
use crate::tensor::{clip_grad_norm, Adam, AdamConfig, Gradients, Graph, Optimizer, ParamStore, Real, Var};
use crate::vocab::Token;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Stepwise,
    Episodic,
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stepwise" => Ok(Approach::Stepwise),
            "episodic" => Ok(Approach::Episodic),
            _ => Err(Error::InvalidArgument(format!(
                "unknown approach `{s}` (expected stepwise or episodic)"
            ))),
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Approach::Stepwise => "stepwise",
            Approach::Episodic => "episodic",
        })
    }
}

/// What one source contributed to an update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SourceReport {
    /// Episodic: the `k` final rewards. Stepwise: the reward of the state the
    /// walk ended in.
    pub rewards: Vec<f64>,
    /// Advantages per rewarded slot. Episodic rollouts have a single
    /// trajectory-level entry, keyed by the last slot.
    pub advantages: Vec<(Slot, Vec<f64>)>,
}

fn weighted_sum<T: Real>(g: &mut Graph<'_, T>, log_probs: &[Var], adv: &[f64], acc: &mut Vec<Var>) -> Result<()> {
    for (&lp, &a) in log_probs.iter().zip(adv) {
        if a != 0.0 {
            acc.push(g.scale(lp, -a)?);
        }
    }
    Ok(())
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    Ok(())
}

/// Episodic REINFORCE loss for one source; `None` when every advantage is 0.
pub fn episodic_loss<T: Real, E: Episode<T>>(
    g: &mut Graph<'_, T>,
    ep: &E,
    k: usize,
    tau: f64,
    rng: &mut Rng,
) -> Result<(Option<Var>, SourceReport)> {
    check_k(k)?;
    let mut rewards = Vec::with_capacity(k);
    let mut log_probs = Vec::with_capacity(k);
    for _ in 0..k {
        let mut state = ep.initial();
        let mut terms = Vec::with_capacity(ep.slots().len());
        for &slot in ep.slots() {
            let prepared = ep.prepare(g, &state, slot)?;
            let (next, lp) = ep.act(g, &prepared, &state, slot, tau, rng)?;
            terms.push(lp);
            state = next;
        }
        rewards.push(ep.reward(&state)?);
        log_probs.push(g.add_all(&terms)?);
    }
    let adv = advantages(&rewards)?;
    let mut loss = Vec::new();
    weighted_sum(g, &log_probs, &adv, &mut loss)?;
    let last = *ep.slots().last().expect("episodes have at least one slot");
    let report = SourceReport {
        rewards,
        advantages: vec![(last, adv)],
    };
    let loss = if loss.is_empty() { None } else { Some(g.add_all(&loss)?) };
    Ok((loss, report))
}

/// Stepwise REINFORCE loss for one source; `None` when every advantage is 0.
pub fn stepwise_loss<T: Real, E: Episode<T>>(
    g: &mut Graph<'_, T>,
    ep: &E,
    k: usize,
    tau: f64,
    rng: &mut Rng,
) -> Result<(Option<Var>, SourceReport)> {
    check_k(k)?;
    let mut state = ep.initial();
    let mut before = ep.reward(&state)?;
    let mut loss = Vec::new();
    let mut per_slot = Vec::with_capacity(ep.slots().len());
    for &slot in ep.slots() {
        let prepared = ep.prepare(g, &state, slot)?;
        let mut next = Vec::with_capacity(k);
        let mut log_probs = Vec::with_capacity(k);
        let mut after = Vec::with_capacity(k);
        for _ in 0..k {
            let (s, lp) = ep.act(g, &prepared, &state, slot, tau, rng)?;
            after.push(ep.reward(&s)?);
            next.push(s);
            log_probs.push(lp);
        }
        let gains: Vec<f64> = after.iter().map(|r| r - before).collect();
        let adv = advantages(&gains)?;
        weighted_sum(g, &log_probs, &adv, &mut loss)?;
        per_slot.push((slot, adv));
        let pick = rng.gen_range(0..k);
        before = after[pick];
        state = next.swap_remove(pick);
    }
    let report = SourceReport {
        rewards: vec![before],
        advantages: per_slot,
    };
    let loss = if loss.is_empty() { None } else { Some(g.add_all(&loss)?) };
    Ok((loss, report))
}

/// Summed gradients of a batch plus what each source reported.
pub struct BatchOutcome<T> {
    pub grads: Gradients<T>,
    pub sources: Vec<SourceReport>,
}

impl<T: Real> BatchOutcome<T> {
    pub fn mean_reward(&self) -> f64 {
        mean(self.sources.iter().flat_map(|s| s.rewards.iter().copied()))
    }

    pub fn mean_abs_advantage(&self) -> f64 {
        mean(
            self.sources
                .iter()
                .flat_map(|s| s.advantages.iter().flat_map(|(_, a)| a.iter().map(|x| x.abs()))),
        )
    }

    /// Adds every per-slot advantage vector to `stats`, in source order.
    pub fn record_into(&self, stats: &mut AdvantageStats) {
        for s in &self.sources {
            for (slot, adv) in &s.advantages {
                stats.record(*slot, adv);
            }
        }
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (n, sum) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Differentiates the batch-mean loss of `n_sources` episodes. Episode `i`
/// is built by `make(graph, i)` and draws from the stream
/// `(seed, "rollout", [step, i])`, so results do not depend on threading.
#[allow(clippy::too_many_arguments)]
pub fn batch_gradients<T, E, F>(
    params: &ParamStore<T>,
    n_sources: usize,
    approach: Approach,
    k: usize,
    tau: f64,
    seed: u64,
    step: u64,
    make: F,
) -> Result<BatchOutcome<T>>
where
    T: Real,
    E: Episode<T>,
    F: Fn(&mut Graph<'_, T>, usize) -> Result<E> + Sync,
{
    if n_sources == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let scale = 1.0 / n_sources as f64;
    let per_source: Vec<(Option<Gradients<T>>, SourceReport)> = (0..n_sources)
        .into_par_iter()
        .map(|i| {
            let mut g = Graph::new(params);
            let ep = make(&mut g, i)?;
            let mut rng = substream(seed, "rollout", &[step, i as u64]);
            let (loss, report) = match approach {
                Approach::Episodic => episodic_loss(&mut g, &ep, k, tau, &mut rng)?,
                Approach::Stepwise => stepwise_loss(&mut g, &ep, k, tau, &mut rng)?,
            };
            let grads = match loss {
                Some(l) => {
                    let l = g.scale(l, scale)?;
                    Some(g.backward(l)?)
                }
                None => None,
            };
            Ok((grads, report))
        })
        .collect::<Result<_>>()?;
    let mut grads = Gradients::empty(params.len());
    let mut sources = Vec::with_capacity(n_sources);
    for (g, r) in per_source {
        if let Some(g) = g {
            grads.merge(g);
        }
        sources.push(r);
    }
    Ok(BatchOutcome { grads, sources })
}

/// Clips and applies `grads`; returns the pre-clip norm, or `None` without
/// touching parameters or optimizer state when the gradient is exactly zero.
pub fn apply_update<T: Real>(
    params: &mut ParamStore<T>,
    optimizer: &mut dyn Optimizer<T>,
    grads: &Gradients<T>,
    lr: f64,
    clip_norm: f64,
) -> Result<Option<f64>> {
    if grads.is_all_zero() {
        return Ok(None);
    }
    params.zero_grad();
    params.accumulate(grads);
    let norm = clip_grad_norm(params, clip_norm);
    optimizer.step(params, lr)?;
    Ok(Some(norm))
}

/// Knobs shared by every update call.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateArgs {
    pub k: usize,
    pub tau: f64,
    pub lr: f64,
    pub clip_norm: f64,
    pub seed: u64,
    pub step: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub tau: f64,
    pub mean_reward: f64,
    pub mean_abs_advantage: f64,
    /// Gradient norm before clipping (0 when no update happened).
    pub grad_norm: f64,
    pub updated: bool,
}

fn finish<T: Real>(
    params: &mut ParamStore<T>,
    optimizer: &mut dyn Optimizer<T>,
    outcome: &BatchOutcome<T>,
    args: &UpdateArgs,
) -> Result<StepReport> {
    let norm = apply_update(params, optimizer, &outcome.grads, args.lr, args.clip_norm)?;
    Ok(StepReport {
        step: args.step,
        tau: args.tau,
        mean_reward: outcome.mean_reward(),
        mean_abs_advantage: outcome.mean_abs_advantage(),
        grad_norm: norm.unwrap_or(0.0),
        updated: norm.is_some(),
    })
}

/// One update of a parameter set whose episodes do not borrow it (the
/// contrived bandit task, for instance).
pub fn reinforce_update<T, E, F>(
    params: &mut ParamStore<T>,
    optimizer: &mut dyn Optimizer<T>,
    approach: Approach,
    n_sources: usize,
    args: &UpdateArgs,
    make: F,
) -> Result<StepReport>
where
    T: Real,
    E: Episode<T>,
    F: Fn(&mut Graph<'_, T>, usize) -> Result<E> + Sync,
{
    let outcome = batch_gradients(params, n_sources, approach, args.k, args.tau, args.seed, args.step, make)?;
    finish(params, optimizer, &outcome, args)
}

/// One REINFORCE update of the edit policy over `batch`. Stepwise updates
/// also feed their per-slot advantages into `stats`.
pub fn levt_update<T: Real>(
    model: &mut LevenshteinModel<T>,
    optimizer: &mut dyn Optimizer<T>,
    batch: &[&Pair],
    approach: Approach,
    n_iterations: usize,
    smoothing: Smoothing,
    args: &UpdateArgs,
    stats: Option<&mut AdvantageStats>,
) -> Result<StepReport> {
    let outcome = {
        let frozen = &*model;
        batch_gradients(&frozen.params, batch.len(), approach, args.k, args.tau, args.seed, args.step, |g, i| {
            LevtEpisode::new(frozen, g, &batch[i].src, &batch[i].tgt, n_iterations, smoothing)
        })?
    };
    if let (Approach::Stepwise, Some(stats)) = (approach, stats) {
        outcome.record_into(stats);
    }
    finish(&mut model.params, optimizer, &outcome, args)
}

/// Episodic update with terminal sentence-BLEU rewards.
pub fn episodic_update<T: Real>(
    model: &mut LevenshteinModel<T>,
    optimizer: &mut dyn Optimizer<T>,
    batch: &[&Pair],
    n_iterations: usize,
    smoothing: Smoothing,
    args: &UpdateArgs,
) -> Result<StepReport> {
    levt_update(model, optimizer, batch, Approach::Episodic, n_iterations, smoothing, args, None)
}

/// Stepwise update with BLEU-difference rewards per merged edit slot.
#[allow(clippy::too_many_arguments)]
pub fn stepwise_update<T: Real>(
    model: &mut LevenshteinModel<T>,
    optimizer: &mut dyn Optimizer<T>,
    batch: &[&Pair],
    n_iterations: usize,
    smoothing: Smoothing,
    args: &UpdateArgs,
    stats: &mut AdvantageStats,
) -> Result<StepReport> {
    levt_update(model, optimizer, batch, Approach::Stepwise, n_iterations, smoothing, args, Some(stats))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlConfig {
    pub approach: Approach,
    pub schedule: ScheduleKind,
    pub tau0: f64,
    pub tau_t: f64,
    /// Total updates `T`; the annealed schedules reach `tau_t` here.
    pub steps: u64,
    pub batch_size: usize,
    pub k: usize,
    pub lr: f64,
    pub n_iterations: usize,
    pub clip_norm: f64,
    pub reward_smoothing: Smoothing,
    /// Held-out evaluation period in steps; 0 evaluates only at both ends.
    pub eval_every: u64,
    /// Held-out pairs decoded per evaluation (0 = all).
    pub eval_examples: usize,
    pub seed: u64,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            approach: Approach::Episodic,
            schedule: ScheduleKind::Constant,
            tau0: 1.0,
            tau_t: 0.1,
            steps: 5_000,
            batch_size: 8,
            k: 5,
            lr: 1e-4,
            n_iterations: 3,
            clip_norm: 1.0,
            reward_smoothing: Smoothing::AddOne,
            eval_every: 500,
            eval_examples: 200,
            seed: 1,
        }
    }
}

impl RlConfig {
    pub fn schedule(&self) -> TemperatureSchedule {
        TemperatureSchedule {
            kind: self.schedule,
            tau0: self.tau0,
            tau_t: self.tau_t,
            total_steps: self.steps,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = self.schedule().violations();
        if self.k < 2 {
            v.push(format!("k must be at least 2, got {}", self.k));
        }
        if self.batch_size == 0 {
            v.push("rl batch_size must be positive".into());
        }
        if self.n_iterations == 0 {
            v.push("iterations must be at least 1".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            v.push(format!("rl lr must be a non-negative number, got {}", self.lr));
        }
        if !(self.clip_norm >= 0.0) {
            v.push(format!("clip_norm must be non-negative, got {}", self.clip_norm));
        }
        v
    }
}

/// One line of the fine-tuning metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlRecord {
    #[serde(flatten)]
    pub update: StepReport,
    pub heldout_bleu: Option<f64>,
}

pub struct RlOutcome<T> {
    pub model: LevenshteinModel<T>,
    pub initial_bleu: f64,
    pub final_bleu: f64,
    pub stats: AdvantageStats,
    /// Temperature used at each update.
    pub taus: Vec<f64>,
}

/// Fine-tunes a pre-trained model with a fresh optimizer, logging one record
/// per update.
pub fn rl_finetune<T: Real>(
    mut model: LevenshteinModel<T>,
    train: &[Pair],
    heldout: &[Pair],
    config: &RlConfig,
    log: &mut dyn FnMut(&RlRecord) -> Result<()>,
) -> Result<RlOutcome<T>> {
    let v = config.violations();
    if !v.is_empty() {
        return Err(Error::Config(v));
    }
    if train.is_empty() || heldout.is_empty() {
        return Err(Error::InvalidArgument("training and held-out sets must be non-empty".into()));
    }
    let heldout = match config.eval_examples {
        0 => heldout,
        n => &heldout[..n.min(heldout.len())],
    };
    let schedule = config.schedule();
    let mut optimizer = Adam::new(&model.params, AdamConfig::default());
    let mut stats = AdvantageStats::for_iterations(config.n_iterations);
    let mut taus = Vec::with_capacity(config.steps as usize);
    let initial_bleu = evaluate(&model, heldout, DECODE_ITERS)?;
    let mut final_bleu = initial_bleu;
    for step in 0..config.steps {
        let tau = temperature_at(&schedule, step)?;
        taus.push(tau);
        let mut rng = substream(config.seed, "rl-batch", &[step]);
        let batch: Vec<&Pair> = (0..config.batch_size)
            .map(|_| &train[rng.gen_range(0..train.len())])
            .collect();
        let args = UpdateArgs {
            k: config.k,
            tau,
            lr: config.lr,
            clip_norm: config.clip_norm,
            seed: config.seed,
            step,
        };
        let update = levt_update(
            &mut model,
            &mut optimizer,
            &batch,
            config.approach,
            config.n_iterations,
            config.reward_smoothing,
            &args,
            Some(&mut stats),
        )?;
        let done = step + 1;
        let due = done == config.steps || (config.eval_every > 0 && done % config.eval_every == 0);
        let heldout_bleu = if due {
            final_bleu = evaluate(&model, heldout, DECODE_ITERS)?;
            Some(final_bleu)
        } else {
            None
        };
        log(&RlRecord { update, heldout_bleu })?;
    }
    Ok(RlOutcome {
        model,
        initial_bleu,
        final_bleu,
        stats,
        taus,
    })
}

/// A sampled rollout in the trace-dump format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub source: Vec<Token>,
    pub reference: Vec<Token>,
    pub tau: f64,
    /// Hypothesis before the first edit, then after every edit.
    pub states: Vec<Vec<Token>>,
    pub log_probs: Vec<f64>,
    /// Sentence BLEU after each merged edit.
    pub step_bleu: Vec<f64>,
    /// Stepwise rewards: successive differences of `step_bleu`, from 0.
    pub rewards: Vec<f64>,
}

/// Samples one rollout per pair for inspection.
pub fn sample_traces<T: Real>(
    model: &LevenshteinModel<T>,
    pairs: &[Pair],
    n_iterations: usize,
    tau: f64,
    smoothing: Smoothing,
    seed: u64,
) -> Result<Vec<TraceRecord>> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = substream(seed, "trace", &[i as u64]);
            let trace = rollout(model, &p.src, n_iterations, tau, &mut rng, true, Some(&p.tgt), smoothing)?;
            let mut states = vec![Vec::from(trace.steps[0].before.tokens())];
            states.extend(trace.steps.iter().map(|s| s.after.tokens().to_vec()));
            let step_bleu = trace.step_bleu();
            let rewards = step_bleu
                .iter()
                .scan(0.0, |prev, &b| {
                    let r = b - *prev;
                    *prev = b;
                    Some(r)
                })
                .collect();
            Ok(TraceRecord {
                source: p.src.clone(),
                reference: p.tgt.clone(),
                tau,
                states,
                log_probs: trace.steps.iter().map(|s| s.log_prob).collect(),
                step_bleu,
                rewards,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::tensor::{Sgd, Tensor};

    fn args(step: u64) -> UpdateArgs {
        UpdateArgs {
            k: 5,
            tau: 1.0,
            lr: 0.5,
            clip_norm: 0.0,
            seed: 9,
            step,
        }
    }

    fn train_bandit(approach: Approach, seed: u64, updates: u64) -> f64 {
        let mut params = ParamStore::<f64>::new();
        let bandit = Bandit::new(&mut params, [1.0, 0.0]).unwrap();
        for step in 0..updates {
            let a = UpdateArgs { seed, ..args(step) };
            reinforce_update(&mut params, &mut Sgd, approach, 1, &a, |_, _| Ok(bandit.clone())).unwrap();
        }
        bandit.prob(&params, 0)
    }

    #[test]
    fn both_rules_learn_the_rewarded_arm() {
        for approach in [Approach::Episodic, Approach::Stepwise] {
            for seed in 0..5 {
                let p = train_bandit(approach, seed, 100);
                assert!(p > 0.9, "{approach} seed {seed}: pi(A) = {p}");
            }
        }
    }

    #[test]
    fn collapsed_bandit_policy_is_not_updated() {
        let mut params = ParamStore::<f64>::new();
        let bandit = Bandit::new(&mut params, [1.0, 0.0]).unwrap();
        params.by_name_mut(Bandit::PARAM).unwrap().tensor = Tensor::from_f64(&[1, 2], &[60.0, -60.0]).unwrap();
        let before = params.clone();
        let mut adam = Adam::new(&params, AdamConfig::default());
        for approach in [Approach::Episodic, Approach::Stepwise] {
            let r = reinforce_update(&mut params, &mut adam, approach, 3, &args(0), |_, _| Ok(bandit.clone())).unwrap();
            assert!(!r.updated);
            assert_eq!(r.mean_abs_advantage, 0.0);
        }
        assert_eq!(adam.steps_taken(), 0);
        assert_eq!(params.value(params.id(Bandit::PARAM).unwrap()), before.value(before.id(Bandit::PARAM).unwrap()));
    }

    fn small_model() -> LevenshteinModel<f64> {
        let cfg = ModelConfig {
            vocab_size: 12,
            d_model: 8,
            n_heads: 2,
            n_encoder_layers: 1,
            n_decoder_layers: 1,
            ffn_dim: 16,
            max_placeholders: 4,
            max_seq_len: 16,
        };
        LevenshteinModel::new(cfg, &mut substream(2, "init", &[])).unwrap()
    }

    fn pairs() -> Vec<Pair> {
        vec![
            Pair { src: vec![5, 6, 7], tgt: vec![5, 6, 7] },
            Pair { src: vec![8, 9], tgt: vec![9, 8] },
        ]
    }

    #[test]
    fn stepwise_touches_every_slot_once_per_source() {
        let mut m = small_model();
        let data = pairs();
        let batch: Vec<&Pair> = data.iter().collect();
        let mut stats = AdvantageStats::for_iterations(3);
        let mut adam = Adam::new(&m.params, AdamConfig::default());
        let a = UpdateArgs { lr: 1e-3, ..args(0) };
        stepwise_update(&mut m, &mut adam, &batch, 3, Smoothing::AddOne, &a, &mut stats).unwrap();
        let rows = stats.rows();
        assert_eq!(rows.len(), 5);
        for r in rows {
            assert_eq!(r.count, 10, "{r:?}");
            assert!(r.mean.abs() < 1e-9);
        }
    }

    #[test]
    fn advantages_sum_to_zero_per_source() {
        let m = small_model();
        let data = pairs();
        for approach in [Approach::Episodic, Approach::Stepwise] {
            let out = batch_gradients(&m.params, 2, approach, 5, 1.0, 3, 0, |g, i| {
                LevtEpisode::new(&m, g, &data[i].src, &data[i].tgt, 3, Smoothing::AddOne)
            })
            .unwrap();
            for s in &out.sources {
                let expected_slots = if approach == Approach::Stepwise { 5 } else { 1 };
                assert_eq!(s.advantages.len(), expected_slots);
                for (_, a) in &s.advantages {
                    assert_eq!(a.len(), 5);
                    assert!(a.iter().sum::<f64>().abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn collapsed_levt_policy_gets_exactly_zero_gradient() {
        let mut m = small_model();
        // never insert, never delete: every rollout stays at the null string
        for (name, first) in [("head.insert.b", 50.0), ("head.delete.b", 50.0)] {
            let p = m.params.by_name_mut(name).unwrap();
            for (i, v) in p.tensor.data_mut().iter_mut().enumerate() {
                *v = if i == 0 { first } else { -50.0 };
            }
        }
        let data = pairs();
        let batch: Vec<&Pair> = data.iter().collect();
        let before = m.params.clone();
        let mut adam = Adam::new(&m.params, AdamConfig::default());
        let r = episodic_update(&mut m, &mut adam, &batch, 3, Smoothing::AddOne, &args(0)).unwrap();
        assert!(!r.updated);
        assert_eq!(r.mean_reward, 0.0);
        for (a, b) in m.params.iter().zip(before.iter()) {
            assert_eq!(a.tensor, b.tensor);
        }
    }

    #[test]
    fn updates_are_deterministic() {
        let data = pairs();
        let batch: Vec<&Pair> = data.iter().collect();
        let run = || {
            let mut m = small_model();
            let mut adam = Adam::new(&m.params, AdamConfig::default());
            let a = UpdateArgs { lr: 1e-2, ..args(4) };
            let r = episodic_update(&mut m, &mut adam, &batch, 3, Smoothing::AddOne, &a).unwrap();
            (r, m.params.iter().map(|p| p.tensor.clone()).collect::<Vec<_>>())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn argument_errors() {
        let m = small_model();
        let data = pairs();
        let make = |g: &mut Graph<'_, f64>, i: usize| LevtEpisode::new(&m, g, &data[i].src, &data[i].tgt, 3, Smoothing::AddOne);
        assert!(matches!(
            batch_gradients(&m.params, 1, Approach::Episodic, 1, 1.0, 0, 0, make),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            batch_gradients(&m.params, 0, Approach::Episodic, 5, 1.0, 0, 0, make),
            Err(Error::InvalidArgument(_))
        ));
        let bad = RlConfig { k: 1, batch_size: 0, tau0: -1.0, ..RlConfig::default() };
        assert_eq!(bad.violations().len(), 3);
    }

    #[test]
    fn traces_record_states_and_rewards() {
        let m = small_model();
        let t = sample_traces(&m, &pairs(), 3, 1.0, Smoothing::AddOne, 0).unwrap();
        assert_eq!(t.len(), 2);
        for r in &t {
            assert_eq!(r.states.len(), 9);
            assert_eq!(r.log_probs.len(), 8);
            assert_eq!(r.step_bleu.len(), 5);
            let total: f64 = r.rewards.iter().sum();
            assert!((total - r.step_bleu[4]).abs() < 1e-12);
        }
    }
}
