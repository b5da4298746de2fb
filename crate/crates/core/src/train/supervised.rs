//! Dual-policy supervised pre-training.
//!
//! Each example trains all three heads:
//!
//! * insertion on a roll-in state (the null string, or the reference with
//!   random tokens dropped) against the oracle's placeholder counts,
//! * replacement on that state after the oracle's insertion, against the
//!   oracle's fill tokens,
//! * deletion on the hypothesis the model itself produces by filling those
//!   placeholders greedily, against the oracle's delete mask. The deletion
//!   head therefore learns to clean up the insertion head's mistakes.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, warmup_lr, DECODE_ITERS};
use crate::checkpoint::Checkpoint;
use crate::data::Pair;
use crate::edit::{apply_insert, apply_replace, Hypothesis};
use crate::error::{Error, Result};
use crate::model::{LevenshteinModel, ModelConfig};
use crate::oracle::{corrupt, expert_actions};
use crate::rng::substream;
use crate::tensor::{clip_grad_norm, Adam, AdamConfig, Gradients, Optimizer, Real};
use crate::vocab::Token;

/// One training example with its oracle targets. Examples are ragged; a
/// batch never pads, so no padded position can reach the loss.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupervisedExample {
    pub source: Vec<Token>,
    pub reference: Vec<Token>,
    /// Roll-in state scored by the insertion head.
    pub insert_state: Hypothesis,
    /// Oracle placeholder count per gap of `insert_state`.
    pub insert_counts: Vec<usize>,
    /// Oracle tokens for the placeholders, left to right.
    pub fill_tokens: Vec<Token>,
}

impl SupervisedExample {
    pub fn new(source: Vec<Token>, reference: Vec<Token>, insert_state: Hypothesis, config: &ModelConfig) -> Result<Self> {
        let expert = expert_actions(&insert_state, &reference, config.max_seq_len)?;
        if expert.delete_mask.iter().any(|&d| d) {
            return Err(Error::Shape(
                "batch construction: insertion roll-in must be a subsequence of the reference".into(),
            ));
        }
        if let Some(&c) = expert.insert_counts.iter().find(|&&c| c > config.max_placeholders) {
            return Err(Error::Shape(format!(
                "batch construction: oracle inserts {c} placeholders in one gap, cap is {}",
                config.max_placeholders
            )));
        }
        Ok(SupervisedExample {
            source,
            reference,
            insert_state,
            insert_counts: expert.insert_counts,
            fill_tokens: expert.fill_tokens,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupervisedBatch {
    pub examples: Vec<SupervisedExample>,
}

impl SupervisedBatch {
    /// Roll-in per pair: the null string with probability `null_rollin`,
    /// otherwise the reference with each token dropped at a rate drawn
    /// uniformly from `[0, 1)`.
    pub fn sample<R: Rng + ?Sized>(pairs: &[&Pair], rng: &mut R, null_rollin: f64, config: &ModelConfig) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let examples = pairs
            .iter()
            .map(|p| {
                let state = if rng.gen_bool(null_rollin) {
                    Hypothesis::null()
                } else {
                    let rate: f64 = rng.gen();
                    corrupt(&p.tgt, rng, rate)?
                };
                SupervisedExample::new(p.src.clone(), p.tgt.clone(), state, config)
            })
            .collect::<Result<_>>()?;
        Ok(SupervisedBatch { examples })
    }

    /// Scored positions per head: `[delete, insert, token]`.
    fn counts(&self) -> [usize; 3] {
        let mut n = [0; 3];
        for ex in &self.examples {
            // deletion scores the filled state, which has the reference's length
            n[0] += ex.reference.len();
            n[1] += ex.insert_state.num_gaps();
            n[2] += ex.fill_tokens.len();
        }
        n
    }
}

/// Per-head mean cross-entropy over scored positions (0 when a head scored
/// nothing), and the gradient norm before clipping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub delete_ce: f64,
    pub insert_ce: f64,
    pub token_ce: f64,
    /// Mean of the per-head cross-entropies over heads that scored anything.
    pub total: f64,
    pub grad_norm: f64,
}

struct ExampleOutcome<T> {
    grads: Gradients<T>,
    nll: [f64; 3],
}

fn example_gradients<T: Real>(model: &LevenshteinModel<T>, ex: &SupervisedExample, weights: [f64; 3]) -> Result<ExampleOutcome<T>> {
    let max_len = model.config().max_seq_len;
    let mut g = model.graph();
    let memory = model.encode(&mut g, &ex.source)?;
    let mut nll = [0.0; 3];
    let mut terms = Vec::with_capacity(3);

    let logits = model.forward_insert(&mut g, &ex.insert_state, memory)?;
    let targets: Vec<Option<usize>> = ex.insert_counts.iter().map(|&c| Some(c)).collect();
    let l = g.nll_sum(logits, &targets, 1.0)?;
    nll[1] = g.value(l).item().f64();
    terms.push(g.scale(l, weights[1])?);

    let with_plh = apply_insert(&ex.insert_state, &ex.insert_counts, max_len)?;
    let filled = if ex.fill_tokens.is_empty() {
        with_plh
    } else {
        let logits = model.forward_replace(&mut g, &with_plh, memory)?;
        let targets: Vec<Option<usize>> = ex.fill_tokens.iter().map(|&t| Some(t as usize)).collect();
        let l = g.nll_sum(logits, &targets, 1.0)?;
        nll[2] = g.value(l).item().f64();
        terms.push(g.scale(l, weights[2])?);
        let guess: Vec<Token> = g.value(logits).argmax_rows().into_iter().map(|c| c as Token).collect();
        apply_replace(&with_plh, &guess)?
    };

    let mask = expert_actions(&filled, &ex.reference, max_len)?.delete_mask;
    if !mask.is_empty() {
        let logits = model.forward_delete(&mut g, &filled, memory)?;
        let targets: Vec<Option<usize>> = mask.iter().map(|&d| Some(usize::from(d))).collect();
        let l = g.nll_sum(logits, &targets, 1.0)?;
        nll[0] = g.value(l).item().f64();
        terms.push(g.scale(l, weights[0])?);
    }

    let loss = g.add_all(&terms)?;
    Ok(ExampleOutcome {
        grads: g.backward(loss)?,
        nll,
    })
}

/// One optimizer step on the equally weighted mean of the three heads'
/// cross-entropies. Examples are differentiated in parallel and their
/// gradients summed in batch order, so results do not depend on threading.
pub fn supervised_step<T: Real>(
    model: &mut LevenshteinModel<T>,
    optimizer: &mut dyn Optimizer<T>,
    batch: &SupervisedBatch,
    lr: f64,
    clip_norm: f64,
) -> Result<LossReport> {
    if batch.examples.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let counts = batch.counts();
    let active = counts.iter().filter(|&&n| n > 0).count() as f64;
    let weights = counts.map(|n| if n == 0 { 0.0 } else { 1.0 / (active * n as f64) });
    let frozen = &*model;
    let outcomes: Vec<ExampleOutcome<T>> = batch
        .examples
        .par_iter()
        .map(|ex| example_gradients(frozen, ex, weights))
        .collect::<Result<_>>()?;
    let mut nll = [0.0; 3];
    let mut grads = Gradients::empty(model.params.len());
    for o in outcomes {
        for (a, b) in nll.iter_mut().zip(o.nll) {
            *a += b;
        }
        grads.merge(o.grads);
    }
    let ce: [f64; 3] = std::array::from_fn(|h| if counts[h] == 0 { 0.0 } else { nll[h] / counts[h] as f64 });
    model.params.zero_grad();
    model.params.accumulate(&grads);
    let grad_norm = clip_grad_norm(&mut model.params, clip_norm);
    optimizer.step(&mut model.params, lr)?;
    Ok(LossReport {
        delete_ce: ce[0],
        insert_ce: ce[1],
        token_ce: ce[2],
        total: ce.iter().sum::<f64>() / active,
        grad_norm,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub warmup_steps: u64,
    /// Global gradient-norm cap; 0 disables clipping.
    pub clip_norm: f64,
    /// Probability that an insertion roll-in starts from the null string.
    pub null_rollin: f64,
    /// Held-out evaluation period in steps; 0 evaluates only at the end.
    pub eval_every: u64,
    /// Held-out pairs decoded per evaluation (0 = all).
    pub eval_examples: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            steps: 5_000,
            batch_size: 32,
            lr: 3e-4,
            warmup_steps: 500,
            clip_norm: 1.0,
            null_rollin: 0.3,
            eval_every: 500,
            eval_examples: 200,
            seed: 1,
        }
    }
}

impl PretrainConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.batch_size == 0 {
            v.push("pretrain batch_size must be positive".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            v.push(format!("pretrain lr must be a non-negative number, got {}", self.lr));
        }
        if !(0.0..=1.0).contains(&self.null_rollin) {
            v.push(format!("null_rollin must lie in [0, 1], got {}", self.null_rollin));
        }
        if !(self.clip_norm >= 0.0) {
            v.push(format!("clip_norm must be non-negative, got {}", self.clip_norm));
        }
        v
    }
}

/// One line of the pre-training metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainRecord {
    pub step: u64,
    pub delete_ce: f64,
    pub insert_ce: f64,
    pub token_ce: f64,
    pub heldout_bleu: Option<f64>,
}

/// Pre-training state that can be checkpointed and resumed exactly: batch
/// sampling at step `i` depends only on `(seed, i)`.
pub struct Pretrainer<T: Real> {
    pub model: LevenshteinModel<T>,
    optimizer: Adam<T>,
    step: u64,
    config: PretrainConfig,
}

impl<T: Real> Pretrainer<T> {
    pub fn new(model: LevenshteinModel<T>, config: PretrainConfig) -> Result<Self> {
        let v = config.violations();
        if !v.is_empty() {
            return Err(Error::Config(v));
        }
        let optimizer = Adam::new(&model.params, AdamConfig::default());
        Ok(Pretrainer {
            model,
            optimizer,
            step: 0,
            config,
        })
    }

    /// Continues from a checkpoint written by [`Pretrainer::checkpoint`].
    pub fn resume(ck: Checkpoint<T>, config: PretrainConfig) -> Result<Self> {
        let mut t = Pretrainer::new(ck.model, config)?;
        t.optimizer.load_state(&ck.optimizer)?;
        t.step = ck.step;
        Ok(t)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn checkpoint(&self) -> Checkpoint<T> {
        Checkpoint {
            model: self.model.clone(),
            step: self.step,
            meta: serde_json::json!({"phase": "pretrain", "seed": self.config.seed}),
            optimizer: self.optimizer.state(),
        }
    }

    pub fn train_step(&mut self, train: &[Pair]) -> Result<LossReport> {
        if train.is_empty() {
            return Err(Error::InvalidArgument("training set is empty".into()));
        }
        let c = &self.config;
        let mut rng = substream(c.seed, "pretrain", &[self.step]);
        let picked: Vec<&Pair> = (0..c.batch_size)
            .map(|_| &train[rng.gen_range(0..train.len())])
            .collect();
        let batch = SupervisedBatch::sample(&picked, &mut rng, c.null_rollin, self.model.config())?;
        let lr = warmup_lr(c.lr, c.warmup_steps, self.step);
        let report = supervised_step(&mut self.model, &mut self.optimizer, &batch, lr, c.clip_norm)?;
        self.step += 1;
        Ok(report)
    }

    /// Trains until `self.step() == config.steps`, calling `log` after every
    /// step. Returns the last held-out BLEU, if any evaluation ran.
    pub fn run(
        &mut self,
        train: &[Pair],
        heldout: &[Pair],
        log: &mut dyn FnMut(&PretrainRecord) -> Result<()>,
    ) -> Result<Option<f64>> {
        let heldout = match self.config.eval_examples {
            0 => heldout,
            n => &heldout[..n.min(heldout.len())],
        };
        let mut last = None;
        while self.step < self.config.steps {
            let r = self.train_step(train)?;
            let every = self.config.eval_every;
            let due = self.step == self.config.steps || (every > 0 && self.step % every == 0);
            let heldout_bleu = if due && !heldout.is_empty() {
                Some(evaluate(&self.model, heldout, DECODE_ITERS)?)
            } else {
                None
            };
            last = heldout_bleu.or(last);
            log(&PretrainRecord {
                step: self.step,
                delete_ce: r.delete_ce,
                insert_ce: r.insert_ce,
                token_ce: r.token_ce,
                heldout_bleu,
            })?;
        }
        Ok(last)
    }
}

/// Pre-trains `model` for `config.steps` steps and returns the final
/// checkpoint (also written to `out` when given).
pub fn pretrain<T: Real>(
    model: LevenshteinModel<T>,
    train: &[Pair],
    heldout: &[Pair],
    config: PretrainConfig,
    out: Option<&std::path::Path>,
    log: &mut dyn FnMut(&PretrainRecord) -> Result<()>,
) -> Result<Checkpoint<T>> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let mut trainer = Pretrainer::new(model, config)?;
    trainer.run(train, heldout, log)?;
    let ck = trainer.checkpoint();
    if let Some(path) = out {
        ck.save(path)?;
    }
    Ok(ck)
}
