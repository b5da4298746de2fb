//! Training loops: supervised dual-policy pre-training and REINFORCE
//! fine-tuning, plus the held-out evaluation both of them log.

pub mod rl;
pub mod supervised;

use rayon::prelude::*;

use crate::bleu::corpus_bleu;
use crate::data::Pair;
use crate::edit::greedy_decode;
use crate::error::{Error, Result};
use crate::model::LevenshteinModel;
use crate::tensor::Real;
use crate::vocab::Token;

/// Iteration cap of greedy decoding at evaluation time.
pub const DECODE_ITERS: usize = 10;

/// Greedy-decodes every source; outputs keep the input order.
pub fn decode_all<T: Real>(model: &LevenshteinModel<T>, sources: &[Vec<Token>], max_iters: usize) -> Result<Vec<Vec<Token>>> {
    sources
        .par_iter()
        .map(|s| greedy_decode(model, s, max_iters).map(|r| r.hypothesis.content().to_vec()))
        .collect()
}

/// Corpus BLEU (0..1) of greedy decodes against the targets.
pub fn evaluate<T: Real>(model: &LevenshteinModel<T>, pairs: &[Pair], max_iters: usize) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("evaluation set is empty".into()));
    }
    let sources: Vec<Vec<Token>> = pairs.iter().map(|p| p.src.clone()).collect();
    let hyps = decode_all(model, &sources, max_iters)?;
    let scored: Vec<(&[Token], &[Token])> = hyps
        .iter()
        .zip(pairs)
        .map(|(h, p)| (h.as_slice(), p.tgt.as_slice()))
        .collect();
    corpus_bleu(&scored)
}

/// Sizes the global worker pool. `None` keeps rayon's default. Only the
/// first call in a process takes effect.
pub fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Workers in the global pool.
pub fn rayon_threads() -> usize {
    rayon::current_num_threads()
}

/// Linear warmup from `lr / warmup` to `lr` over the first `warmup` steps.
pub fn warmup_lr(lr: f64, warmup: u64, step: u64) -> f64 {
    if warmup == 0 {
        lr
    } else {
        lr * ((step + 1) as f64 / warmup as f64).min(1.0)
    }
}
