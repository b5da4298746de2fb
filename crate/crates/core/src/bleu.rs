//! Token-id BLEU: smoothed sentence BLEU for rewards, corpus BLEU for evaluation.

use std::collections::HashMap;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::Token;

pub const MAX_ORDER: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    None,
    /// Add one to matches and totals for orders 2..=4.
    #[default]
    AddOne,
}

impl std::str::FromStr for Smoothing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Smoothing::None),
            "addone" => Ok(Smoothing::AddOne),
            other => Err(Error::InvalidArgument(format!("unknown smoothing `{other}`"))),
        }
    }
}

/// Clipped n-gram counts; additive across sentences.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn new(hyp: &[Token], reference: &[Token]) -> Self {
        let mut s = BleuStats {
            hyp_len: hyp.len() as u64,
            ref_len: reference.len() as u64,
            ..Default::default()
        };
        for n in 1..=MAX_ORDER {
            let h = ngram_counts(hyp, n);
            let r = ngram_counts(reference, n);
            s.totals[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
            s.matches[n - 1] = h
                .iter()
                .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
                .sum();
        }
        s
    }

    /// BLEU from these counts, in [0, 1].
    pub fn score(&self, smoothing: Smoothing) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_p = 0.0;
        for n in 0..MAX_ORDER {
            let (mut m, mut t) = (self.matches[n] as f64, self.totals[n] as f64);
            if n > 0 && smoothing == Smoothing::AddOne {
                m += 1.0;
                t += 1.0;
            }
            if m == 0.0 || t == 0.0 {
                return 0.0;
            }
            log_p += (m / t).ln();
        }
        let bp = (1.0 - self.ref_len as f64 / self.hyp_len as f64).min(0.0);
        (log_p / MAX_ORDER as f64 + bp).exp().clamp(0.0, 1.0)
    }
}

impl Add for BleuStats {
    type Output = BleuStats;

    fn add(mut self, rhs: BleuStats) -> BleuStats {
        self += rhs;
        self
    }
}

impl AddAssign for BleuStats {
    fn add_assign(&mut self, rhs: BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += rhs.matches[n];
            self.totals[n] += rhs.totals[n];
        }
        self.hyp_len += rhs.hyp_len;
        self.ref_len += rhs.ref_len;
    }
}

fn ngram_counts(tokens: &[Token], n: usize) -> HashMap<&[Token], u64> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

/// Sentence-level BLEU used as the RL reward.
pub fn sentence_bleu(hyp: &[Token], reference: &[Token], smoothing: Smoothing) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::InvalidArgument("empty reference".into()));
    }
    Ok(BleuStats::new(hyp, reference).score(smoothing))
}

/// Unsmoothed corpus BLEU over summed statistics.
pub fn corpus_bleu<H, R>(pairs: &[(H, R)]) -> Result<f64>
where
    H: AsRef<[Token]>,
    R: AsRef<[Token]>,
{
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("corpus BLEU of an empty corpus".into()));
    }
    let stats = pairs
        .iter()
        .map(|(h, r)| BleuStats::new(h.as_ref(), r.as_ref()))
        .fold(BleuStats::default(), Add::add);
    Ok(stats.score(Smoothing::None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_and_empty() {
        let r = [5, 6, 7, 8, 9];
        assert_eq!(sentence_bleu(&r, &r, Smoothing::AddOne).unwrap(), 1.0);
        assert_eq!(sentence_bleu(&r, &r, Smoothing::None).unwrap(), 1.0);
        assert_eq!(sentence_bleu(&[], &r, Smoothing::AddOne).unwrap(), 0.0);
        assert!(sentence_bleu(&r, &[], Smoothing::AddOne).is_err());
    }

    #[test]
    fn hand_computed_smoothed_value() {
        // unigram 3/4 raw; orders 2..4 add-one: (2+1)/(3+1), (1+1)/(2+1), (0+1)/(1+1); BP = 1
        let expect = (0.75f64 * 0.75 * (2.0 / 3.0) * 0.5).powf(0.25);
        let got = sentence_bleu(&[5, 6, 7, 8], &[5, 6, 7, 9], Smoothing::AddOne).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 0.658037).abs() < 1e-6);
        assert_eq!(sentence_bleu(&[5, 6, 7, 8], &[5, 6, 7, 9], Smoothing::None).unwrap(), 0.0);
    }

    #[test]
    fn brevity_penalty_applies() {
        let got = sentence_bleu(&[5, 6], &[5, 6, 7, 8], Smoothing::AddOne).unwrap();
        // p1 = 1, p2 = 2/2, p3 = 1/1, p4 = 1/1; BP = exp(1 - 4/2)
        assert!((got - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn corpus_examples() {
        let pairs = vec![(vec![5, 6, 7, 8], vec![5, 6, 7, 8]), (vec![9, 10, 11, 12, 13], vec![9, 10, 11, 12, 13])];
        assert_eq!(corpus_bleu(&pairs).unwrap(), 1.0);
        let none: Vec<(Vec<Token>, Vec<Token>)> = vec![(vec![5, 6, 7, 8], vec![5, 6, 7, 9])];
        assert_eq!(corpus_bleu(&none).unwrap(), 0.0);
        let empty: Vec<(Vec<Token>, Vec<Token>)> = vec![];
        assert!(corpus_bleu(&empty).is_err());
    }

    #[test]
    fn longer_correct_prefixes_never_score_lower() {
        let r: Vec<Token> = (5..17).collect();
        let mut last = 0.0;
        for n in 1..=r.len() {
            let s = sentence_bleu(&r[..n], &r, Smoothing::AddOne).unwrap();
            assert!(s >= last, "prefix {n}: {s} < {last}");
            last = s;
        }
    }

    fn sentence() -> impl Strategy<Value = Vec<Token>> {
        prop::collection::vec(5u32..10, 0..12)
    }

    proptest! {
        #[test]
        fn stats_are_additive(pairs in prop::collection::vec((sentence(), sentence()), 1..8), cut in 0usize..8) {
            let cut = cut.min(pairs.len());
            let whole = pairs.iter().fold(BleuStats::default(), |a, (h, r)| a + BleuStats::new(h, r));
            let left = pairs[..cut].iter().fold(BleuStats::default(), |a, (h, r)| a + BleuStats::new(h, r));
            let right = pairs[cut..].iter().fold(BleuStats::default(), |a, (h, r)| a + BleuStats::new(h, r));
            prop_assert_eq!(whole, left + right);
            for n in 0..MAX_ORDER {
                prop_assert!(whole.matches[n] <= whole.totals[n]);
            }
            if pairs.iter().all(|(_, r)| !r.is_empty()) {
                prop_assert_eq!((left + right).score(Smoothing::None), corpus_bleu(&pairs).unwrap());
            }
        }

        #[test]
        fn scores_in_unit_interval(h in sentence(), mut r in sentence()) {
            r.push(5);
            for sm in [Smoothing::None, Smoothing::AddOne] {
                let s = sentence_bleu(&h, &r, sm).unwrap();
                prop_assert!((0.0..=1.0).contains(&s));
            }
        }
    }
}
