//! Levenshtein alignment and the expert edit actions used as supervised targets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::edit::Hypothesis;
use crate::error::{Error, Result};
use crate::vocab::Token;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlignOp {
    Match,
    Substitute,
    Delete,
    Insert,
}

/// Optimal unit-cost alignment of `current` onto `reference`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alignment {
    pub ops: Vec<AlignOp>,
    pub distance: usize,
}

impl Alignment {
    /// Replays the ops on `current`, drawing inserted and substituted tokens
    /// from `reference`.
    pub fn replay(&self, current: &[Token], reference: &[Token]) -> Vec<Token> {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::with_capacity(reference.len());
        for op in &self.ops {
            match op {
                AlignOp::Match => {
                    out.push(current[i]);
                    i += 1;
                    j += 1;
                }
                AlignOp::Substitute => {
                    out.push(reference[j]);
                    i += 1;
                    j += 1;
                }
                AlignOp::Delete => i += 1,
                AlignOp::Insert => {
                    out.push(reference[j]);
                    j += 1;
                }
            }
        }
        out
    }
}

fn dp_table(a: &[Token], b: &[Token]) -> Vec<Vec<usize>> {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d
}

/// Unit-cost edit distance.
pub fn levenshtein_distance(a: &[Token], b: &[Token]) -> usize {
    // two-row version of `dp_table`
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Backtraces one optimal alignment. Ties prefer match, then substitute,
/// then delete, then insert, walking from the end of both sequences.
pub fn align(a: &[Token], b: &[Token]) -> Alignment {
    let d = dp_table(a, b);
    let (mut i, mut j) = (a.len(), b.len());
    let mut ops = Vec::with_capacity(i.max(j));
    while i > 0 || j > 0 {
        let here = d[i][j];
        if i > 0 && j > 0 && a[i - 1] == b[j - 1] && d[i - 1][j - 1] == here {
            ops.push(AlignOp::Match);
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && d[i - 1][j - 1] + 1 == here {
            ops.push(AlignOp::Substitute);
            i -= 1;
            j -= 1;
        } else if i > 0 && d[i - 1][j] + 1 == here {
            ops.push(AlignOp::Delete);
            i -= 1;
        } else {
            ops.push(AlignOp::Insert);
            j -= 1;
        }
    }
    ops.reverse();
    Alignment {
        distance: d[a.len()][b.len()],
        ops,
    }
}

/// Targets for the three heads that turn `current` into the reference.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpertActions {
    /// One flag per non-sentinel token of `current`; `true` deletes.
    pub delete_mask: Vec<bool>,
    /// Placeholders per gap of the post-deletion hypothesis.
    pub insert_counts: Vec<usize>,
    /// Tokens for the placeholders, left to right.
    pub fill_tokens: Vec<Token>,
}

/// Expert actions from an optimal alignment. Substitutions become a deletion
/// plus an insertion since no head can substitute in place.
pub fn expert_actions(
    current: &Hypothesis,
    reference: &[Token],
    max_seq_len: usize,
) -> Result<ExpertActions> {
    if current.has_placeholders() {
        return Err(Error::State("expert actions need a PLH-free hypothesis".into()));
    }
    if reference.len() + 2 > max_seq_len {
        return Err(Error::Length(format!(
            "reference of {} tokens exceeds max_seq_len {max_seq_len}",
            reference.len()
        )));
    }
    let cur = current.content();
    let alignment = align(cur, reference);
    let mut delete_mask = Vec::with_capacity(cur.len());
    // gap 0 sits after BOS; a kept token opens the next gap
    let mut insert_counts = vec![0usize];
    let mut fill_tokens = Vec::new();
    let mut j = 0;
    for op in &alignment.ops {
        match op {
            AlignOp::Match => {
                delete_mask.push(false);
                insert_counts.push(0);
                j += 1;
            }
            AlignOp::Substitute => {
                delete_mask.push(true);
                *insert_counts.last_mut().unwrap() += 1;
                fill_tokens.push(reference[j]);
                j += 1;
            }
            AlignOp::Delete => delete_mask.push(true),
            AlignOp::Insert => {
                *insert_counts.last_mut().unwrap() += 1;
                fill_tokens.push(reference[j]);
                j += 1;
            }
        }
    }
    Ok(ExpertActions {
        delete_mask,
        insert_counts,
        fill_tokens,
    })
}

/// Drops each content token independently with probability `drop_rate`.
pub fn corrupt<R: Rng + ?Sized>(reference: &[Token], rng: &mut R, drop_rate: f64) -> Result<Hypothesis> {
    if !(0.0..=1.0).contains(&drop_rate) {
        return Err(Error::InvalidArgument(format!(
            "drop_rate must lie in [0, 1], got {drop_rate}"
        )));
    }
    let kept: Vec<Token> = reference
        .iter()
        .copied()
        .filter(|_| !rng.gen_bool(drop_rate))
        .collect();
    Hypothesis::from_content(&kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edit::{apply_delete, apply_insert, apply_replace};
    use crate::rng::substream;

    // Exponential recursion straight from the definition.
    fn brute(a: &[Token], b: &[Token]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                let sub = brute(ra, rb) + usize::from(x != y);
                sub.min(brute(ra, b) + 1).min(brute(a, rb) + 1)
            }
        }
    }

    fn chars(s: &str) -> Vec<Token> {
        s.bytes().map(Token::from).collect()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(levenshtein_distance(&[5, 6, 7], &[5, 6, 7]), 0);
        assert_eq!(levenshtein_distance(&[], &[5, 6, 7, 8]), 4);
        let (k, s) = (chars("kitten"), chars("sitting"));
        assert_eq!(brute(&k, &s), 3);
        assert_eq!(levenshtein_distance(&k, &s), 3);
    }

    #[test]
    fn alignment_replays_and_counts() {
        let (k, s) = (chars("kitten"), chars("sitting"));
        let al = align(&k, &s);
        assert_eq!(al.replay(&k, &s), s);
        assert_eq!(al.distance, 3);
        assert_eq!(al.ops.iter().filter(|o| **o != AlignOp::Match).count(), 3);
    }

    #[test]
    fn tie_break_prefers_substitute() {
        let al = align(&[5], &[6]);
        assert_eq!(al.ops, vec![AlignOp::Substitute]);
    }

    fn replay(cur: &Hypothesis, acts: &ExpertActions) -> Hypothesis {
        let h = apply_delete(cur, &acts.delete_mask).unwrap();
        let h = apply_insert(&h, &acts.insert_counts, 1000).unwrap();
        apply_replace(&h, &acts.fill_tokens).unwrap()
    }

    #[test]
    fn expert_fixed_point_and_null_start() {
        let r = vec![7, 8, 9];
        let same = expert_actions(&Hypothesis::from_content(&r).unwrap(), &r, 64).unwrap();
        assert_eq!(same.delete_mask, vec![false; 3]);
        assert_eq!(same.insert_counts, vec![0; 4]);
        assert!(same.fill_tokens.is_empty());

        let null = expert_actions(&Hypothesis::null(), &r, 64).unwrap();
        assert!(null.delete_mask.is_empty());
        assert_eq!(null.insert_counts, vec![3]);
        assert_eq!(null.fill_tokens, r);
    }

    #[test]
    fn expert_rejects_long_reference_and_placeholders() {
        let r: Vec<Token> = (0..70).map(|i| 5 + i % 10).collect();
        assert!(matches!(
            expert_actions(&Hypothesis::null(), &r, 64),
            Err(Error::Length(_))
        ));
        let plh = Hypothesis::new(vec![1, 3, 2]).unwrap();
        assert!(matches!(expert_actions(&plh, &[5], 64), Err(Error::State(_))));
    }

    #[test]
    fn expert_replay_on_random_pairs() {
        let mut rng = substream(3, "test", &[]);
        for _ in 0..2000 {
            let n = rng.gen_range(0..10);
            let m = rng.gen_range(0..10);
            let cur: Vec<Token> = (0..n).map(|_| rng.gen_range(5..9)).collect();
            let r: Vec<Token> = (0..m).map(|_| rng.gen_range(5..9)).collect();
            let hyp = Hypothesis::from_content(&cur).unwrap();
            let acts = expert_actions(&hyp, &r, 64).unwrap();
            assert_eq!(replay(&hyp, &acts).content(), r.as_slice());

            let al = align(&cur, &r);
            let subs = al.ops.iter().filter(|o| **o == AlignOp::Substitute).count();
            let edits = acts.delete_mask.iter().filter(|&&d| d).count() + acts.fill_tokens.len();
            assert!(edits >= levenshtein_distance(&cur, &r));
            assert_eq!(edits, al.distance + subs);
        }
    }

    #[test]
    fn corrupt_extremes() {
        let r = vec![5, 6, 7, 8];
        let mut rng = substream(1, "test", &[]);
        assert_eq!(corrupt(&r, &mut rng, 0.0).unwrap().content(), r.as_slice());
        assert_eq!(corrupt(&r, &mut rng, 1.0).unwrap(), Hypothesis::null());
        assert!(corrupt(&r, &mut rng, 1.5).is_err());
    }

    #[test]
    fn corrupt_mean_length_within_three_sigma() {
        let r: Vec<Token> = (5..25).collect();
        let p = 0.3;
        let draws = 5000;
        let mut rng = substream(2, "test", &[]);
        let total: usize = (0..draws)
            .map(|_| corrupt(&r, &mut rng, p).unwrap().content().len())
            .sum();
        let mean = total as f64 / draws as f64;
        let expect = (1.0 - p) * r.len() as f64;
        let sigma = (r.len() as f64 * p * (1.0 - p) / draws as f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * sigma, "{mean} vs {expect} ± {sigma}");
    }
}
