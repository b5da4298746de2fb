//! Hypotheses, the three edit actions, and the refinement loop.

mod decode;
mod sample;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{Token, BOS, EOS, NON_OUTPUT, PLH};

pub use decode::{greedy_decode, iteration_phases, rollout, DecodeResult, EditStep, EditTrace};
pub(crate) use decode::{phase_logits, step_from_logits, take_step};
pub use sample::{sample_edit, score_action, score_action_value, PolicyOutput};

/// Decoder state: `BOS … EOS`, possibly with placeholders between the
/// insert and replace phases.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hypothesis(Vec<Token>);

impl Hypothesis {
    /// The null string `[BOS, EOS]`.
    pub fn null() -> Self {
        Hypothesis(vec![BOS, EOS])
    }

    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != BOS || *tokens.last().unwrap() != EOS {
            return Err(Error::State(format!(
                "hypothesis must be framed by BOS/EOS: {tokens:?}"
            )));
        }
        if let Some(&t) = tokens[1..tokens.len() - 1]
            .iter()
            .find(|&&t| t == BOS || t == EOS)
        {
            return Err(Error::Vocabulary {
                id: t,
                reason: "is a sentinel inside a hypothesis",
            });
        }
        Ok(Hypothesis(tokens))
    }

    /// Wraps content tokens in sentinels.
    pub fn from_content(content: &[Token]) -> Result<Self> {
        let mut v = Vec::with_capacity(content.len() + 2);
        v.push(BOS);
        v.extend_from_slice(content);
        v.push(EOS);
        Self::new(v)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    /// Tokens between the sentinels.
    pub fn content(&self) -> &[Token] {
        &self.0[1..self.0.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 2
    }

    pub fn num_placeholders(&self) -> usize {
        self.0.iter().filter(|&&t| t == PLH).count()
    }

    pub fn has_placeholders(&self) -> bool {
        self.0.contains(&PLH)
    }

    pub fn placeholder_positions(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i] == PLH).collect()
    }

    /// Positions the deletion head scores (everything except the sentinels).
    pub fn num_deletable(&self) -> usize {
        self.0.len() - 2
    }

    pub fn num_gaps(&self) -> usize {
        self.0.len() - 1
    }

    pub fn check_len(&self, max_seq_len: usize) -> Result<()> {
        if self.0.len() > max_seq_len {
            return Err(Error::Length(format!(
                "hypothesis of length {} exceeds max_seq_len {max_seq_len}",
                self.0.len()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Delete,
    Insert,
    Replace,
}

/// One atomic edit. `Delete` holds `true` for positions to remove.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditAction {
    Delete(Vec<bool>),
    Insert(Vec<usize>),
    Replace(Vec<Token>),
}

impl EditAction {
    pub fn phase(&self) -> Phase {
        match self {
            EditAction::Delete(_) => Phase::Delete,
            EditAction::Insert(_) => Phase::Insert,
            EditAction::Replace(_) => Phase::Replace,
        }
    }

    /// Class index chosen at each scored position.
    pub fn classes(&self) -> Vec<usize> {
        match self {
            EditAction::Delete(m) => m.iter().map(|&d| d as usize).collect(),
            EditAction::Insert(c) => c.clone(),
            EditAction::Replace(t) => t.iter().map(|&t| t as usize).collect(),
        }
    }

    pub fn apply(&self, hyp: &Hypothesis, max_seq_len: usize) -> Result<Hypothesis> {
        match self {
            EditAction::Delete(mask) => apply_delete(hyp, mask),
            EditAction::Insert(counts) => apply_insert(hyp, counts, max_seq_len),
            EditAction::Replace(tokens) => apply_replace(hyp, tokens),
        }
    }
}

/// Removes the positions flagged `true`; `mask` covers the non-sentinel positions.
pub fn apply_delete(hyp: &Hypothesis, mask: &[bool]) -> Result<Hypothesis> {
    if hyp.has_placeholders() {
        return Err(Error::State("deletion applies to PLH-free hypotheses".into()));
    }
    if mask.len() != hyp.num_deletable() {
        return Err(Error::Shape(format!(
            "delete mask of length {} for {} deletable tokens",
            mask.len(),
            hyp.num_deletable()
        )));
    }
    let mut out = Vec::with_capacity(hyp.len());
    out.push(BOS);
    out.extend(
        hyp.content()
            .iter()
            .zip(mask)
            .filter(|(_, &del)| !del)
            .map(|(&t, _)| t),
    );
    out.push(EOS);
    Ok(Hypothesis(out))
}

/// Opens `counts[i]` placeholders between positions `i` and `i + 1`.
pub fn apply_insert(hyp: &Hypothesis, counts: &[usize], max_seq_len: usize) -> Result<Hypothesis> {
    if hyp.has_placeholders() {
        return Err(Error::State("insertion applies to PLH-free hypotheses".into()));
    }
    if counts.len() != hyp.num_gaps() {
        return Err(Error::Shape(format!(
            "{} insert counts for {} gaps",
            counts.len(),
            hyp.num_gaps()
        )));
    }
    let new_len = hyp.len() + counts.iter().sum::<usize>();
    if new_len > max_seq_len {
        return Err(Error::Length(format!(
            "insertion would grow the hypothesis to {new_len} > {max_seq_len}"
        )));
    }
    let mut out = Vec::with_capacity(new_len);
    for (i, &t) in hyp.tokens().iter().enumerate() {
        out.push(t);
        if let Some(&c) = counts.get(i) {
            out.extend(std::iter::repeat(PLH).take(c));
        }
    }
    Ok(Hypothesis(out))
}

/// Fills the placeholders left to right.
pub fn apply_replace(hyp: &Hypothesis, tokens: &[Token]) -> Result<Hypothesis> {
    let n = hyp.num_placeholders();
    if tokens.len() != n {
        return Err(Error::Shape(format!(
            "{} replacement tokens for {n} placeholders",
            tokens.len()
        )));
    }
    if let Some(&t) = tokens.iter().find(|t| NON_OUTPUT.contains(t)) {
        return Err(Error::Vocabulary {
            id: t,
            reason: "is reserved and cannot fill a placeholder",
        });
    }
    let mut fill = tokens.iter();
    let out = hyp
        .tokens()
        .iter()
        .map(|&t| if t == PLH { *fill.next().unwrap() } else { t })
        .collect();
    Ok(Hypothesis(out))
}

/// Reduces counts from the rightmost gap until the inserted hypothesis fits
/// in `max_seq_len`. Returns whether anything was cut.
pub fn clamp_insert_counts(counts: &mut [usize], hyp_len: usize, max_seq_len: usize) -> bool {
    let mut excess = (hyp_len + counts.iter().sum::<usize>()).saturating_sub(max_seq_len);
    let clamped = excess > 0;
    for c in counts.iter_mut().rev() {
        if excess == 0 {
            break;
        }
        let cut = (*c).min(excess);
        *c -= cut;
        excess -= cut;
    }
    clamped
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const A: Token = 10;
    const B: Token = 11;
    const C: Token = 12;

    fn h(content: &[Token]) -> Hypothesis {
        Hypothesis::from_content(content).unwrap()
    }

    #[test]
    fn delete_examples() {
        let hyp = h(&[A, B, C]);
        assert_eq!(apply_delete(&hyp, &[false, true, false]).unwrap(), h(&[A, C]));
        assert_eq!(apply_delete(&hyp, &[false; 3]).unwrap(), hyp);
        assert_eq!(apply_delete(&hyp, &[true; 3]).unwrap(), Hypothesis::null());
        assert!(matches!(apply_delete(&hyp, &[true]), Err(Error::Shape(_))));
    }

    #[test]
    fn delete_rejects_placeholders() {
        let hyp = Hypothesis::new(vec![BOS, PLH, EOS]).unwrap();
        assert!(matches!(apply_delete(&hyp, &[false]), Err(Error::State(_))));
    }

    #[test]
    fn insert_examples() {
        let got = apply_insert(&Hypothesis::null(), &[3], 64).unwrap();
        assert_eq!(got.tokens(), &[BOS, PLH, PLH, PLH, EOS]);
        let hyp = h(&[A, B]);
        assert_eq!(apply_insert(&hyp, &[0, 0, 0], 64).unwrap(), hyp);
        assert!(matches!(apply_insert(&hyp, &[1, 0], 64), Err(Error::Shape(_))));
        assert!(matches!(apply_insert(&hyp, &[60, 0, 1], 64), Err(Error::Length(_))));
    }

    #[test]
    fn replace_examples() {
        let hyp = Hypothesis::new(vec![BOS, PLH, EOS]).unwrap();
        assert_eq!(apply_replace(&hyp, &[A]).unwrap(), h(&[A]));
        assert_eq!(apply_replace(&h(&[A]), &[]).unwrap(), h(&[A]));
        assert!(matches!(apply_replace(&hyp, &[]), Err(Error::Shape(_))));
        assert!(matches!(
            apply_replace(&hyp, &[EOS]),
            Err(Error::Vocabulary { id: EOS, .. })
        ));
    }

    #[test]
    fn clamp_cuts_from_the_right() {
        let mut c = vec![3, 2, 4];
        assert!(clamp_insert_counts(&mut c, 4, 10));
        assert_eq!(c, vec![3, 2, 1]);
        let mut c = vec![3, 2, 4];
        assert!(clamp_insert_counts(&mut c, 4, 6));
        assert_eq!(c, vec![2, 0, 0]);
        let mut c = vec![1, 1];
        assert!(!clamp_insert_counts(&mut c, 3, 10));
    }

    #[test]
    fn hypothesis_framing() {
        assert!(Hypothesis::new(vec![A, EOS]).is_err());
        assert!(Hypothesis::new(vec![BOS]).is_err());
        assert!(Hypothesis::new(vec![BOS, EOS, EOS]).is_err());
    }

    proptest! {
        #[test]
        fn insert_length_arithmetic(
            content in prop::collection::vec(5u32..20, 0..10),
            seed_counts in prop::collection::vec(0usize..5, 11),
        ) {
            let hyp = h(&content);
            let counts = seed_counts[..hyp.num_gaps()].to_vec();
            let expected = content.len() + 2 + counts.iter().sum::<usize>();
            let out = apply_insert(&hyp, &counts, 1000).unwrap();
            prop_assert_eq!(out.len(), expected);
            prop_assert_eq!(out.num_placeholders(), counts.iter().sum::<usize>());
            let fills: Vec<Token> = vec![7; out.num_placeholders()];
            let filled = apply_replace(&out, &fills).unwrap();
            prop_assert_eq!(filled.len(), out.len());
            prop_assert!(!filled.has_placeholders());
        }
    }
}
