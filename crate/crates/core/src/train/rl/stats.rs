//! Leave-one-out baselines and per-slot advantage statistics.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean reward of the other `k − 1` samples.
pub fn loo_baseline(rewards: &[f64], i: usize) -> Result<f64> {
    let k = rewards.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-out baseline needs at least 2 samples, got {k}"
        )));
    }
    if i >= k {
        return Err(Error::InvalidArgument(format!("sample index {i} out of {k}")));
    }
    let others: f64 = rewards.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, r)| r).sum();
    Ok(others / (k - 1) as f64)
}

/// `r_i − b_i` for every sample, computed as the mean of the pairwise
/// differences `r_i − r_j`, which is the same quantity but exactly zero when
/// the rewards tie.
pub fn advantages(rewards: &[f64]) -> Result<Vec<f64>> {
    let k = rewards.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-out baseline needs at least 2 samples, got {k}"
        )));
    }
    Ok(rewards
        .iter()
        .map(|&ri| rewards.iter().map(|&rj| ri - rj).sum::<f64>() / (k - 1) as f64)
        .collect())
}

/// The merged edit operations that earn a reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlotKind {
    Delete,
    InsertReplace,
}

impl fmt::Display for SlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SlotKind::Delete => "delete",
            SlotKind::InsertReplace => "insert+replace",
        })
    }
}

/// One rewarded position in a rollout: an iteration and the operation in it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub iteration: usize,
    pub kind: SlotKind,
}

/// Slots of an `n`-iteration rollout from the null string: iteration 1 has
/// nothing to delete.
pub fn slots(n_iterations: usize) -> Vec<Slot> {
    (1..=n_iterations)
        .flat_map(|iteration| {
            let kinds: &[SlotKind] = if iteration == 1 {
                &[SlotKind::InsertReplace]
            } else {
                &[SlotKind::Delete, SlotKind::InsertReplace]
            };
            kinds.iter().map(move |&kind| Slot { iteration, kind })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
struct Running {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageRow {
    pub iteration: usize,
    pub operation: SlotKind,
    pub count: u64,
    pub mean: f64,
    /// Sample standard deviation; `None` below two values.
    pub sd: Option<f64>,
}

/// Running mean and SD of advantages per slot (single-pass Welford update).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdvantageStats {
    slots: BTreeMap<Slot, Running>,
}

impl AdvantageStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stats with every slot of an `n`-iteration rollout present and empty.
    pub fn for_iterations(n_iterations: usize) -> Self {
        AdvantageStats {
            slots: slots(n_iterations).into_iter().map(|s| (s, Running::default())).collect(),
        }
    }

    pub fn record(&mut self, slot: Slot, advantages: &[f64]) {
        let r = self.slots.entry(slot).or_default();
        for &a in advantages {
            r.push(a);
        }
    }

    pub fn count(&self, slot: Slot) -> u64 {
        self.slots.get(&slot).map_or(0, |r| r.n)
    }

    pub fn mean(&self, slot: Slot) -> Option<f64> {
        self.slots.get(&slot).filter(|r| r.n > 0).map(|r| r.mean)
    }

    pub fn sd(&self, slot: Slot) -> Option<f64> {
        self.slots
            .get(&slot)
            .filter(|r| r.n > 1)
            .map(|r| (r.m2 / (r.n - 1) as f64).sqrt())
    }

    /// Rows in rollout order.
    pub fn rows(&self) -> Vec<AdvantageRow> {
        self.slots
            .iter()
            .map(|(s, r)| AdvantageRow {
                iteration: s.iteration,
                operation: s.kind,
                count: r.n,
                mean: r.mean,
                sd: self.sd(*s),
            })
            .collect()
    }

    /// `iteration,operation,sd` with SDs multiplied by `scale` (100 puts
    /// BLEU rewards on the usual 0..100 scale); missing SDs are left empty.
    pub fn to_csv(&self, scale: f64) -> String {
        let mut out = String::from("iteration,operation,sd\n");
        for r in self.rows() {
            let sd = r.sd.map(|v| format!("{:.4}", v * scale)).unwrap_or_default();
            out.push_str(&format!("{},{},{sd}\n", r.iteration, r.operation));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const S1: Slot = Slot {
        iteration: 1,
        kind: SlotKind::InsertReplace,
    };

    #[test]
    fn baseline_hand_value() {
        assert_eq!(loo_baseline(&[1.0, 2.0, 3.0, 4.0, 5.0], 0).unwrap(), 3.5);
        assert!(loo_baseline(&[1.0], 0).is_err());
        assert!(advantages(&[1.0]).is_err());
    }

    #[test]
    fn equal_rewards_give_zero_advantages() {
        let a = advantages(&[0.37; 5]).unwrap();
        assert!(a.iter().all(|&x| x == 0.0));
        for i in 0..5 {
            assert!((loo_baseline(&[0.37; 5], i).unwrap() - 0.37).abs() < 1e-15);
        }
    }

    #[test]
    fn three_iterations_have_five_slots() {
        let s = slots(3);
        assert_eq!(s.len(), 5);
        assert_eq!(s[0], S1);
        assert_eq!(s[1], Slot { iteration: 2, kind: SlotKind::Delete });
        assert_eq!(AdvantageStats::for_iterations(3).rows().len(), 5);
    }

    #[test]
    fn two_point_and_constant_sd() {
        let mut st = AdvantageStats::new();
        st.record(S1, &[1.0, -1.0]);
        assert!((st.sd(S1).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let mut st = AdvantageStats::new();
        st.record(S1, &[0.25; 10]);
        assert_eq!(st.sd(S1), Some(0.0));
        assert_eq!(AdvantageStats::new().sd(S1), None);
    }

    #[test]
    fn csv_layout() {
        let mut st = AdvantageStats::for_iterations(2);
        st.record(S1, &[0.1, -0.1]);
        let csv = st.to_csv(100.0);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iteration,operation,sd");
        assert_eq!(lines[1], "1,insert+replace,14.1421");
        assert_eq!(lines[2], "2,delete,");
        assert_eq!(lines.len(), 4);
    }

    proptest! {
        #[test]
        fn advantages_match_baselines_and_sum_to_zero(r in proptest::collection::vec(-1.0f64..1.0, 2..11)) {
            let a = advantages(&r).unwrap();
            prop_assert!(a.iter().sum::<f64>().abs() < 1e-9);
            for i in 0..r.len() {
                prop_assert!((a[i] - (r[i] - loo_baseline(&r, i).unwrap())).abs() < 1e-12);
            }
        }

        #[test]
        fn streaming_sd_matches_two_pass(xs in proptest::collection::vec(-10.0f64..10.0, 2..200)) {
            let mut st = AdvantageStats::new();
            for chunk in xs.chunks(3) {
                st.record(S1, chunk);
            }
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            prop_assert!((st.sd(S1).unwrap() - sd).abs() < 1e-9);
        }
    }
}
