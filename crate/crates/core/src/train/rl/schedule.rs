//! Sampling-temperature schedules over training steps.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Constant,
    /// Geometric decay from `tau0` down to the floor `tau_t`.
    AnnealDown,
    /// Geometric growth from `tau0` up to the ceiling `tau_t`.
    AnnealUp,
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ScheduleKind::Constant),
            "anneal-down" => Ok(ScheduleKind::AnnealDown),
            "anneal-up" => Ok(ScheduleKind::AnnealUp),
            _ => Err(Error::InvalidArgument(format!(
                "unknown schedule `{s}` (expected constant, anneal-down or anneal-up)"
            ))),
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::Constant => "constant",
            ScheduleKind::AnnealDown => "anneal-down",
            ScheduleKind::AnnealUp => "anneal-up",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureSchedule {
    pub kind: ScheduleKind,
    pub tau0: f64,
    /// Final temperature; ignored by `Constant`.
    pub tau_t: f64,
    pub total_steps: u64,
}

impl TemperatureSchedule {
    pub fn constant(tau: f64) -> Self {
        TemperatureSchedule {
            kind: ScheduleKind::Constant,
            tau0: tau,
            tau_t: tau,
            total_steps: 0,
        }
    }

    pub fn anneal_down(tau0: f64, tau_t: f64, total_steps: u64) -> Self {
        TemperatureSchedule {
            kind: ScheduleKind::AnnealDown,
            tau0,
            tau_t,
            total_steps,
        }
    }

    pub fn anneal_up(tau0: f64, tau_t: f64, total_steps: u64) -> Self {
        TemperatureSchedule {
            kind: ScheduleKind::AnnealUp,
            tau0,
            tau_t,
            total_steps,
        }
    }

    /// Per-step multiplier `exp(−ln(tau0/tau_t)/T)` of the annealed kinds.
    pub fn ratio(&self) -> f64 {
        match self.kind {
            ScheduleKind::Constant => 1.0,
            _ if self.total_steps == 0 => 1.0,
            _ => (-(self.tau0 / self.tau_t).ln() / self.total_steps as f64).exp(),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, tau) in [("tau0", self.tau0), ("tauT", self.tau_t)] {
            if !(tau > 0.0 && tau.is_finite()) {
                v.push(format!("{name} must be a positive number, got {tau}"));
            }
        }
        match self.kind {
            ScheduleKind::AnnealDown if self.tau0 < self.tau_t => {
                v.push(format!("anneal-down needs tau0 >= tauT, got {} < {}", self.tau0, self.tau_t))
            }
            ScheduleKind::AnnealUp if self.tau0 > self.tau_t => {
                v.push(format!("anneal-up needs tau0 <= tauT, got {} > {}", self.tau0, self.tau_t))
            }
            _ => {}
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(v.join("; ")))
        }
    }

    /// Short human-readable name for report tables.
    pub fn label(&self) -> String {
        match self.kind {
            ScheduleKind::Constant => format!("constant {}", self.tau0),
            _ => format!("anneal {}->{}", self.tau0, self.tau_t),
        }
    }
}

/// Temperature at `step`. The annealed kinds evaluate the geometric recurrence
/// `tau_{i+1} = tau_i * ratio` in closed form, `tau0 * (tau_t/tau0)^(i/T)`, and
/// hold `tau_t` from step `T` on.
pub fn temperature_at(schedule: &TemperatureSchedule, step: u64) -> Result<f64> {
    schedule.validate()?;
    let s = schedule;
    if s.kind == ScheduleKind::Constant {
        return Ok(s.tau0);
    }
    if step >= s.total_steps {
        return Ok(s.tau_t);
    }
    let frac = step as f64 / s.total_steps as f64;
    let tau = s.tau0 * (s.tau_t / s.tau0).powf(frac);
    Ok(match s.kind {
        ScheduleKind::AnnealDown => tau.max(s.tau_t),
        _ => tau.min(s.tau_t),
    })
}

/// Problems with a logged temperature sequence: non-positive or non-finite
/// values, values outside the schedule's range, or steps against its
/// direction.
pub fn trajectory_violations(schedule: &TemperatureSchedule, taus: &[f64]) -> Vec<String> {
    let (lo, hi) = match schedule.kind {
        ScheduleKind::Constant => (schedule.tau0, schedule.tau0),
        _ => (schedule.tau0.min(schedule.tau_t), schedule.tau0.max(schedule.tau_t)),
    };
    let mut v = Vec::new();
    for (i, &t) in taus.iter().enumerate() {
        if !(t.is_finite() && t > 0.0 && t >= lo && t <= hi) {
            v.push(format!("step {i}: temperature {t} outside [{lo}, {hi}]"));
        }
    }
    for (i, w) in taus.windows(2).enumerate() {
        let bad = match schedule.kind {
            ScheduleKind::Constant => w[1] != w[0],
            ScheduleKind::AnnealDown => w[1] > w[0],
            ScheduleKind::AnnealUp => w[1] < w[0],
        };
        if bad {
            v.push(format!("step {}: temperature moved from {} to {} under {}", i + 1, w[0], w[1], schedule.kind));
        }
    }
    v
}
