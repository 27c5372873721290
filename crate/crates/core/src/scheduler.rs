//! Choosing the next configuration to probe and its sample size.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AbcError, Result};
use crate::types::ConfigurationState;

/// Scheduling policy used by the engine once warm-up is over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    /// Cost-per-bound-movement comparison between the two highest upper bounds.
    GradientCi,
    /// Always the highest upper bound.
    Ucb,
    /// Fewest probes first.
    RoundRobin,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 3] = [SchedulerKind::GradientCi, SchedulerKind::Ucb, SchedulerKind::RoundRobin];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchedulerKind::GradientCi => "gradient_ci",
            SchedulerKind::Ucb => "ucb",
            SchedulerKind::RoundRobin => "round_robin",
        }
    }

    /// Picks among `active`, which the engine guarantees is non-empty and
    /// fully warmed up.
    pub fn pick(&self, active: &[&ConfigurationState]) -> Result<usize> {
        match self {
            SchedulerKind::GradientCi if active.len() == 1 => Ok(active[0].id),
            SchedulerKind::GradientCi => gradient_ci_pick(active),
            SchedulerKind::Ucb => ucb_pick(active),
            SchedulerKind::RoundRobin => round_robin_pick(active),
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchedulerKind {
    type Err = AbcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient_ci" => Ok(SchedulerKind::GradientCi),
            "ucb" => Ok(SchedulerKind::Ucb),
            "round_robin" => Ok(SchedulerKind::RoundRobin),
            other => Err(AbcError::param(
                "scheduler",
                format!("unknown scheduler `{other}` (expected gradient_ci, ucb or round_robin)"),
            )),
        }
    }
}

/// Optimal geometric step factor `2^(1/alpha)` for probe cost `T(s) = s^alpha`.
pub fn optimal_step_size(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(AbcError::param("alpha", format!("{alpha} must be > 0")));
    }
    Ok(2f64.powf(1.0 / alpha))
}

/// Next size on the geometric grid: `min(cap, round(c * current))`, growing by
/// at least one sample and saturating at `cap`.
pub fn next_sample_size(current: u64, c: f64, cap: u64) -> u64 {
    if current >= cap {
        return cap;
    }
    let grown = (c * current as f64).round();
    let grown = if grown >= cap as f64 { cap } else { grown as u64 };
    grown.max(current + 1).min(cap)
}

/// Cost and bound movement between a configuration's two most recent probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientEstimate {
    pub delta_cost: f64,
    pub delta_lower: f64,
    pub delta_upper: f64,
}

impl GradientEstimate {
    /// `None` until the configuration has two probes.
    pub fn from_state(state: &ConfigurationState) -> Option<Self> {
        let n = state.history.len();
        if n < 2 || state.ci_history.len() < 2 {
            return None;
        }
        let (prev, last) = (&state.history[n - 2], &state.history[n - 1]);
        let m = state.ci_history.len();
        let (prev_ci, last_ci) = (&state.ci_history[m - 2], &state.ci_history[m - 1]);
        Some(Self {
            // wall-clock costs can jitter downwards
            delta_cost: (last.cost - prev.cost).max(0.0),
            delta_lower: last_ci.lower - prev_ci.lower,
            delta_upper: last_ci.upper - prev_ci.upper,
        })
    }

    /// `ΔT/Δl`: infinite when the bound did not move, nonpositive when it
    /// fell (so a configuration whose lower bound dropped is probed again).
    pub fn lower_rate(&self) -> f64 {
        if self.delta_lower == 0.0 {
            f64::INFINITY
        } else {
            self.delta_cost / self.delta_lower
        }
    }

    /// `|ΔT/Δu|`; infinite when the upper bound did not decrease.
    pub fn upper_rate(&self) -> f64 {
        if self.delta_upper >= 0.0 {
            f64::INFINITY
        } else {
            (self.delta_cost / self.delta_upper).abs()
        }
    }
}

/// Descending upper bound, ties by ascending id.
fn by_upper_desc(a: &&ConfigurationState, b: &&ConfigurationState) -> Ordering {
    b.ci.upper
        .partial_cmp(&a.ci.upper)
        .unwrap_or(Ordering::Equal)
        .then(a.id.cmp(&b.id))
}

/// GradientCI: let Ω₁, Ω₂ be the configurations with the highest and second
/// highest upper bound. Probe Ω₁ if raising its lower bound is no more
/// expensive per unit than lowering the upper bounds of all the others,
/// otherwise probe Ω₂.
pub fn gradient_ci_pick(active: &[&ConfigurationState]) -> Result<usize> {
    if active.len() < 2 {
        return Err(AbcError::Scheduler(format!(
            "gradient_ci needs at least two active configurations, got {}",
            active.len()
        )));
    }
    let mut grads = Vec::with_capacity(active.len());
    for state in active {
        let g = GradientEstimate::from_state(state).ok_or_else(|| {
            AbcError::Scheduler(format!(
                "configuration {} has {} probe(s); gradient_ci needs two",
                state.id,
                state.probes()
            ))
        })?;
        grads.push((state.id, g));
    }
    let mut sorted: Vec<&ConfigurationState> = active.to_vec();
    sorted.sort_by(by_upper_desc);
    let (first, second) = (sorted[0].id, sorted[1].id);
    let grad_of = |id: usize| grads.iter().find(|(i, _)| *i == id).map(|(_, g)| *g).unwrap();

    let first_rate = grad_of(first).lower_rate();
    let others: f64 = sorted[1..].iter().map(|s| grad_of(s.id).upper_rate()).sum();
    Ok(if first_rate <= others { first } else { second })
}

/// Highest upper bound, ties by lowest id.
pub fn ucb_pick(active: &[&ConfigurationState]) -> Result<usize> {
    active
        .iter()
        .min_by(|a, b| by_upper_desc(a, b))
        .map(|s| s.id)
        .ok_or_else(|| AbcError::Scheduler("ucb needs at least one active configuration".into()))
}

/// Fewest probes, ties by lowest id.
pub fn round_robin_pick(active: &[&ConfigurationState]) -> Result<usize> {
    active
        .iter()
        .min_by_key(|s| (s.probes(), s.id))
        .map(|s| s.id)
        .ok_or_else(|| AbcError::Scheduler("round_robin needs at least one active configuration".into()))
}
