//! Checks on recorded traces: structural invariants of the selection loop and
//! empirical containment of the real accuracy in the recorded intervals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::stats::binomial_margin;
use crate::error::{AbcError, Result};
use crate::types::{ConfidenceInterval, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Interval outside `[0, 1]` or inverted.
    MalformedInterval,
    /// Interval not inside the configuration's cached snapshot interval.
    Nesting,
    /// Snapshot flag disagrees with whether anything was pruned.
    SnapshotAccounting,
    /// A probed or pruned configuration was no longer active, or pruned twice.
    ActiveSet,
    /// A pruned configuration did not satisfy `u - l_incumbent <= epsilon`,
    /// or an active one that did was kept.
    PruneCondition,
    /// The incumbent changed other than to a probed configuration with a strictly higher lower bound.
    IncumbentUpdate,
    /// The incumbent's lower bound decreased between snapshots.
    IncumbentMonotonicity,
    /// At least `n` snapshots.
    SnapshotCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub round: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "round {}: {:?}: {}", self.round, self.kind, self.detail)
    }
}

/// Structural audit of a selection-loop trace.
///
/// `n_configs` defaults to the largest id mentioned in the trace; without
/// `epsilon` the prune condition is not checked.
pub fn structural_audit(trace: &RunTrace, n_configs: Option<usize>, epsilon: Option<f64>) -> Vec<Violation> {
    let n = n_configs.unwrap_or_else(|| {
        trace
            .rounds
            .iter()
            .flat_map(|r| {
                std::iter::once(r.config_id)
                    .chain(r.pruned.iter().copied())
                    .chain([r.incumbent])
            })
            .max()
            .unwrap_or(0)
    });
    let mut out = Vec::new();
    let mut push = |round: usize, kind: ViolationKind, detail: String| out.push(Violation { round, kind, detail });

    let mut current: BTreeMap<usize, ConfidenceInterval> = (1..=n).map(|id| (id, ConfidenceInterval::FULL)).collect();
    let mut cached = current.clone();
    let mut active: BTreeSet<usize> = (1..=n).collect();
    let mut incumbent = 1usize;
    let mut snapshots = 0usize;
    let mut last_snapshot_lower: Option<(usize, f64)> = None;

    for r in &trace.rounds {
        let ci = r.interval();
        if !(0.0 <= ci.lower && ci.lower <= ci.upper && ci.upper <= 1.0) {
            push(
                r.round,
                ViolationKind::MalformedInterval,
                format!("[{}, {}]", ci.lower, ci.upper),
            );
        }
        if r.config_id == 0 || r.config_id > n {
            push(
                r.round,
                ViolationKind::ActiveSet,
                format!("unknown configuration {}", r.config_id),
            );
            continue;
        }
        if !active.contains(&r.config_id) {
            push(
                r.round,
                ViolationKind::ActiveSet,
                format!("configuration {} probed after it was pruned", r.config_id),
            );
        }
        let cache = cached[&r.config_id];
        if !ci.is_subset_of(&cache) {
            push(
                r.round,
                ViolationKind::Nesting,
                format!(
                    "configuration {}: [{}, {}] not inside cached [{}, {}]",
                    r.config_id, ci.lower, ci.upper, cache.lower, cache.upper
                ),
            );
        }
        let previous_incumbent_lower = current[&incumbent].lower;
        current.insert(r.config_id, ci);

        if r.incumbent != incumbent {
            if r.incumbent != r.config_id || ci.lower <= previous_incumbent_lower {
                push(
                    r.round,
                    ViolationKind::IncumbentUpdate,
                    format!("incumbent moved from {incumbent} to {}", r.incumbent),
                );
            }
        } else if r.config_id != incumbent && ci.lower > previous_incumbent_lower {
            push(
                r.round,
                ViolationKind::IncumbentUpdate,
                format!(
                    "configuration {} has lower bound {} above the incumbent's {} but did not take over",
                    r.config_id, ci.lower, previous_incumbent_lower
                ),
            );
        }
        incumbent = r.incumbent.clamp(1, n.max(1));
        let incumbent_lower = current.get(&incumbent).map_or(0.0, |c| c.lower);

        let mut seen = BTreeSet::new();
        for &p in &r.pruned {
            if !seen.insert(p) || !active.contains(&p) {
                push(
                    r.round,
                    ViolationKind::ActiveSet,
                    format!("configuration {p} pruned while not active"),
                );
            }
        }
        if let Some(eps) = epsilon {
            for &id in &active {
                let u = current[&id].upper;
                let should = u - incumbent_lower <= eps;
                let did = r.pruned.contains(&id);
                if should != did {
                    push(
                        r.round,
                        ViolationKind::PruneCondition,
                        format!(
                            "configuration {id}: u - l_incumbent = {} with epsilon {eps}, but it was {}",
                            u - incumbent_lower,
                            if did { "pruned" } else { "kept" }
                        ),
                    );
                }
            }
        }
        for p in &r.pruned {
            active.remove(p);
        }
        if r.snapshot != !r.pruned.is_empty() {
            push(
                r.round,
                ViolationKind::SnapshotAccounting,
                format!("snapshot = {} with {} pruned", r.snapshot, r.pruned.len()),
            );
        }
        if r.snapshot {
            snapshots += 1;
            for &id in &active {
                cached.insert(id, current[&id]);
            }
            if let Some((round, lower)) = last_snapshot_lower {
                if incumbent_lower < lower {
                    push(
                        r.round,
                        ViolationKind::IncumbentMonotonicity,
                        format!(
                            "incumbent lower bound {incumbent_lower} below {lower} at the snapshot of round {round}"
                        ),
                    );
                }
            }
            last_snapshot_lower = Some((r.round, incumbent_lower));
        }
    }
    if n > 0 && snapshots >= n {
        let round = trace.rounds.last().map_or(0, |r| r.round);
        push(
            round,
            ViolationKind::SnapshotCount,
            format!("{snapshots} snapshots for {n} configurations"),
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigContainment {
    pub id: usize,
    pub probes: usize,
    pub violations: usize,
    pub rate: f64,
    /// True when the rate exceeds `delta / n^2` by more than three binomial standard deviations.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    /// `delta / n^2`.
    pub threshold: f64,
    pub per_config: Vec<ConfigContainment>,
    pub probes: usize,
    pub violations: usize,
    pub rate: f64,
    /// Three binomial standard deviations at the threshold rate over all probes.
    pub margin: f64,
}

impl ContainmentReport {
    pub fn within_margin(&self) -> bool {
        self.rate <= self.threshold + self.margin
    }
}

/// Fraction of recorded intervals that exclude the real accuracy, per
/// configuration and overall. `truth[i]` is the real accuracy of configuration `i + 1`.
pub fn containment_audit(traces: &[RunTrace], truth: &[f64], delta: f64) -> Result<ContainmentReport> {
    let n = truth.len();
    if n == 0 {
        return Err(AbcError::InvalidInput("containment audit needs ground truth".into()));
    }
    let mut probes = vec![0usize; n];
    let mut misses = vec![0usize; n];
    for trace in traces {
        for r in &trace.rounds {
            let Some(&a) = truth.get(r.config_id.wrapping_sub(1)) else {
                return Err(AbcError::InvalidInput(format!(
                    "round {} probes configuration {} but ground truth covers {n}",
                    r.round, r.config_id
                )));
            };
            probes[r.config_id - 1] += 1;
            if !r.interval().contains(a) {
                misses[r.config_id - 1] += 1;
            }
        }
    }
    let threshold = delta / (n * n) as f64;
    let per_config = (0..n)
        .map(|i| {
            let rate = if probes[i] == 0 {
                0.0
            } else {
                misses[i] as f64 / probes[i] as f64
            };
            ConfigContainment {
                id: i + 1,
                probes: probes[i],
                violations: misses[i],
                rate,
                flagged: probes[i] > 0 && rate > threshold + binomial_margin(threshold, probes[i], 3.0),
            }
        })
        .collect();
    let total: usize = probes.iter().sum();
    let violations: usize = misses.iter().sum();
    Ok(ContainmentReport {
        threshold,
        per_config,
        probes: total,
        violations,
        rate: if total == 0 {
            0.0
        } else {
            violations as f64 / total as f64
        },
        margin: binomial_margin(threshold, total, 3.0),
    })
}
