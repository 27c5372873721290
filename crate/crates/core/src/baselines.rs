//! Reference selection methods: train everything on full data, or halve the
//! field on point estimates from growing samples.

use serde::{Deserialize, Serialize};

use crate::error::{AbcError, Result};
use crate::probes::{probe_seed, ProbeBackend};
use crate::types::{RoundRecord, RunTrace, TraceFlag, DEFAULT_INITIAL_TRAIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullRunResult {
    pub best: usize,
    /// Real test accuracy per configuration, in id order.
    pub accuracies: Vec<f64>,
    pub costs: Vec<f64>,
    pub total_cost: f64,
}

/// Trains every configuration on all training data and tests on all test
/// data; the best is the argmax (ties to the lowest id).
pub fn full_run(backend: &dyn ProbeBackend) -> Result<FullRunResult> {
    let n = backend.n_configs();
    if n == 0 {
        return Err(AbcError::InvalidInput("no configurations".into()));
    }
    let mut accuracies = Vec::with_capacity(n);
    let mut costs = Vec::with_capacity(n);
    for id in 1..=n {
        let eval = backend.full_evaluate(id).map_err(|source| AbcError::Probe {
            round: id,
            config_id: id,
            source,
        })?;
        accuracies.push(eval.accuracy);
        costs.push(eval.cost);
    }
    Ok(FullRunResult {
        best: crate::probes::synthetic::argmax(&accuracies),
        total_cost: costs.iter().sum(),
        accuracies,
        costs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalvingParams {
    pub initial_train_size: u64,
    pub initial_test_size: u64,
    pub growth: u64,
}

impl HalvingParams {
    /// Test samples twice the training samples, both doubling every round.
    pub fn new(initial_train_size: u64) -> Self {
        Self {
            initial_train_size,
            initial_test_size: 2 * initial_train_size,
            growth: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_train_size == 0 || self.initial_test_size == 0 {
            return Err(AbcError::param("initial_train_size", "sizes must be >= 1"));
        }
        if self.growth < 2 {
            return Err(AbcError::param("growth", "must be >= 2"));
        }
        Ok(())
    }
}

impl Default for HalvingParams {
    fn default() -> Self {
        Self::new(DEFAULT_INITIAL_TRAIN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalvingRun {
    pub selected: usize,
    pub trace: RunTrace,
    /// Number of configurations probed in each halving round.
    pub survivors: Vec<usize>,
}

/// Successive halving with sampled training and test data.
///
/// Each round probes every remaining configuration at the current sizes,
/// ranks by sampled test accuracy (ties to the lower id), keeps the top
/// `ceil(k / 2)` and grows both sizes by `growth`, capped at the full sizes.
/// The trace records each probe as a point interval at its test accuracy; the
/// eliminated ids are attached to the last probe of the round.
pub fn successive_halving(backend: &dyn ProbeBackend, params: &HalvingParams, seed: u64) -> Result<HalvingRun> {
    params.validate()?;
    let n = backend.n_configs();
    if n == 0 {
        return Err(AbcError::InvalidInput("no configurations".into()));
    }
    let (max_tr, max_te) = (backend.train_size(), backend.test_size());
    let mut s_tr = params.initial_train_size.min(max_tr);
    let mut s_te = params.initial_test_size.min(max_te);
    let mut remaining: Vec<usize> = (1..=n).collect();
    let mut trace = RunTrace::new("successive_halving");
    let mut survivors = Vec::new();
    let mut round = 0;

    while remaining.len() > 1 {
        survivors.push(remaining.len());
        let mut scored = Vec::with_capacity(remaining.len());
        let mut leader: Option<(usize, f64)> = None;
        for &id in &remaining {
            round += 1;
            let probe = backend
                .probe(id, s_tr, s_te, probe_seed(seed, id, s_tr, s_te))
                .map_err(|source| AbcError::Probe {
                    round,
                    config_id: id,
                    source,
                })?;
            let o = probe.outcome;
            if leader.is_none_or(|(_, acc)| o.test_accuracy > acc) {
                leader = Some((id, o.test_accuracy));
            }
            scored.push((id, o.test_accuracy));
            let mut flags = Vec::new();
            if s_tr == max_tr && s_te == max_te {
                flags.push(TraceFlag::FullData);
            }
            if probe.degenerate_sample {
                flags.push(TraceFlag::DegenerateSample);
            }
            trace.push(RoundRecord {
                round,
                config_id: id,
                s_tr,
                s_te,
                acc_train: o.train_accuracy,
                acc_test: o.test_accuracy,
                cost: o.cost,
                lower: o.test_accuracy,
                upper: o.test_accuracy,
                incumbent: leader.map_or(id, |(l, _)| l),
                pruned: Vec::new(),
                snapshot: false,
                flags,
            });
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let keep = remaining.len().div_ceil(2);
        let mut eliminated: Vec<usize> = scored[keep..].iter().map(|&(id, _)| id).collect();
        eliminated.sort_unstable();
        remaining = scored[..keep].iter().map(|&(id, _)| id).collect();
        remaining.sort_unstable();
        let last = trace
            .rounds
            .last_mut()
            .expect("a round probes at least two configurations");
        last.pruned = eliminated;
        last.snapshot = true;
        s_tr = s_tr.saturating_mul(params.growth).min(max_tr);
        s_te = s_te.saturating_mul(params.growth).min(max_te);
    }
    let selected = remaining[0];
    trace.final_selection = selected;
    if let Some(last) = trace.rounds.last_mut() {
        last.incumbent = selected;
    }
    Ok(HalvingRun {
        selected,
        trace,
        survivors,
    })
}

/// `|a_best - a_selected| / a_best`.
pub fn relative_accuracy_loss(a_best: f64, a_selected: f64) -> Result<f64> {
    if !(a_best > 0.0) {
        return Err(AbcError::InvalidInput(format!(
            "best accuracy {a_best} must be positive"
        )));
    }
    Ok((a_best - a_selected).abs() / a_best)
}
