//! The selection loop: probe, bound, update the incumbent, prune, snapshot,
//! schedule.
//!
//! [`EngineState`] holds everything the loop mutates and exposes the two
//! halves of a round separately ([`EngineState::plan`] and
//! [`EngineState::apply`]) so that a recorded trace can be replayed through
//! exactly the same update code.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ci::{nest_within, raw_interval, BoundInputs};
use crate::error::{AbcError, Result};
use crate::probes::{probe_seed, Probe, ProbeBackend};
use crate::scheduler::{next_sample_size, SchedulerKind};
use crate::types::{ConfidenceInterval, ConfigurationState, ProbeOutcome, RoundRecord, RunParams, RunTrace, TraceFlag};

/// Conditions worth surfacing to the caller that do not make the result invalid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunWarning {
    /// The budget did not cover a single probe; configuration 1 was returned unprobed.
    BudgetBelowFirstProbe,
    /// The last configuration left in the active set is not the incumbent.
    SurvivorNotIncumbent { survivor: usize, incumbent: usize },
    /// The round limit was reached and the remaining configurations were evaluated on full data.
    RoundGuard { round: usize },
    /// Several configurations remained active but none could be probed further.
    Stalled { active: Vec<usize> },
}

/// The next probe the loop wants to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannedProbe {
    pub config_id: usize,
    pub s_tr: u64,
    pub s_te: u64,
    /// Full-data evaluation forced by the round limit.
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub params: RunParams,
    pub configs: Vec<ConfigurationState>,
    /// The configuration with the highest lower bound seen so far.
    pub incumbent: usize,
    pub active: BTreeSet<usize>,
    pub round: usize,
    pub trace: RunTrace,
    pub warnings: Vec<RunWarning>,
}

impl EngineState {
    pub fn new(params: RunParams, labels: Vec<String>, method: impl Into<String>) -> Result<Self> {
        params.validate()?;
        if labels.len() != params.n_configs {
            return Err(AbcError::InvalidInput(format!(
                "{} labels for {} configurations",
                labels.len(),
                params.n_configs
            )));
        }
        let configs = labels
            .into_iter()
            .enumerate()
            .map(|(i, label)| ConfigurationState::new(i + 1, label))
            .collect();
        Ok(Self {
            active: (1..=params.n_configs).collect(),
            params,
            configs,
            incumbent: 1,
            round: 0,
            trace: RunTrace::new("abc"),
            warnings: Vec::new(),
        }
        .with_method(method))
    }

    fn with_method(mut self, method: impl Into<String>) -> Self {
        self.trace.method = method.into();
        self
    }

    pub fn config(&self, id: usize) -> &ConfigurationState {
        &self.configs[id - 1]
    }

    pub fn is_finished(&self) -> bool {
        self.active.len() <= 1
    }

    /// `n (2 + ceil(log_c(max_train / s0))) + n`.
    pub fn round_limit(&self) -> usize {
        let p = &self.params;
        let steps = ((p.max_train_size as f64 / p.initial_train_size as f64).ln() / p.step_factor.ln())
            .ceil()
            .max(0.0) as usize;
        p.n_configs * (2 + steps) + p.n_configs
    }

    fn saturated(&self, c: &ConfigurationState) -> bool {
        c.current_sample_size >= self.params.max_train_size && c.current_test_size >= self.params.max_test_size
    }

    /// Sizes of the next probe of `c`.
    fn next_sizes(&self, c: &ConfigurationState) -> (u64, u64) {
        let p = &self.params;
        if c.probes() == 0 {
            return (p.initial_train_size, p.initial_test_size);
        }
        let s_tr = next_sample_size(c.current_sample_size, p.step_factor, p.max_train_size);
        let s_te = if s_tr >= p.max_train_size {
            p.max_test_size
        } else {
            next_sample_size(c.current_test_size, p.step_factor, p.max_test_size)
        };
        (s_tr, s_te)
    }

    /// Decides the next probe, or `None` when the loop is over.
    pub fn plan(&self, scheduler: SchedulerKind) -> Result<Option<PlannedProbe>> {
        if self.is_finished() {
            return Ok(None);
        }
        let probeable: Vec<&ConfigurationState> = self
            .active
            .iter()
            .map(|&id| self.config(id))
            .filter(|c| !self.saturated(c))
            .collect();
        if probeable.is_empty() {
            return Ok(None);
        }
        if self.round >= self.round_limit() {
            let c = probeable[0];
            return Ok(Some(PlannedProbe {
                config_id: c.id,
                s_tr: self.params.max_train_size,
                s_te: self.params.max_test_size,
                forced: true,
            }));
        }
        let warming: Vec<&ConfigurationState> = probeable.iter().copied().filter(|c| c.probes() < 2).collect();
        let id = if let Some(c) = warming.iter().min_by_key(|c| (c.probes(), c.id)) {
            c.id
        } else {
            let id = scheduler.pick(&probeable)?;
            if !probeable.iter().any(|c| c.id == id) {
                return Err(AbcError::Scheduler(format!(
                    "{scheduler} returned configuration {id}, which is not probeable"
                )));
            }
            id
        };
        let (s_tr, s_te) = self.next_sizes(self.config(id));
        Ok(Some(PlannedProbe {
            config_id: id,
            s_tr,
            s_te,
            forced: false,
        }))
    }

    /// Applies one probe outcome: bound, nest, update the incumbent, prune and
    /// snapshot. Returns the record appended to the trace.
    pub fn apply(&mut self, plan: PlannedProbe, probe: Probe) -> Result<&RoundRecord> {
        let outcome = probe.outcome;
        outcome.validate()?;
        if outcome.train_sample_size != plan.s_tr || outcome.test_sample_size != plan.s_te {
            return Err(AbcError::InvalidInput(format!(
                "probe of configuration {} returned sizes ({}, {}) instead of ({}, {})",
                plan.config_id, outcome.train_sample_size, outcome.test_sample_size, plan.s_tr, plan.s_te
            )));
        }
        if !self.active.contains(&plan.config_id) {
            return Err(AbcError::InvalidInput(format!(
                "configuration {} is not active",
                plan.config_id
            )));
        }
        self.round += 1;
        let p = &self.params;
        let mut flags = Vec::new();

        let full = plan.s_tr >= p.max_train_size && plan.s_te >= p.max_test_size;
        let fresh = if full {
            flags.push(TraceFlag::FullData);
            ConfidenceInterval::point(outcome.test_accuracy)
        } else {
            raw_interval(&BoundInputs::new(outcome, p.n_configs, p.delta, p.max_test_size))?
        };
        let id = plan.config_id;
        let est = nest_within(fresh, self.config(id).cached_ci);
        if est.empty_intersection {
            flags.push(TraceFlag::EmptyIntersection);
        }
        self.configs[id - 1].record_probe(outcome, est.ci);

        if id != self.incumbent && est.ci.lower > self.config(self.incumbent).ci.lower {
            self.incumbent = id;
        }

        let incumbent_lower = self.config(self.incumbent).ci.lower;
        let epsilon = self.params.epsilon;
        let pruned: Vec<usize> = self
            .active
            .iter()
            .copied()
            .filter(|&c| self.config(c).ci.upper - incumbent_lower <= epsilon)
            .collect();
        for &c in &pruned {
            self.active.remove(&c);
            self.configs[c - 1].active = false;
        }
        if pruned.contains(&self.incumbent) {
            flags.push(TraceFlag::IncumbentPruned);
        }
        let snapshot = !pruned.is_empty();
        if snapshot {
            for &c in &self.active {
                self.configs[c - 1].snapshot();
            }
        }
        if probe.degenerate_sample {
            flags.push(TraceFlag::DegenerateSample);
        }
        if plan.forced {
            flags.push(TraceFlag::RoundGuard);
        }

        self.trace.push(RoundRecord {
            round: self.round,
            config_id: id,
            s_tr: outcome.train_sample_size,
            s_te: outcome.test_sample_size,
            acc_train: outcome.train_accuracy,
            acc_test: outcome.test_accuracy,
            cost: outcome.cost,
            lower: est.ci.lower,
            upper: est.ci.upper,
            incumbent: self.incumbent,
            pruned,
            snapshot,
            flags,
        });
        self.trace.final_selection = self.incumbent;
        Ok(self.trace.rounds.last().expect("just pushed"))
    }

    /// Best guess if the run had to stop now: whichever of the incumbent and
    /// the active configuration with the highest upper bound has the smaller
    /// gap between the highest upper bound among all other configurations and
    /// its own lower bound. Ties go to the incumbent.
    pub fn anytime_best_guess(&self) -> usize {
        if self.trace.is_empty() {
            return 1;
        }
        let top_upper = self
            .active
            .iter()
            .map(|&id| self.config(id))
            .min_by(|a, b| b.ci.upper.total_cmp(&a.ci.upper).then(a.id.cmp(&b.id)))
            .map(|c| c.id)
            .unwrap_or(self.incumbent);
        let gap = |x: usize| {
            let others = self
                .configs
                .iter()
                .filter(|c| c.id != x)
                .map(|c| c.ci.upper)
                .fold(f64::NEG_INFINITY, f64::max);
            others - self.config(x).ci.lower
        };
        if gap(top_upper) < gap(self.incumbent) {
            top_upper
        } else {
            self.incumbent
        }
    }

    /// Cost of the next probe: known from the backend's cost model, else
    /// extrapolated from this configuration's last probe (or from the mean
    /// first-probe cost) by `(s_new / s_old)^alpha`.
    fn predicted_cost(&self, backend: &dyn ProbeBackend, plan: &PlannedProbe) -> Option<f64> {
        if let Some(cost) = backend.predicted_cost(plan.config_id, plan.s_tr, plan.s_te) {
            return Some(cost);
        }
        let alpha = self.params.alpha;
        let scale = |from: u64| (plan.s_tr as f64 / from as f64).powf(alpha);
        if let Some(last) = self.config(plan.config_id).last_probe() {
            return Some(last.cost * scale(last.train_sample_size));
        }
        let firsts: Vec<&ProbeOutcome> = self.configs.iter().filter_map(|c| c.history.first()).collect();
        if firsts.is_empty() {
            return None;
        }
        let mean = firsts.iter().map(|o| o.cost).sum::<f64>() / firsts.len() as f64;
        Some(mean * scale(firsts[0].train_sample_size))
    }
}

/// Result of a selection run.
#[derive(Debug, Clone)]
pub struct AbcRun {
    pub selected: usize,
    pub trace: RunTrace,
    pub state: EngineState,
    pub stopped_by_budget: bool,
    pub warnings: Vec<RunWarning>,
}

/// Default parameters for a backend: standard sizes and tolerance, `alpha`
/// (and the matching step factor) from the backend's cost model when it has one.
pub fn params_for(backend: &dyn ProbeBackend) -> RunParams {
    let params = RunParams::new(backend.n_configs(), backend.train_size(), backend.test_size());
    match backend.cost_exponent() {
        Some(alpha) if alpha > 0.0 => params.with_alpha(alpha),
        _ => params,
    }
}

fn check_backend(backend: &dyn ProbeBackend, params: &RunParams) -> Result<()> {
    if backend.n_configs() != params.n_configs {
        return Err(AbcError::InvalidInput(format!(
            "params are for {} configurations but the backend has {}",
            params.n_configs,
            backend.n_configs()
        )));
    }
    if backend.train_size() != params.max_train_size || backend.test_size() != params.max_test_size {
        return Err(AbcError::InvalidInput(format!(
            "params cap sizes at ({}, {}) but the backend has ({}, {})",
            params.max_train_size,
            params.max_test_size,
            backend.train_size(),
            backend.test_size()
        )));
    }
    Ok(())
}

pub fn method_name(scheduler: SchedulerKind) -> String {
    format!("abc_{}", scheduler.as_str())
}

/// Runs the selection loop to completion.
pub fn run_abc(backend: &dyn ProbeBackend, params: &RunParams, scheduler: SchedulerKind) -> Result<AbcRun> {
    run(backend, params, scheduler, None)
}

/// Runs the selection loop, stopping before any probe that would take the
/// accumulated cost past `budget`. A stopped run returns the anytime best guess.
pub fn select_with_budget(
    backend: &dyn ProbeBackend,
    params: &RunParams,
    scheduler: SchedulerKind,
    budget: f64,
) -> Result<AbcRun> {
    if !(budget > 0.0) {
        return Err(AbcError::param("budget", format!("{budget} must be > 0")));
    }
    run(backend, params, scheduler, Some(budget))
}

fn run(
    backend: &dyn ProbeBackend,
    params: &RunParams,
    scheduler: SchedulerKind,
    budget: Option<f64>,
) -> Result<AbcRun> {
    check_backend(backend, params)?;
    let labels = (1..=params.n_configs).map(|id| backend.label(id)).collect();
    let mut state = EngineState::new(params.clone(), labels, method_name(scheduler))?;
    let mut stopped_by_budget = false;
    let mut guard_warned = false;

    while let Some(plan) = state.plan(scheduler)? {
        if let Some(budget) = budget {
            let spent = state.trace.wall_cost_total;
            if spent >= budget {
                stopped_by_budget = true;
                break;
            }
            if let Some(cost) = state.predicted_cost(backend, &plan) {
                if spent + cost > budget {
                    stopped_by_budget = true;
                    break;
                }
            }
        }
        if plan.forced && !guard_warned {
            guard_warned = true;
            state.warnings.push(RunWarning::RoundGuard { round: state.round });
        }
        let seed = probe_seed(params.seed, plan.config_id, plan.s_tr, plan.s_te);
        let probe = backend
            .probe(plan.config_id, plan.s_tr, plan.s_te, seed)
            .map_err(|source| AbcError::Probe {
                round: state.round + 1,
                config_id: plan.config_id,
                source,
            })?;
        state.apply(plan, probe)?;
    }

    let selected = if stopped_by_budget {
        if state.trace.is_empty() {
            state.warnings.push(RunWarning::BudgetBelowFirstProbe);
        }
        state.anytime_best_guess()
    } else {
        if state.active.len() > 1 {
            state.warnings.push(RunWarning::Stalled {
                active: state.active.iter().copied().collect(),
            });
        }
        if let Some(&survivor) = state.active.iter().next() {
            if state.active.len() == 1 && survivor != state.incumbent {
                state.warnings.push(RunWarning::SurvivorNotIncumbent {
                    survivor,
                    incumbent: state.incumbent,
                });
            }
        }
        state.incumbent
    };
    state.trace.final_selection = selected;
    Ok(AbcRun {
        selected,
        trace: state.trace.clone(),
        warnings: state.warnings.clone(),
        stopped_by_budget,
        state,
    })
}

/// A replayed round that disagrees with the recorded one.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayMismatch {
    pub round: usize,
    pub reason: String,
}

/// Re-applies the recorded probe outcomes of `trace` through the update code
/// and checks that every decision (probe choice, sizes, bounds, incumbent,
/// prunes, snapshots, flags) matches what was recorded.
pub fn replay(
    trace: &RunTrace,
    params: &RunParams,
    scheduler: SchedulerKind,
) -> Result<std::result::Result<EngineState, ReplayMismatch>> {
    let labels = (1..=params.n_configs).map(|id| format!("config-{id}")).collect();
    let mut state = EngineState::new(params.clone(), labels, trace.method.clone())?;
    for recorded in &trace.rounds {
        let mismatch = |reason: String| ReplayMismatch {
            round: recorded.round,
            reason,
        };
        let Some(plan) = state.plan(scheduler)? else {
            return Ok(Err(mismatch("the run should already have terminated".into())));
        };
        if (plan.config_id, plan.s_tr, plan.s_te) != (recorded.config_id, recorded.s_tr, recorded.s_te) {
            return Ok(Err(mismatch(format!(
                "expected probe of configuration {} at ({}, {}), trace has {} at ({}, {})",
                plan.config_id, plan.s_tr, plan.s_te, recorded.config_id, recorded.s_tr, recorded.s_te
            ))));
        }
        let probe = Probe {
            outcome: recorded.outcome(),
            degenerate_sample: recorded.flags.contains(&TraceFlag::DegenerateSample),
        };
        let replayed = match state.apply(plan, probe) {
            Ok(r) => r,
            Err(e) => return Ok(Err(mismatch(e.to_string()))),
        };
        if replayed != recorded {
            return Ok(Err(mismatch(describe_difference(replayed, recorded))));
        }
    }
    Ok(Ok(state))
}

fn describe_difference(replayed: &RoundRecord, recorded: &RoundRecord) -> String {
    if replayed.lower != recorded.lower || replayed.upper != recorded.upper {
        format!(
            "interval [{}, {}] recomputes to [{}, {}]",
            recorded.lower, recorded.upper, replayed.lower, replayed.upper
        )
    } else if replayed.incumbent != recorded.incumbent {
        format!("incumbent {} recomputes to {}", recorded.incumbent, replayed.incumbent)
    } else if replayed.pruned != recorded.pruned {
        format!("pruned {:?} recomputes to {:?}", recorded.pruned, replayed.pruned)
    } else if replayed.snapshot != recorded.snapshot {
        format!("snapshot {} recomputes to {}", recorded.snapshot, replayed.snapshot)
    } else {
        format!("flags {:?} recompute to {:?}", recorded.flags, replayed.flags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probes::{CurveSpec, SyntheticInstance};

    fn two_configs() -> SyntheticInstance {
        SyntheticInstance::new(
            "two",
            1_024_000,
            500_000,
            vec![
                CurveSpec::new(0.70, 0.1, 0.5, 0.1, 0.5),
                CurveSpec::new(0.90, 0.1, 0.5, 0.1, 0.5),
            ],
        )
    }

    #[test]
    fn single_configuration_needs_no_probe() {
        let inst = SyntheticInstance::new("one", 10_000, 5_000, vec![CurveSpec::new(0.8, 0.1, 0.5, 0.1, 0.5)]);
        let run = run_abc(&inst, &params_for(&inst), SchedulerKind::GradientCi).unwrap();
        assert_eq!(run.selected, 1);
        assert!(run.trace.is_empty());
    }

    #[test]
    fn separated_pair_picks_the_better() {
        let inst = two_configs();
        for scheduler in SchedulerKind::ALL {
            let run = run_abc(&inst, &params_for(&inst).with_seed(3), scheduler).unwrap();
            assert_eq!(run.selected, 2, "{scheduler}");
            assert_eq!(run.trace.pruned_ids().count(), 1);
            assert!(run.warnings.is_empty(), "{:?}", run.warnings);
        }
    }

    #[test]
    fn vacuous_tolerance_stops_after_first_probe() {
        let inst = two_configs();
        let params = params_for(&inst).with_epsilon(1.0);
        let run = run_abc(&inst, &params, SchedulerKind::GradientCi).unwrap();
        assert_eq!(run.trace.len(), 1);
        assert_eq!(run.selected, 1);
        assert_eq!(run.trace.rounds[0].pruned, vec![1, 2]);
        assert!(run.trace.rounds[0].flags.contains(&TraceFlag::IncumbentPruned));
    }

    #[test]
    fn warm_up_probes_every_configuration_twice_in_id_order() {
        let inst = SyntheticInstance::new(
            "three",
            1_024_000,
            500_000,
            vec![
                CurveSpec::new(0.80, 0.1, 0.5, 0.1, 0.5),
                CurveSpec::new(0.81, 0.1, 0.5, 0.1, 0.5),
                CurveSpec::new(0.82, 0.1, 0.5, 0.1, 0.5),
            ],
        );
        let run = run_abc(&inst, &params_for(&inst), SchedulerKind::Ucb).unwrap();
        let head: Vec<(usize, u64, u64)> = run.trace.rounds[..6]
            .iter()
            .map(|r| (r.config_id, r.s_tr, r.s_te))
            .collect();
        assert_eq!(
            head,
            vec![
                (1, 1000, 2000),
                (2, 1000, 2000),
                (3, 1000, 2000),
                (1, 2000, 4000),
                (2, 2000, 4000),
                (3, 2000, 4000)
            ]
        );
    }

    #[test]
    fn budget_semantics() {
        let inst = two_configs();
        let params = params_for(&inst);
        let tiny = select_with_budget(&inst, &params, SchedulerKind::GradientCi, 10.0).unwrap();
        assert_eq!(tiny.selected, 1);
        assert!(tiny.trace.is_empty());
        assert_eq!(tiny.warnings, vec![RunWarning::BudgetBelowFirstProbe]);

        let free = run_abc(&inst, &params, SchedulerKind::GradientCi).unwrap();
        let inf = select_with_budget(&inst, &params, SchedulerKind::GradientCi, f64::INFINITY).unwrap();
        assert_eq!(inf.selected, free.selected);
        assert_eq!(inf.trace, free.trace);

        let capped = select_with_budget(&inst, &params, SchedulerKind::GradientCi, 1500.0).unwrap();
        assert!(capped.stopped_by_budget);
        assert_eq!(capped.trace.len(), 1);
        assert_eq!(capped.selected, 1);
        assert!(select_with_budget(&inst, &params, SchedulerKind::GradientCi, 0.0).is_err());
    }

    #[test]
    fn params_must_match_backend() {
        let inst = two_configs();
        let params = RunParams::new(3, inst.train_size, inst.test_size);
        assert!(run_abc(&inst, &params, SchedulerKind::Ucb).is_err());
    }

    fn state_with(cis: &[(f64, f64)], incumbent: usize, active: &[usize]) -> EngineState {
        let params = RunParams::new(cis.len(), 10_000, 10_000);
        let labels = (1..=cis.len()).map(|i| i.to_string()).collect();
        let mut state = EngineState::new(params, labels, "abc").unwrap();
        for (i, &(lower, upper)) in cis.iter().enumerate() {
            state.configs[i].ci = ConfidenceInterval { lower, upper };
        }
        state.incumbent = incumbent;
        state.active = active.iter().copied().collect();
        state.trace.push(RoundRecord {
            round: 1,
            config_id: 1,
            s_tr: 1,
            s_te: 1,
            acc_train: 0.0,
            acc_test: 0.0,
            cost: 0.0,
            lower: 0.0,
            upper: 1.0,
            incumbent,
            pruned: vec![],
            snapshot: false,
            flags: vec![],
        });
        state
    }

    #[test]
    fn anytime_guess_prefers_smaller_gap() {
        // incumbent 1: l=0.80, others' max u = 0.84 -> gap 0.04
        // top-upper 2: l=0.78, others' max u = 0.83 -> gap 0.05
        let s = state_with(&[(0.80, 0.83), (0.78, 0.84), (0.5, 0.6)], 1, &[1, 2, 3]);
        assert_eq!(s.anytime_best_guess(), 1);
        let s = state_with(&[(0.80, 0.81), (0.79, 0.95), (0.5, 0.6)], 1, &[1, 2, 3]);
        assert_eq!(s.anytime_best_guess(), 2);
        // equal gaps (0.25) go to the incumbent
        let s = state_with(&[(0.5, 0.625), (0.375, 0.75)], 1, &[1, 2]);
        assert_eq!(s.anytime_best_guess(), 1);
        let s = state_with(&[(0.7, 0.8)], 1, &[1]);
        assert_eq!(s.anytime_best_guess(), 1);
    }

    #[test]
    fn replay_reproduces_and_detects_tampering() {
        let inst = crate::probes::families::wide_spread(6, 2);
        let params = params_for(&inst).with_seed(9);
        let run = run_abc(&inst, &params, SchedulerKind::GradientCi).unwrap();
        let state = replay(&run.trace, &params, SchedulerKind::GradientCi).unwrap().unwrap();
        assert_eq!(state.incumbent, run.selected);

        let mut tampered = run.trace.clone();
        tampered.rounds[3].upper -= 1e-3;
        let err = replay(&tampered, &params, SchedulerKind::GradientCi)
            .unwrap()
            .unwrap_err();
        assert_eq!(err.round, 4);
    }
}
