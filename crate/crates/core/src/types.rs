//! Domain types shared by the engine, the schedulers, the baselines and the
//! experiment harness.

use serde::{Deserialize, Serialize};

use crate::error::{AbcError, Result};

/// Default initial training sample size.
pub const DEFAULT_INITIAL_TRAIN: u64 = 1000;
/// Default initial test sample size.
pub const DEFAULT_INITIAL_TEST: u64 = 2000;
/// Default accuracy-loss tolerance.
pub const DEFAULT_EPSILON: f64 = 0.01;
/// Default failure probability.
pub const DEFAULT_DELTA: f64 = 0.5;
/// Default geometric step factor (linear cost, `c = 2^(1/1)`).
pub const DEFAULT_STEP_FACTOR: f64 = 2.0;

/// Parameters of one selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub epsilon: f64,
    pub delta: f64,
    pub n_configs: usize,
    pub initial_train_size: u64,
    pub initial_test_size: u64,
    pub step_factor: f64,
    pub alpha: f64,
    pub max_train_size: u64,
    pub max_test_size: u64,
    pub seed: u64,
}

impl RunParams {
    /// Parameters with the standard defaults for a dataset of the given shape.
    pub fn new(n_configs: usize, max_train_size: u64, max_test_size: u64) -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            delta: DEFAULT_DELTA,
            n_configs,
            initial_train_size: DEFAULT_INITIAL_TRAIN.min(max_train_size),
            initial_test_size: DEFAULT_INITIAL_TEST.min(max_test_size),
            step_factor: DEFAULT_STEP_FACTOR,
            alpha: 1.0,
            max_train_size,
            max_test_size,
            seed: 0,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_initial_sizes(mut self, train: u64, test: u64) -> Self {
        self.initial_train_size = train;
        self.initial_test_size = test;
        self
    }

    /// Sets the cost exponent and the matching optimal step factor `2^(1/alpha)`.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self.step_factor = 2f64.powf(1.0 / alpha);
        self
    }

    pub fn with_step_factor(mut self, c: f64) -> Self {
        self.step_factor = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(AbcError::param("epsilon", format!("{} not in [0, 1]", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(AbcError::param("delta", format!("{} not in (0, 1)", self.delta)));
        }
        if self.n_configs == 0 {
            return Err(AbcError::param("n_configs", "must be at least 1"));
        }
        if self.initial_train_size == 0 || self.initial_train_size > self.max_train_size {
            return Err(AbcError::param(
                "initial_train_size",
                format!(
                    "{} must be in [1, max_train_size = {}]",
                    self.initial_train_size, self.max_train_size
                ),
            ));
        }
        if self.initial_test_size == 0 || self.initial_test_size > self.max_test_size {
            return Err(AbcError::param(
                "initial_test_size",
                format!(
                    "{} must be in [1, max_test_size = {}]",
                    self.initial_test_size, self.max_test_size
                ),
            ));
        }
        if !(self.step_factor > 1.0) || !self.step_factor.is_finite() {
            return Err(AbcError::param(
                "step_factor",
                format!("{} must be > 1", self.step_factor),
            ));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(AbcError::param("alpha", format!("{} must be > 0", self.alpha)));
        }
        Ok(())
    }
}

/// A closed interval `[lower, upper]` inside `[0, 1]` bounding a real test accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
}

impl ConfidenceInterval {
    /// The vacuous interval `[0, 1]` every configuration starts with.
    pub const FULL: ConfidenceInterval = ConfidenceInterval { lower: 0.0, upper: 1.0 };

    pub fn point(value: f64) -> Self {
        clamp_interval(value, value)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn is_subset_of(&self, other: &ConfidenceInterval) -> bool {
        self.lower >= other.lower && self.upper <= other.upper
    }
}

impl Default for ConfidenceInterval {
    fn default() -> Self {
        Self::FULL
    }
}

/// Clamps raw bounds into `[0, 1]`.
///
/// When clamping leaves `lower > upper` the result collapses to the midpoint
/// of the raw bounds, itself clipped to `[0, 1]`.
pub fn clamp_interval(raw_lower: f64, raw_upper: f64) -> ConfidenceInterval {
    let lower = raw_lower.max(0.0);
    let upper = raw_upper.min(1.0);
    if lower <= upper {
        ConfidenceInterval { lower, upper }
    } else {
        let mid = (0.5 * (raw_lower + raw_upper)).clamp(0.0, 1.0);
        ConfidenceInterval { lower: mid, upper: mid }
    }
}

/// Result of training one configuration on `train_sample_size` samples and
/// evaluating it on the training sample and on `test_sample_size` test samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub train_sample_size: u64,
    pub test_sample_size: u64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub cost: f64,
}

impl ProbeOutcome {
    pub fn validate(&self) -> Result<()> {
        if self.train_sample_size == 0 || self.test_sample_size == 0 {
            return Err(AbcError::InvalidInput("probe sample sizes must be >= 1".into()));
        }
        for (name, acc) in [("train", self.train_accuracy), ("test", self.test_accuracy)] {
            if !(0.0..=1.0).contains(&acc) {
                return Err(AbcError::InvalidInput(format!("{name} accuracy {acc} outside [0, 1]")));
            }
        }
        if !(self.cost >= 0.0) {
            return Err(AbcError::InvalidInput(format!("negative probe cost {}", self.cost)));
        }
        Ok(())
    }
}

/// Mutable per-configuration state owned by the engine's control loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationState {
    /// 1-based index in input order.
    pub id: usize,
    pub label: String,
    /// Training sample size of the latest probe (0 before the first probe).
    pub current_sample_size: u64,
    /// Test sample size of the latest probe (0 before the first probe).
    pub current_test_size: u64,
    pub ci: ConfidenceInterval,
    /// Interval cached at the most recent snapshot.
    pub cached_ci: ConfidenceInterval,
    pub history: Vec<ProbeOutcome>,
    /// Post-update interval after each probe, parallel to `history`.
    pub ci_history: Vec<ConfidenceInterval>,
    pub total_cost: f64,
    pub active: bool,
}

impl ConfigurationState {
    pub fn new(id: usize, label: impl Into<String>) -> Self {
        Self {
            id,
            label: label.into(),
            current_sample_size: 0,
            current_test_size: 0,
            ci: ConfidenceInterval::FULL,
            cached_ci: ConfidenceInterval::FULL,
            history: Vec::new(),
            ci_history: Vec::new(),
            total_cost: 0.0,
            active: true,
        }
    }

    pub fn probes(&self) -> usize {
        self.history.len()
    }

    pub fn last_probe(&self) -> Option<&ProbeOutcome> {
        self.history.last()
    }

    /// Appends a probe and its post-update interval.
    pub fn record_probe(&mut self, outcome: ProbeOutcome, ci: ConfidenceInterval) {
        self.current_sample_size = outcome.train_sample_size;
        self.current_test_size = outcome.test_sample_size;
        self.total_cost += outcome.cost;
        self.history.push(outcome);
        self.ci_history.push(ci);
        self.ci = ci;
    }

    /// Refreshes the snapshot cache with the current interval.
    pub fn snapshot(&mut self) {
        self.cached_ci = self.ci;
    }
}

/// Notable events attached to a trace round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFlag {
    /// Fresh bounds were disjoint from the cached snapshot interval.
    EmptyIntersection,
    /// The probe used all training and test data; the interval is a point.
    FullData,
    /// The incumbent was removed from the active set by its own narrow interval.
    IncumbentPruned,
    /// The backend saw a single-class training sample and fell back to a constant model.
    DegenerateSample,
    /// Forced full-data evaluation after the round limit was hit.
    RoundGuard,
}

/// One round of a selection run.
///
/// Serialized as one JSON object per line with a fixed key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub config_id: usize,
    pub s_tr: u64,
    pub s_te: u64,
    pub acc_train: f64,
    pub acc_test: f64,
    pub cost: f64,
    pub lower: f64,
    pub upper: f64,
    pub incumbent: usize,
    pub pruned: Vec<usize>,
    pub snapshot: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<TraceFlag>,
}

impl RoundRecord {
    pub fn outcome(&self) -> ProbeOutcome {
        ProbeOutcome {
            train_sample_size: self.s_tr,
            test_sample_size: self.s_te,
            train_accuracy: self.acc_train,
            test_accuracy: self.acc_test,
            cost: self.cost,
        }
    }

    pub fn interval(&self) -> ConfidenceInterval {
        ConfidenceInterval {
            lower: self.lower,
            upper: self.upper,
        }
    }
}

/// Append-only record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub method: String,
    pub rounds: Vec<RoundRecord>,
    pub final_selection: usize,
    pub wall_cost_total: f64,
}

impl RunTrace {
    pub fn new(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            rounds: Vec::new(),
            final_selection: 1,
            wall_cost_total: 0.0,
        }
    }

    pub fn push(&mut self, record: RoundRecord) {
        self.wall_cost_total += record.cost;
        self.rounds.push(record);
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// Number of rounds in which at least one configuration was pruned.
    pub fn snapshots(&self) -> usize {
        self.rounds.iter().filter(|r| r.snapshot).count()
    }

    pub fn pruned_ids(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rounds
            .iter()
            .flat_map(|r| r.pruned.iter().map(move |&id| (r.round, id)))
    }

    /// Writes the rounds as JSON Lines.
    pub fn write_jsonl<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        for record in &self.rounds {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n").map_err(|e| AbcError::io("<trace writer>", e))?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits utf-8")
    }

    /// Parses JSON Lines produced by [`RunTrace::write_jsonl`]. Blank lines are skipped.
    pub fn from_jsonl(method: impl Into<String>, text: &str) -> Result<Self> {
        let mut trace = RunTrace::new(method);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: RoundRecord = serde_json::from_str(line).map_err(|e| AbcError::Trace {
                line: i + 1,
                reason: e.to_string(),
            })?;
            trace.push(record);
        }
        if let Some(last) = trace.rounds.last() {
            trace.final_selection = last.incumbent;
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_at_zero() {
        assert_eq!(clamp_interval(-0.2, 0.9), ConfidenceInterval { lower: 0.0, upper: 0.9 });
    }

    #[test]
    fn clamp_at_one() {
        assert_eq!(clamp_interval(0.3, 1.4), ConfidenceInterval { lower: 0.3, upper: 1.0 });
    }

    #[test]
    fn clamp_identity_point() {
        assert_eq!(clamp_interval(0.5, 0.5), ConfidenceInterval { lower: 0.5, upper: 0.5 });
    }

    #[test]
    fn clamp_inverted_collapses_to_midpoint() {
        let ci = clamp_interval(1.3, 1.1);
        assert_eq!(ci, ConfidenceInterval { lower: 1.0, upper: 1.0 });
        let ci = clamp_interval(0.6, 0.4);
        assert_eq!(ci, ConfidenceInterval { lower: 0.5, upper: 0.5 });
    }

    #[test]
    fn params_validation() {
        let ok = RunParams::new(3, 10_000, 5_000);
        ok.validate().unwrap();
        assert!(ok.clone().with_epsilon(1.5).validate().is_err());
        assert!(ok.clone().with_delta(0.0).validate().is_err());
        assert!(ok.clone().with_delta(1.0).validate().is_err());
        assert!(ok.clone().with_step_factor(1.0).validate().is_err());
        assert!(ok.clone().with_initial_sizes(20_000, 10).validate().is_err());
        let mut zero = ok.clone();
        zero.n_configs = 0;
        assert!(zero.validate().is_err());
    }

    #[test]
    fn alpha_sets_step_factor() {
        let p = RunParams::new(2, 100, 100).with_alpha(2.0);
        assert!((p.step_factor - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn jsonl_key_order_is_fixed() {
        let mut trace = RunTrace::new("abc");
        trace.push(RoundRecord {
            round: 1,
            config_id: 2,
            s_tr: 1000,
            s_te: 2000,
            acc_train: 0.9,
            acc_test: 0.8,
            cost: 1.5,
            lower: 0.7,
            upper: 0.95,
            incumbent: 2,
            pruned: vec![1],
            snapshot: true,
            flags: vec![],
        });
        let line = trace.to_jsonl();
        assert_eq!(
            line.trim_end(),
            r#"{"round":1,"config_id":2,"s_tr":1000,"s_te":2000,"acc_train":0.9,"acc_test":0.8,"cost":1.5,"lower":0.7,"upper":0.95,"incumbent":2,"pruned":[1],"snapshot":true}"#
        );
        let back = RunTrace::from_jsonl("abc", &line).unwrap();
        assert_eq!(back.rounds, trace.rounds);
    }

    #[test]
    fn malformed_trace_line_is_reported() {
        let err = RunTrace::from_jsonl("abc", "\n{\"round\": 1}\n").unwrap_err();
        assert!(matches!(err, AbcError::Trace { line: 2, .. }));
    }
}
