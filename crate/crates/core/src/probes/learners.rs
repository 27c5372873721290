//! Lightweight binary classifiers trained on nested samples of a [`DatasetHandle`].

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetHandle, Part};
use super::{check_id, FullEvaluation, Probe, ProbeBackend};
use crate::error::ProbeError;
use crate::seed::{derive_seed, rng_from};
use crate::types::ProbeOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    LogisticRegressionSgd {
        learning_rate: f64,
        epochs: u32,
        #[serde(default)]
        l2: f64,
    },
    DecisionStump {},
    MajorityClass {},
}

impl LearnerSpec {
    pub fn validate(&self) -> Result<(), ProbeError> {
        if let LearnerSpec::LogisticRegressionSgd {
            learning_rate,
            epochs,
            l2,
        } = *self
        {
            if !(learning_rate > 0.0) || !learning_rate.is_finite() {
                return Err(ProbeError::InvalidLearner(format!(
                    "learning_rate {learning_rate} must be > 0"
                )));
            }
            if epochs == 0 {
                return Err(ProbeError::InvalidLearner("epochs must be >= 1".into()));
            }
            if !(l2 >= 0.0) || !l2.is_finite() {
                return Err(ProbeError::InvalidLearner(format!("l2 {l2} must be >= 0")));
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match self {
            LearnerSpec::LogisticRegressionSgd {
                learning_rate,
                epochs,
                l2,
            } => format!("logreg(lr={learning_rate}, epochs={epochs}, l2={l2})"),
            LearnerSpec::DecisionStump {} => "stump".into(),
            LearnerSpec::MajorityClass {} => "majority".into(),
        }
    }
}

/// Replaces measured wall time with `kappa * s_tr^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub kappa: f64,
    pub alpha: f64,
}

impl CostModel {
    pub fn cost(&self, s_tr: u64) -> f64 {
        self.kappa * (s_tr as f64).powf(self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    #[serde(default)]
    pub label: Option<String>,
    pub learner: LearnerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_model: Option<CostModel>,
}

impl LearnerConfig {
    pub fn new(learner: LearnerSpec) -> Self {
        Self {
            label: None,
            learner,
            cost_model: None,
        }
    }

    pub fn display_label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.learner.describe())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Constant(u8),
    Stump {
        feature: usize,
        threshold: f64,
        /// Predict 1 above the threshold (otherwise below).
        positive_above: bool,
    },
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
}

impl TrainedModel {
    pub fn predict(&self, x: &[f64]) -> u8 {
        match self {
            TrainedModel::Constant(c) => *c,
            TrainedModel::Stump {
                feature,
                threshold,
                positive_above,
            } => ((x[*feature] > *threshold) == *positive_above) as u8,
            TrainedModel::Linear { weights, bias } => {
                let z: f64 = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias;
                (z >= 0.0) as u8
            }
        }
    }

    pub fn accuracy(&self, data: &DatasetHandle, rows: &[usize]) -> f64 {
        if rows.is_empty() {
            return 0.0;
        }
        let correct = rows
            .iter()
            .filter(|&&r| self.predict(data.row(r)) == data.label(r))
            .count();
        correct as f64 / rows.len() as f64
    }
}

/// Trains `spec` on the given rows. Returns the model and whether the sample
/// held a single class (in which case the model is that constant).
pub fn train(spec: &LearnerSpec, data: &DatasetHandle, rows: &[usize], seed: u64) -> (TrainedModel, bool) {
    let ones = rows.iter().filter(|&&r| data.label(r) == 1).count();
    if ones == 0 || ones == rows.len() {
        return (TrainedModel::Constant((ones > 0) as u8), true);
    }
    let model = match *spec {
        LearnerSpec::MajorityClass {} => TrainedModel::Constant((2 * ones > rows.len()) as u8),
        LearnerSpec::DecisionStump {} => train_stump(data, rows),
        LearnerSpec::LogisticRegressionSgd {
            learning_rate,
            epochs,
            l2,
        } => train_logistic(data, rows, learning_rate, epochs, l2, seed),
    };
    (model, false)
}

fn train_stump(data: &DatasetHandle, rows: &[usize]) -> TrainedModel {
    let total_ones = rows.iter().filter(|&&r| data.label(r) == 1).count();
    let n = rows.len();
    // Start from the best constant rule, expressed as a threshold below every value.
    let mut best_correct = total_ones.max(n - total_ones);
    let mut best = TrainedModel::Stump {
        feature: 0,
        threshold: f64::NEG_INFINITY,
        positive_above: total_ones * 2 >= n,
    };
    let mut column: Vec<(f64, u8)> = Vec::with_capacity(n);
    for feature in 0..data.cols() {
        column.clear();
        column.extend(rows.iter().map(|&r| (data.row(r)[feature], data.label(r))));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut ones_below = 0usize;
        for i in 0..n - 1 {
            ones_below += column[i].1 as usize;
            if column[i].0 == column[i + 1].0 {
                continue;
            }
            let below = i + 1;
            let zeros_below = below - ones_below;
            let ones_above = total_ones - ones_below;
            let zeros_above = (n - below) - ones_above;
            let up = zeros_below + ones_above;
            let down = ones_below + zeros_above;
            let (correct, positive_above) = if up >= down { (up, true) } else { (down, false) };
            if correct > best_correct {
                best_correct = correct;
                best = TrainedModel::Stump {
                    feature,
                    threshold: 0.5 * (column[i].0 + column[i + 1].0),
                    positive_above,
                };
            }
        }
    }
    best
}

fn train_logistic(
    data: &DatasetHandle,
    rows: &[usize],
    learning_rate: f64,
    epochs: u32,
    l2: f64,
    seed: u64,
) -> TrainedModel {
    let mut weights = vec![0.0; data.cols()];
    let mut bias = 0.0;
    let mut order = rows.to_vec();
    let mut rng = rng_from(seed);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &r in &order {
            let x = data.row(r);
            let z: f64 = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias;
            let p = 1.0 / (1.0 + (-z).exp());
            let err = p - data.label(r) as f64;
            for (w, v) in weights.iter_mut().zip(x) {
                *w -= learning_rate * (err * v + l2 * *w);
            }
            bias -= learning_rate * err;
        }
    }
    TrainedModel::Linear { weights, bias }
}

/// One probe of `spec`: train on the first `s_tr` training rows, evaluate on
/// those rows and on the first `s_te` test rows. Cost is wall time in seconds.
pub fn probe_learner(
    data: &DatasetHandle,
    spec: &LearnerSpec,
    s_tr: u64,
    s_te: u64,
    seed: u64,
) -> Result<Probe, ProbeError> {
    spec.validate()?;
    let start = Instant::now();
    let train_rows = data.sample_nested(Part::Train, s_tr as usize)?;
    let test_rows = data.sample_nested(Part::Test, s_te as usize)?;
    if train_rows.is_empty() || test_rows.is_empty() {
        return Err(ProbeError::Data("sample sizes must be >= 1".into()));
    }
    let (model, degenerate) = train(spec, data, train_rows, seed);
    let train_accuracy = model.accuracy(data, train_rows);
    let test_accuracy = model.accuracy(data, test_rows);
    Ok(Probe {
        outcome: ProbeOutcome {
            train_sample_size: s_tr,
            test_sample_size: s_te,
            train_accuracy,
            test_accuracy,
            cost: start.elapsed().as_secs_f64(),
        },
        degenerate_sample: degenerate,
    })
}

/// Learner configurations over one shared dataset.
///
/// The training seed of configuration `id` is derived from the backend seed
/// and `id` only, so a probe at full sizes reproduces [`ProbeBackend::full_evaluate`].
#[derive(Debug, Clone)]
pub struct LearnerBackend {
    pub data: Arc<DatasetHandle>,
    pub learners: Vec<LearnerConfig>,
    pub seed: u64,
}

impl LearnerBackend {
    pub fn new(data: Arc<DatasetHandle>, learners: Vec<LearnerConfig>, seed: u64) -> Result<Self, ProbeError> {
        if learners.is_empty() {
            return Err(ProbeError::InvalidLearner("no learner configurations".into()));
        }
        for (i, l) in learners.iter().enumerate() {
            l.learner
                .validate()
                .map_err(|e| ProbeError::InvalidLearner(format!("configuration {}: {e}", i + 1)))?;
        }
        Ok(Self { data, learners, seed })
    }

    fn config(&self, id: usize) -> Result<&LearnerConfig, ProbeError> {
        Ok(&self.learners[check_id(id, self.learners.len())?])
    }

    fn training_seed(&self, id: usize) -> u64 {
        derive_seed(self.seed, &[id as u64])
    }
}

impl ProbeBackend for LearnerBackend {
    fn n_configs(&self) -> usize {
        self.learners.len()
    }

    fn label(&self, id: usize) -> String {
        self.config(id)
            .map(|c| c.display_label())
            .unwrap_or_else(|_| format!("config-{id}"))
    }

    fn train_size(&self) -> u64 {
        self.data.part_size(Part::Train) as u64
    }

    fn test_size(&self) -> u64 {
        self.data.part_size(Part::Test) as u64
    }

    /// The probe seed is unused: samples are fixed nested prefixes and the
    /// training seed depends on the configuration only.
    fn probe(&self, id: usize, s_tr: u64, s_te: u64, _seed: u64) -> Result<Probe, ProbeError> {
        let config = self.config(id)?;
        let mut probe = probe_learner(&self.data, &config.learner, s_tr, s_te, self.training_seed(id))?;
        if let Some(model) = config.cost_model {
            probe.outcome.cost = model.cost(s_tr);
        }
        Ok(probe)
    }

    fn full_evaluate(&self, id: usize) -> Result<FullEvaluation, ProbeError> {
        let probe = self.probe(id, self.train_size(), self.test_size(), 0)?;
        Ok(FullEvaluation {
            accuracy: probe.outcome.test_accuracy,
            cost: probe.outcome.cost,
        })
    }

    fn predicted_cost(&self, id: usize, s_tr: u64, _s_te: u64) -> Option<f64> {
        self.config(id).ok()?.cost_model.map(|m| m.cost(s_tr))
    }

    fn cost_exponent(&self) -> Option<f64> {
        let first = self.learners.first()?.cost_model?.alpha;
        self.learners
            .iter()
            .all(|l| l.cost_model.is_some_and(|m| m.alpha == first))
            .then_some(first)
    }
}
