//! Probe backends: a synthetic learning-curve simulator with known ground
//! truth and lightweight learners trained on CSV data.

pub mod dataset;
pub mod families;
pub mod learners;
pub mod synthetic;

use crate::error::ProbeError;
use crate::seed::derive_seed;
use crate::types::ProbeOutcome;

pub use dataset::{DatasetHandle, Part};
pub use learners::{CostModel, LearnerBackend, LearnerConfig, LearnerSpec};
pub use synthetic::{CurveSpec, NamedCurve, Plateau, SyntheticInstance};

/// One probe as reported by a backend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub outcome: ProbeOutcome,
    /// The training sample held a single class and a constant model was used.
    pub degenerate_sample: bool,
}

impl From<ProbeOutcome> for Probe {
    fn from(outcome: ProbeOutcome) -> Self {
        Probe {
            outcome,
            degenerate_sample: false,
        }
    }
}

/// Training on all training data and testing on all test data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullEvaluation {
    pub accuracy: f64,
    pub cost: f64,
}

/// Anything that can train configuration `id` (1-based) on `s_tr` training
/// samples and evaluate it on the training sample and on `s_te` test samples.
///
/// Implementations must be pure functions of their arguments so that
/// independent runs can execute concurrently and traces replay exactly.
pub trait ProbeBackend {
    fn n_configs(&self) -> usize;

    fn label(&self, id: usize) -> String;

    /// `|D_tr|`.
    fn train_size(&self) -> u64;

    /// `|D_te|`.
    fn test_size(&self) -> u64;

    fn probe(&self, id: usize, s_tr: u64, s_te: u64, seed: u64) -> Result<Probe, ProbeError>;

    /// The real test accuracy `A(H_tr, D_te)` together with its cost.
    fn full_evaluate(&self, id: usize) -> Result<FullEvaluation, ProbeError>;

    /// Cost of a probe known in advance, if the backend has a cost model.
    fn predicted_cost(&self, _id: usize, _s_tr: u64, _s_te: u64) -> Option<f64> {
        None
    }

    /// Ground-truth real test accuracy, when known without training.
    fn true_accuracy(&self, _id: usize) -> Option<f64> {
        None
    }

    /// Exponent of the backend's cost model in the sample size, if it has one.
    fn cost_exponent(&self) -> Option<f64> {
        None
    }
}

/// Seed used for the probe of configuration `id` at the given sizes.
///
/// Keyed by sizes rather than by round so that two methods probing the same
/// configuration at the same sizes under the same run seed observe the same
/// outcome.
pub fn probe_seed(run_seed: u64, id: usize, s_tr: u64, s_te: u64) -> u64 {
    derive_seed(run_seed, &[id as u64, s_tr, s_te])
}

pub(crate) fn check_id(id: usize, n: usize) -> Result<usize, ProbeError> {
    if id == 0 || id > n {
        Err(ProbeError::UnknownConfig(id))
    } else {
        Ok(id - 1)
    }
}
