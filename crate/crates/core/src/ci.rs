//! Confidence bounds on a configuration's real test accuracy.
//!
//! The upper bound relies on the fitness condition: a hypothesis fits the data
//! it was trained on at least as well as a hypothesis trained elsewhere. The
//! lower bound relies on exploitativeness: training on all the training data
//! is no worse on the test set than training on a sample. Each side fails with
//! probability at most `delta / (2 n^2)`.

use crate::error::{AbcError, Result};
use crate::types::{clamp_interval, ConfidenceInterval, ConfigurationState, ProbeOutcome};

/// Inputs to the bound formulas for one probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub outcome: ProbeOutcome,
    pub n_configs: usize,
    pub delta: f64,
    pub full_test_size: u64,
}

impl BoundInputs {
    pub fn new(outcome: ProbeOutcome, n_configs: usize, delta: f64, full_test_size: u64) -> Self {
        Self {
            outcome,
            n_configs,
            delta,
            full_test_size,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_configs == 0 {
            return Err(AbcError::InvalidInput("n_configs must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(AbcError::InvalidInput(format!("delta {} not in (0, 1)", self.delta)));
        }
        if self.full_test_size < self.outcome.test_sample_size {
            return Err(AbcError::InvalidInput(format!(
                "test sample size {} exceeds full test size {}",
                self.outcome.test_sample_size, self.full_test_size
            )));
        }
        Ok(())
    }

    fn n_squared(&self) -> f64 {
        let n = self.n_configs as f64;
        n * n
    }
}

/// Hoeffding deviation `sqrt(ln(k / delta') / (2 m))`.
fn deviation(log_term: f64, m: u64) -> f64 {
    (log_term / (2.0 * m as f64)).sqrt()
}

/// Unclamped upper bound:
/// `A(H_S, S_tr) + sqrt(ln(4n²/δ) / 2|S_tr|) + sqrt(ln(4n²/δ) / 2|D_te|)`.
pub fn upper_bound(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    if inp.outcome.train_sample_size == 0 {
        return Err(AbcError::InvalidInput("training sample size is zero".into()));
    }
    let log_term = (4.0 * inp.n_squared() / inp.delta).ln();
    Ok(inp.outcome.train_accuracy
        + deviation(log_term, inp.outcome.train_sample_size)
        + deviation(log_term, inp.full_test_size))
}

/// Unclamped lower bound: `A(H_S, S_te) - sqrt(ln(2n²/δ) / 2|S_te|)`.
pub fn lower_bound(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    if inp.outcome.test_sample_size == 0 {
        return Err(AbcError::InvalidInput("test sample size is zero".into()));
    }
    let log_term = (2.0 * inp.n_squared() / inp.delta).ln();
    Ok(inp.outcome.test_accuracy - deviation(log_term, inp.outcome.test_sample_size))
}

/// Fresh bounds clamped to `[0, 1]`, before snapshot clamping.
pub fn raw_interval(inp: &BoundInputs) -> Result<ConfidenceInterval> {
    Ok(clamp_interval(lower_bound(inp)?, upper_bound(inp)?))
}

/// Result of intersecting a fresh interval with the cached snapshot interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiEstimate {
    pub ci: ConfidenceInterval,
    /// The fresh interval was disjoint from the cache; `ci` is the nearest
    /// cached endpoint.
    pub empty_intersection: bool,
}

/// Restricts `fresh` to lie inside `cached`.
pub fn nest_within(fresh: ConfidenceInterval, cached: ConfidenceInterval) -> CiEstimate {
    if fresh.upper < cached.lower {
        return CiEstimate {
            ci: ConfidenceInterval::point(cached.lower),
            empty_intersection: true,
        };
    }
    if fresh.lower > cached.upper {
        return CiEstimate {
            ci: ConfidenceInterval::point(cached.upper),
            empty_intersection: true,
        };
    }
    CiEstimate {
        ci: ConfidenceInterval {
            lower: fresh.lower.max(cached.lower),
            upper: fresh.upper.min(cached.upper),
        },
        empty_intersection: false,
    }
}

/// Computes the bounds for the configuration's latest probe and nests them
/// inside its cached snapshot interval.
pub fn estimate_ci(config: &ConfigurationState, inp: &BoundInputs) -> Result<CiEstimate> {
    Ok(nest_within(raw_interval(inp)?, config.cached_ci))
}
