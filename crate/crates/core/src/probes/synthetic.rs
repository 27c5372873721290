//! Learning-curve simulator.
//!
//! Each configuration is a parametric learning curve. The true accuracy of the
//! hypothesis trained on `s` samples is `A(s) = a_inf - b * s^-beta`, held flat
//! over an optional plateau range. Training accuracy adds an overfitting gap
//! `g * s^-gamma`. Measured test accuracy on `s_te` samples is a binomial draw
//! around `A(s)`, which is exactly the distribution of accuracy on a uniform
//! random test sample. Probe cost is `kappa * s^alpha`.
//!
//! The real test accuracy of a configuration is `A(|D_tr|)`; a probe that uses
//! the whole test set measures `A(s)` without noise.

use std::path::Path;

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::{check_id, FullEvaluation, Probe, ProbeBackend};
use crate::error::{AbcError, ProbeError, Result};
use crate::seed::rng_from;
use crate::types::ProbeOutcome;

/// Sample-size range `[start, end]` over which a curve is frozen at `A(start)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub start: u64,
    pub end: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub a_inf: f64,
    pub b: f64,
    pub beta: f64,
    pub overfit_gap: f64,
    pub gamma: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau: Option<Plateau>,
}

fn one() -> f64 {
    1.0
}

impl CurveSpec {
    /// A curve with unit linear cost and no plateau.
    pub fn new(a_inf: f64, b: f64, beta: f64, overfit_gap: f64, gamma: f64) -> Self {
        Self {
            a_inf,
            b,
            beta,
            overfit_gap,
            gamma,
            kappa: 1.0,
            alpha: 1.0,
            plateau: None,
        }
    }

    pub fn with_cost(mut self, kappa: f64, alpha: f64) -> Self {
        self.kappa = kappa;
        self.alpha = alpha;
        self
    }

    pub fn with_plateau(mut self, start: u64, end: u64) -> Self {
        self.plateau = Some(Plateau { start, end });
        self
    }

    /// Checks parameter ranges and that `A(s) >= 0` from `min_size` on.
    pub fn validate(&self, min_size: u64) -> Result<(), ProbeError> {
        let bad = |msg: String| Err(ProbeError::InvalidCurve(msg));
        if !(0.0..=1.0).contains(&self.a_inf) {
            return bad(format!("a_inf {} not in [0, 1]", self.a_inf));
        }
        if !(self.b >= 0.0) {
            return bad(format!("b {} must be >= 0", self.b));
        }
        if !(self.beta > 0.0) || !(self.gamma > 0.0) {
            return bad("beta and gamma must be > 0".into());
        }
        if !(self.overfit_gap >= 0.0) {
            return bad(format!("overfit_gap {} must be >= 0", self.overfit_gap));
        }
        if !(self.kappa > 0.0) || !(self.alpha > 0.0) {
            return bad("kappa and alpha must be > 0".into());
        }
        let min_size = min_size.max(1);
        if self.base_accuracy(min_size) < 0.0 {
            return bad(format!(
                "accuracy {} is negative at sample size {min_size}",
                self.base_accuracy(min_size)
            ));
        }
        if let Some(p) = self.plateau {
            if p.start == 0 || p.start > p.end {
                return bad(format!("plateau [{}, {}] is not a valid range", p.start, p.end));
            }
        }
        Ok(())
    }

    fn base_accuracy(&self, s: u64) -> f64 {
        self.a_inf - self.b * (s.max(1) as f64).powf(-self.beta)
    }

    /// `A(s)`: accuracy on the test distribution of the hypothesis trained on `s` samples.
    pub fn true_accuracy(&self, s: u64) -> f64 {
        let s = match self.plateau {
            Some(p) if s >= p.start && s <= p.end => p.start,
            _ => s,
        };
        self.base_accuracy(s).clamp(0.0, 1.0)
    }

    pub fn train_accuracy(&self, s: u64) -> f64 {
        let gap = self.overfit_gap * (s.max(1) as f64).powf(-self.gamma);
        (self.true_accuracy(s) + gap).clamp(0.0, 1.0)
    }

    pub fn cost(&self, s: u64) -> f64 {
        self.kappa * (s as f64).powf(self.alpha)
    }
}

/// Simulated probe: noiseless training accuracy and cost, binomial test accuracy.
pub fn probe_synthetic(spec: &CurveSpec, s_tr: u64, s_te: u64, seed: u64) -> ProbeOutcome {
    let s_tr = s_tr.max(1);
    let s_te = s_te.max(1);
    let p = spec.true_accuracy(s_tr);
    let correct = Binomial::new(s_te, p)
        .expect("accuracy is clamped to [0, 1]")
        .sample(&mut rng_from(seed));
    ProbeOutcome {
        train_sample_size: s_tr,
        test_sample_size: s_te,
        train_accuracy: spec.train_accuracy(s_tr),
        test_accuracy: correct as f64 / s_te as f64,
        cost: spec.cost(s_tr),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedCurve {
    pub label: String,
    #[serde(flatten)]
    pub curve: CurveSpec,
}

/// A declarative synthetic problem: full data sizes plus one curve per configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticInstance {
    pub name: String,
    pub train_size: u64,
    pub test_size: u64,
    /// Smallest training size the curves must stay valid for.
    #[serde(default = "default_min_size")]
    pub min_train_size: u64,
    pub configs: Vec<NamedCurve>,
}

fn default_min_size() -> u64 {
    1
}

impl SyntheticInstance {
    pub fn new(name: impl Into<String>, train_size: u64, test_size: u64, curves: Vec<CurveSpec>) -> Self {
        Self {
            name: name.into(),
            train_size,
            test_size,
            min_train_size: 1,
            configs: curves
                .into_iter()
                .enumerate()
                .map(|(i, curve)| NamedCurve {
                    label: format!("config-{}", i + 1),
                    curve,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ProbeError> {
        if self.configs.is_empty() {
            return Err(ProbeError::InvalidCurve(format!(
                "instance {} has no configurations",
                self.name
            )));
        }
        if self.train_size == 0 || self.test_size == 0 {
            return Err(ProbeError::InvalidCurve("train_size and test_size must be >= 1".into()));
        }
        for (i, c) in self.configs.iter().enumerate() {
            c.curve
                .validate(self.min_train_size)
                .map_err(|e| ProbeError::InvalidCurve(format!("configuration {} ({}): {e}", i + 1, c.label)))?;
        }
        Ok(())
    }

    pub fn curve(&self, id: usize) -> Result<&CurveSpec, ProbeError> {
        Ok(&self.configs[check_id(id, self.configs.len())?].curve)
    }

    /// Real test accuracy of every configuration, in id order.
    pub fn real_accuracies(&self) -> Vec<f64> {
        self.configs
            .iter()
            .map(|c| c.curve.true_accuracy(self.train_size))
            .collect()
    }

    /// Id of the best configuration (ties to the lowest id).
    pub fn best_id(&self) -> usize {
        argmax(&self.real_accuracies())
    }

    /// The same instance restricted to its first `n` configurations.
    pub fn truncated(&self, n: usize) -> Self {
        let mut out = self.clone();
        out.configs.truncate(n);
        out
    }

    /// Reads an instance from TOML (or JSON for a `.json` extension).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AbcError::io(path, e))?;
        let instance: SyntheticInstance = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| AbcError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| AbcError::Config(format!("{}: {e}", path.display())))?
        };
        instance
            .validate()
            .map_err(|e| AbcError::Config(format!("{}: {e}", path.display())))?;
        Ok(instance)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("instance serializes to toml")
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best + 1
}

impl ProbeBackend for SyntheticInstance {
    fn n_configs(&self) -> usize {
        self.configs.len()
    }

    fn label(&self, id: usize) -> String {
        self.configs
            .get(id.wrapping_sub(1))
            .map(|c| c.label.clone())
            .unwrap_or_else(|| format!("config-{id}"))
    }

    fn train_size(&self) -> u64 {
        self.train_size
    }

    fn test_size(&self) -> u64 {
        self.test_size
    }

    fn probe(&self, id: usize, s_tr: u64, s_te: u64, seed: u64) -> Result<Probe, ProbeError> {
        let curve = self.curve(id)?;
        if s_tr > self.train_size {
            return Err(ProbeError::SampleTooLarge {
                part: "train",
                requested: s_tr,
                available: self.train_size,
            });
        }
        if s_te > self.test_size {
            return Err(ProbeError::SampleTooLarge {
                part: "test",
                requested: s_te,
                available: self.test_size,
            });
        }
        let mut outcome = probe_synthetic(curve, s_tr, s_te, seed);
        if s_te == self.test_size {
            outcome.test_accuracy = curve.true_accuracy(s_tr);
        }
        Ok(outcome.into())
    }

    fn full_evaluate(&self, id: usize) -> Result<FullEvaluation, ProbeError> {
        let curve = self.curve(id)?;
        Ok(FullEvaluation {
            accuracy: curve.true_accuracy(self.train_size),
            cost: curve.cost(self.train_size),
        })
    }

    fn predicted_cost(&self, id: usize, s_tr: u64, _s_te: u64) -> Option<f64> {
        self.curve(id).ok().map(|c| c.cost(s_tr))
    }

    fn true_accuracy(&self, id: usize) -> Option<f64> {
        self.curve(id).ok().map(|c| c.true_accuracy(self.train_size))
    }

    fn cost_exponent(&self) -> Option<f64> {
        self.configs.first().map(|c| c.curve.alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_form_example() {
        let spec = CurveSpec::new(0.9, 0.5, 0.5, 0.3, 0.5);
        assert!((spec.true_accuracy(10_000) - 0.895).abs() < 1e-12);
        assert!((spec.train_accuracy(10_000) - 0.898).abs() < 1e-12);
        assert_eq!(spec.cost(10_000), 10_000.0);
    }

    #[test]
    fn flat_curve() {
        let spec = CurveSpec::new(0.7, 0.0, 0.5, 0.0, 0.5);
        for s in [1, 10, 1000, 1 << 30] {
            assert_eq!(spec.true_accuracy(s), 0.7);
        }
    }

    #[test]
    fn large_test_sample_concentrates() {
        let spec = CurveSpec::new(0.9, 0.5, 0.5, 0.3, 0.5);
        let out = probe_synthetic(&spec, 10_000, 5_000_000, 11);
        assert!((out.test_accuracy - 0.895).abs() < 1e-3, "{}", out.test_accuracy);
    }

    #[test]
    fn plateau_freezes_curve() {
        let spec = CurveSpec::new(0.92, 0.9, 0.3, 0.4, 0.1).with_plateau(1000, 128_000);
        let at_start = spec.true_accuracy(1000);
        assert_eq!(spec.true_accuracy(64_000), at_start);
        assert_eq!(spec.true_accuracy(128_000), at_start);
        assert!(spec.true_accuracy(128_001) > at_start);
        assert!(spec.true_accuracy(999) < at_start);
    }

    #[test]
    fn validation_rejects_bad_curves() {
        assert!(CurveSpec::new(1.2, 0.1, 0.5, 0.0, 0.5).validate(1).is_err());
        assert!(CurveSpec::new(0.5, 0.9, 0.5, 0.0, 0.5).validate(1).is_err());
        assert!(CurveSpec::new(0.5, 0.9, 0.5, 0.0, 0.5).validate(1000).is_ok());
        assert!(CurveSpec::new(0.5, 0.1, 0.0, 0.0, 0.5).validate(1).is_err());
        assert!(CurveSpec::new(0.5, 0.1, 0.5, 0.0, 0.5)
            .with_plateau(10, 5)
            .validate(1)
            .is_err());
    }

    #[test]
    fn full_test_probe_is_exact_and_full_evaluate_matches() {
        let inst = SyntheticInstance::new(
            "t",
            100_000,
            50_000,
            vec![
                CurveSpec::new(0.9, 0.5, 0.5, 0.3, 0.5),
                CurveSpec::new(0.8, 0.1, 0.5, 0.1, 0.5),
            ],
        );
        let p = inst.probe(1, 100_000, 50_000, 3).unwrap();
        let full = inst.full_evaluate(1).unwrap();
        assert_eq!(p.outcome.test_accuracy, full.accuracy);
        assert_eq!(p.outcome.cost, full.cost);
        assert_eq!(inst.best_id(), 1);
        assert!(inst.probe(3, 10, 10, 0).is_err());
        assert!(inst.probe(1, 200_000, 10, 0).is_err());
    }

    #[test]
    fn instance_toml_round_trip_and_unknown_keys() {
        let inst = SyntheticInstance::new(
            "rt",
            1000,
            500,
            vec![CurveSpec::new(0.9, 0.5, 0.5, 0.3, 0.5).with_plateau(10, 20)],
        );
        let text = inst.to_toml();
        let back: SyntheticInstance = toml::from_str(&text).unwrap();
        assert_eq!(back, inst);
        let bad = text.replace("a_inf", "a_infinity");
        assert!(toml::from_str::<SyntheticInstance>(&bad).is_err());
    }

    proptest! {
        #[test]
        fn fitness_and_exploitativeness(
            a_inf in 0.3f64..1.0, b_frac in 0.0f64..1.0, beta in 0.05f64..1.5,
            g in 0.0f64..1.0, gamma in 0.05f64..1.5,
            plateau in proptest::option::of((1u64..50_000, 0u64..200_000)),
            s in 1u64..1_000_000, ds in 0u64..1_000_000,
        ) {
            let mut spec = CurveSpec::new(a_inf, a_inf * b_frac, beta, g, gamma);
            if let Some((start, len)) = plateau {
                spec = spec.with_plateau(start, start + len);
            }
            prop_assert!(spec.validate(1).is_ok());
            prop_assert!(spec.train_accuracy(s) >= spec.true_accuracy(s));
            prop_assert!(spec.true_accuracy(s + ds) >= spec.true_accuracy(s));
        }

        #[test]
        fn probe_is_deterministic(seed in any::<u64>(), s_te in 1u64..100_000) {
            let spec = CurveSpec::new(0.9, 0.5, 0.5, 0.3, 0.5);
            let a = probe_synthetic(&spec, 5000, s_te, seed);
            let b = probe_synthetic(&spec, 5000, s_te, seed);
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(&a.test_accuracy));
        }
    }
}
