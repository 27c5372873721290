//! Final run summary written next to the trace.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::relative_accuracy_loss;
use crate::engine::RunWarning;
use crate::error::{AbcError, Result};
use crate::method::{Method, MethodOutcome};
use crate::probes::ProbeBackend;
use crate::types::{ConfidenceInterval, RunParams, TraceFlag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneEvent {
    pub round: usize,
    pub config_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigAccuracy {
    pub id: usize,
    pub label: String,
    pub accuracy: f64,
    pub cost: f64,
}

/// Which model the user should take away.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Deliverable {
    /// The selected configuration retrained on all training data.
    FullModel,
    /// The model from the selected configuration's last sampled probe, because
    /// the full-data model tested worse than it.
    SampledModel { s_tr: u64, test_accuracy: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub selected: usize,
    pub label: String,
    /// Real test accuracy of the selection (full-data training and testing).
    pub real_accuracy: Option<f64>,
    /// Best configuration and its accuracy, when ground truth is known.
    pub best: Option<usize>,
    pub best_accuracy: Option<f64>,
    pub loss: Option<f64>,
    pub delta_rel: Option<f64>,
    /// Selection cost only.
    pub total_cost_scenario_i: f64,
    /// Selection cost plus training the selection on full data.
    pub total_cost_scenario_ii: f64,
    pub rounds: usize,
    pub prunes: Vec<PruneEvent>,
    pub params: RunParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    pub stopped_by_budget: bool,
    /// Interval of the selection at the end of the run (ABC only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_interval: Option<ConfidenceInterval>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub accuracies: Vec<ConfigAccuracy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<RunWarning>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<TraceFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deliverable: Option<Deliverable>,
    pub exploitativeness_violation: bool,
}

impl RunReport {
    /// Summarizes `outcome`. Trains the selection on full data once (free on
    /// synthetic backends) to get its real accuracy and the scenario (ii) cost.
    pub fn build(
        backend: &dyn ProbeBackend,
        outcome: &MethodOutcome,
        budget: Option<f64>,
        real_learner: bool,
    ) -> Result<Self> {
        let selected = outcome.selected;
        let (real_accuracy, final_cost) = match &outcome.full {
            Some(full) => (full.accuracies[selected - 1], 0.0),
            None => {
                let eval = backend.full_evaluate(selected)?;
                (eval.accuracy, eval.cost)
            }
        };
        let truth: Option<Vec<f64>> = match &outcome.full {
            Some(full) => Some(full.accuracies.clone()),
            None => (1..=backend.n_configs()).map(|id| backend.true_accuracy(id)).collect(),
        };
        let best = truth.as_ref().map(|t| crate::probes::synthetic::argmax(t));
        let best_accuracy = best.zip(truth.as_ref()).map(|(b, t)| t[b - 1]);
        let delta_rel = match best_accuracy {
            Some(a) if a > 0.0 => Some(relative_accuracy_loss(a, real_accuracy)?),
            _ => None,
        };

        let mut flags: Vec<TraceFlag> = Vec::new();
        for r in &outcome.trace.rounds {
            for f in &r.flags {
                if !flags.contains(f) {
                    flags.push(*f);
                }
            }
        }

        let last = outcome.trace.rounds.iter().rev().find(|r| r.config_id == selected);
        let final_interval = match outcome.method {
            Method::Abc(_) => last.map(|r| r.interval()),
            _ => None,
        };
        let (deliverable, violation) = match (real_learner, last) {
            (true, Some(r)) if outcome.full.is_none() => {
                if real_accuracy < r.acc_test {
                    (
                        Some(Deliverable::SampledModel {
                            s_tr: r.s_tr,
                            test_accuracy: r.acc_test,
                        }),
                        true,
                    )
                } else {
                    (Some(Deliverable::FullModel), false)
                }
            }
            (true, _) => (Some(Deliverable::FullModel), false),
            _ => (None, false),
        };

        let accuracies = match &outcome.full {
            Some(full) => full
                .accuracies
                .iter()
                .zip(&full.costs)
                .enumerate()
                .map(|(i, (&accuracy, &cost))| ConfigAccuracy {
                    id: i + 1,
                    label: backend.label(i + 1),
                    accuracy,
                    cost,
                })
                .collect(),
            None => Vec::new(),
        };

        let cost_i = outcome.cost();
        Ok(RunReport {
            method: outcome.method,
            selected,
            label: backend.label(selected),
            real_accuracy: Some(real_accuracy),
            best,
            best_accuracy,
            loss: best_accuracy.map(|a| a - real_accuracy),
            delta_rel,
            total_cost_scenario_i: cost_i,
            total_cost_scenario_ii: cost_i + final_cost,
            rounds: outcome.trace.len(),
            prunes: outcome
                .trace
                .pruned_ids()
                .map(|(round, config_id)| PruneEvent { round, config_id })
                .collect(),
            params: outcome.params.clone(),
            budget,
            stopped_by_budget: outcome.stopped_by_budget,
            final_interval,
            accuracies,
            warnings: outcome.warnings.clone(),
            flags,
            deliverable,
            exploitativeness_violation: violation,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| AbcError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AbcError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "method: {}\nselected: {} ({})\n",
            self.method, self.selected, self.label
        );
        if let Some(a) = self.real_accuracy {
            out += &format!("real accuracy: {a:.6}\n");
        }
        if let (Some(b), Some(a)) = (self.best, self.best_accuracy) {
            out += &format!("best: {b} ({a:.6})\n");
        }
        if let Some(ci) = self.final_interval {
            out += &format!("final interval: [{:.6}, {:.6}]\n", ci.lower, ci.upper);
        }
        if let Some(d) = self.delta_rel {
            out += &format!("relative loss: {d:.6}\n");
        }
        out += &format!(
            "cost: {:.6} (selection), {:.6} (with final training)\nrounds: {}, prunes: {}\n",
            self.total_cost_scenario_i,
            self.total_cost_scenario_ii,
            self.rounds,
            self.prunes.len()
        );
        for acc in &self.accuracies {
            out += &format!(
                "  {:>3} {:<40} {:.6}  cost {:.6}\n",
                acc.id, acc.label, acc.accuracy, acc.cost
            );
        }
        if self.stopped_by_budget {
            out += "stopped by budget\n";
        }
        for w in &self.warnings {
            out += &format!("warning: {}\n", serde_json::to_string(w).unwrap_or_default());
        }
        if let Some(Deliverable::SampledModel { s_tr, test_accuracy }) = &self.deliverable {
            out += &format!(
                "full-data model tested below the sampled model ({test_accuracy:.6} at {s_tr} samples); deliver the sampled model\n"
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::method::run_method;
    use crate::probes::families::Family;
    use crate::scheduler::SchedulerKind;

    #[test]
    fn abc_report_on_synthetic_instance() {
        let inst = Family::WideSpread.generate(5, 1);
        let params = crate::engine::params_for(&inst).with_seed(2);
        let outcome = run_method(&inst, Method::Abc(SchedulerKind::GradientCi), &params, None).unwrap();
        let report = RunReport::build(&inst, &outcome, None, false).unwrap();
        assert_eq!(report.best, Some(inst.best_id()));
        assert_eq!(report.rounds, outcome.trace.len());
        assert!(report.total_cost_scenario_ii > report.total_cost_scenario_i);
        assert!(report.final_interval.is_some());
        let back: RunReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn full_run_report_lists_accuracies() {
        let inst = Family::WideSpread.generate(4, 1);
        let params = crate::engine::params_for(&inst);
        let outcome = run_method(&inst, Method::FullRun, &params, None).unwrap();
        let report = RunReport::build(&inst, &outcome, None, false).unwrap();
        assert_eq!(report.accuracies.len(), 4);
        assert_eq!(report.total_cost_scenario_i, report.total_cost_scenario_ii);
        assert_eq!(report.delta_rel, Some(0.0));
    }
}
