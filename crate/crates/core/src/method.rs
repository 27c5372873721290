//! Uniform entry point over the selection methods.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{full_run, successive_halving, FullRunResult, HalvingParams};
use crate::engine::{run_abc, select_with_budget, RunWarning};
use crate::error::{AbcError, Result};
use crate::probes::ProbeBackend;
use crate::scheduler::SchedulerKind;
use crate::types::{RunParams, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Abc(SchedulerKind),
    FullRun,
    SuccessiveHalving,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Abc(SchedulerKind::GradientCi),
        Method::Abc(SchedulerKind::Ucb),
        Method::Abc(SchedulerKind::RoundRobin),
        Method::FullRun,
        Method::SuccessiveHalving,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Abc(SchedulerKind::GradientCi) => "abc_gradient_ci",
            Method::Abc(SchedulerKind::Ucb) => "abc_ucb",
            Method::Abc(SchedulerKind::RoundRobin) => "abc_round_robin",
            Method::FullRun => "full_run",
            Method::SuccessiveHalving => "successive_halving",
        }
    }

    /// Parses a method name; plain `abc` takes the given scheduler.
    pub fn parse_with_scheduler(s: &str, scheduler: SchedulerKind) -> Result<Self> {
        if s == "abc" {
            Ok(Method::Abc(scheduler))
        } else {
            s.parse()
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = AbcError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            AbcError::param(
                "method",
                format!(
                    "unknown method `{s}` (expected abc, abc_gradient_ci, abc_ucb, abc_round_robin, full_run or successive_halving)"
                ),
            )
        })
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What a method produced, before any ground-truth evaluation.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: Method,
    pub selected: usize,
    pub trace: RunTrace,
    pub warnings: Vec<RunWarning>,
    pub stopped_by_budget: bool,
    /// Present for `full_run`.
    pub full: Option<FullRunResult>,
    pub params: RunParams,
}

impl MethodOutcome {
    /// Selection cost excluding any final full-data training.
    pub fn cost(&self) -> f64 {
        match &self.full {
            Some(full) => full.total_cost,
            None => self.trace.wall_cost_total,
        }
    }
}

/// Runs `method`. Successive halving starts from `params.initial_train_size`
/// training samples and twice as many test samples; the budget applies to ABC only.
pub fn run_method(
    backend: &dyn ProbeBackend,
    method: Method,
    params: &RunParams,
    budget: Option<f64>,
) -> Result<MethodOutcome> {
    match method {
        Method::Abc(scheduler) => {
            let run = match budget {
                Some(b) => select_with_budget(backend, params, scheduler, b)?,
                None => run_abc(backend, params, scheduler)?,
            };
            Ok(MethodOutcome {
                method,
                selected: run.selected,
                trace: run.trace,
                warnings: run.warnings,
                stopped_by_budget: run.stopped_by_budget,
                full: None,
                params: params.clone(),
            })
        }
        Method::FullRun => {
            let full = full_run(backend)?;
            let mut trace = RunTrace::new(method.as_str());
            trace.final_selection = full.best;
            trace.wall_cost_total = full.total_cost;
            Ok(MethodOutcome {
                method,
                selected: full.best,
                trace,
                warnings: Vec::new(),
                stopped_by_budget: false,
                full: Some(full),
                params: params.clone(),
            })
        }
        Method::SuccessiveHalving => {
            let run = successive_halving(backend, &HalvingParams::new(params.initial_train_size), params.seed)?;
            Ok(MethodOutcome {
                method,
                selected: run.selected,
                trace: run.trace,
                warnings: Vec::new(),
                stopped_by_budget: false,
                full: None,
                params: params.clone(),
            })
        }
    }
}
