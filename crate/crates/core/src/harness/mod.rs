//! Monte Carlo experiments over methods, instances, tolerances and seeds.

pub mod audit;
pub mod stats;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{full_run, relative_accuracy_loss, FullRunResult};
use crate::config::{Backend, BackendSpec, ParamsSection};
use crate::error::{AbcError, Result};
use crate::method::{run_method, Method, MethodOutcome};
use crate::probes::ProbeBackend;
use crate::seed::{derive_seed, str_component};

pub use audit::{containment_audit, structural_audit, ContainmentReport, Violation, ViolationKind};

/// Header of `metrics.csv`.
pub const METRICS_HEADER: [&str; 15] = [
    "method",
    "instance",
    "seed",
    "epsilon",
    "selected",
    "acc_selected",
    "acc_best",
    "loss",
    "delta_rel",
    "cost_i",
    "cost_ii",
    "speedup_i",
    "speedup_ii",
    "rounds",
    "prunes",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub methods: Vec<Method>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// Restrict every instance to its first `n` configurations, for each `n`.
    #[serde(default)]
    pub n_configs: Option<Vec<usize>>,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Cost budgets for the ABC methods; other methods ignore them.
    #[serde(default)]
    pub budgets: Option<Vec<f64>>,
    #[serde(default)]
    pub params: ParamsSection,
    pub instances: Vec<BackendSpec>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_epsilons() -> Vec<f64> {
    vec![crate::types::DEFAULT_EPSILON]
}

fn one() -> usize {
    1
}

impl ExperimentSpec {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut spec: ExperimentSpec = toml::from_str(text).map_err(|e| AbcError::Config(e.to_string()))?;
        spec.base_dir = base_dir.to_path_buf();
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AbcError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            AbcError::Config(msg) => AbcError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(AbcError::param("methods", "grid is empty"));
        }
        if self.epsilons.is_empty() {
            return Err(AbcError::param("epsilons", "grid is empty"));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(AbcError::param("epsilons", format!("{e} not in [0, 1]")));
        }
        if self.repetitions == 0 {
            return Err(AbcError::param("repetitions", "must be at least 1"));
        }
        if self.instances.is_empty() {
            return Err(AbcError::param("instances", "list is empty"));
        }
        if let Some(ns) = &self.n_configs {
            if ns.is_empty() || ns.contains(&0) {
                return Err(AbcError::param("n_configs", "grid must be nonempty and positive"));
            }
        }
        if let Some(bs) = &self.budgets {
            if bs.is_empty() || bs.iter().any(|b| !(*b > 0.0)) {
                return Err(AbcError::param("budgets", "grid must be nonempty and positive"));
            }
        }
        Ok(())
    }
}

/// One (method, instance, epsilon, budget, repetition) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: Method,
    pub instance: String,
    pub n_configs: usize,
    pub seed: u64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    pub repetition: usize,
    pub selected: usize,
    pub acc_selected: f64,
    pub acc_best: f64,
    pub loss: f64,
    pub delta_rel: f64,
    pub cost_i: f64,
    pub cost_ii: f64,
    pub speedup_i: f64,
    pub speedup_ii: f64,
    pub rounds: usize,
    pub prunes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl MetricsRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    fn csv_record(&self) -> Vec<String> {
        let f = |x: f64| if x.is_nan() { String::new() } else { format!("{x}") };
        vec![
            self.method.to_string(),
            self.instance.clone(),
            self.seed.to_string(),
            f(self.epsilon),
            self.selected.to_string(),
            f(self.acc_selected),
            f(self.acc_best),
            f(self.loss),
            f(self.delta_rel),
            f(self.cost_i),
            f(self.cost_ii),
            f(self.speedup_i),
            f(self.speedup_ii),
            self.rounds.to_string(),
            self.prunes.to_string(),
        ]
    }
}

/// Ground truth shared by every cell of one instance.
#[derive(Debug, Clone)]
pub struct InstanceTruth {
    pub accuracies: Vec<f64>,
    pub full: FullRunResult,
}

impl InstanceTruth {
    pub fn compute(backend: &dyn ProbeBackend) -> Result<Self> {
        let full = full_run(backend)?;
        let accuracies = (1..=backend.n_configs())
            .map(|id| backend.true_accuracy(id))
            .collect::<Option<Vec<f64>>>()
            .unwrap_or_else(|| full.accuracies.clone());
        Ok(Self { accuracies, full })
    }

    pub fn best_accuracy(&self) -> f64 {
        self.accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Metrics of one finished method run against the instance's ground truth.
/// Returns (real accuracy of the selection, scenario (i) cost, scenario (ii) cost).
pub fn evaluate_outcome(truth: &InstanceTruth, outcome: &MethodOutcome) -> (f64, f64, f64) {
    let acc = truth.accuracies[outcome.selected - 1];
    let cost_i = outcome.cost();
    let cost_ii = match outcome.method {
        Method::FullRun => cost_i,
        _ => cost_i + truth.full.costs[outcome.selected - 1],
    };
    (acc, cost_i, cost_ii)
}

#[derive(Debug, Clone)]
struct Cell {
    instance: usize,
    n: usize,
    method: Method,
    epsilon: f64,
    budget: Option<f64>,
    repetition: usize,
}

/// Seed of one cell: base seed hashed with method, instance, epsilon and repetition.
pub fn cell_seed(base: u64, method: Method, instance: &str, epsilon: f64, repetition: usize) -> u64 {
    derive_seed(
        base,
        &[
            str_component(method.as_str()),
            str_component(instance),
            epsilon.to_bits(),
            repetition as u64,
        ],
    )
}

/// Runs every cell of `spec` on `workers` threads (`None`: one per core).
/// Rows come back in a canonical order independent of scheduling.
pub fn run_experiment(spec: &ExperimentSpec, workers: Option<usize>) -> Result<Vec<MetricsRow>> {
    spec.validate()?;
    let mut backends: Vec<(String, Backend)> = Vec::new();
    for inst in &spec.instances {
        let backend = inst.build(&spec.base_dir)?;
        let name = inst.describe();
        match &spec.n_configs {
            None => backends.push((name, backend)),
            Some(ns) => {
                for &n in ns {
                    if n > backend.n_configs() {
                        return Err(AbcError::param(
                            "n_configs",
                            format!("{n} exceeds the {} configurations of {name}", backend.n_configs()),
                        ));
                    }
                    backends.push((format!("{name}@n{n}"), backend.truncated(n)));
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| AbcError::Config(format!("worker pool: {e}")))?;

    pool.install(|| {
        let truths: Vec<std::result::Result<InstanceTruth, String>> = backends
            .par_iter()
            .map(|(_, b)| InstanceTruth::compute(b).map_err(|e| e.to_string()))
            .collect();

        let mut cells = Vec::new();
        for (i, (_, backend)) in backends.iter().enumerate() {
            for &method in &spec.methods {
                let budgets: Vec<Option<f64>> = match (&spec.budgets, method) {
                    (Some(bs), Method::Abc(_)) => bs.iter().copied().map(Some).collect(),
                    _ => vec![None],
                };
                for &epsilon in &spec.epsilons {
                    for &budget in &budgets {
                        for repetition in 0..spec.repetitions {
                            cells.push(Cell {
                                instance: i,
                                n: backend.n_configs(),
                                method,
                                epsilon,
                                budget,
                                repetition,
                            });
                        }
                    }
                }
            }
        }

        Ok(cells
            .par_iter()
            .map(|cell| {
                let (name, backend) = &backends[cell.instance];
                let seed = cell_seed(spec.base_seed, cell.method, name, cell.epsilon, cell.repetition);
                let mut row = MetricsRow {
                    method: cell.method,
                    instance: name.clone(),
                    n_configs: cell.n,
                    seed,
                    epsilon: cell.epsilon,
                    budget: cell.budget,
                    repetition: cell.repetition,
                    selected: 0,
                    acc_selected: f64::NAN,
                    acc_best: f64::NAN,
                    loss: f64::NAN,
                    delta_rel: f64::NAN,
                    cost_i: f64::NAN,
                    cost_ii: f64::NAN,
                    speedup_i: f64::NAN,
                    speedup_ii: f64::NAN,
                    rounds: 0,
                    prunes: 0,
                    error: None,
                };
                let truth = match &truths[cell.instance] {
                    Ok(t) => t,
                    Err(e) => {
                        row.error = Some(e.clone());
                        return row;
                    }
                };
                let result = spec
                    .params
                    .resolve(backend)
                    .map(|p| p.with_epsilon(cell.epsilon).with_seed(seed))
                    .and_then(|p| run_method(backend, cell.method, &p, cell.budget))
                    .map(|outcome| {
                        let (acc, cost_i, cost_ii) = evaluate_outcome(truth, &outcome);
                        (outcome, acc, cost_i, cost_ii)
                    });
                match result {
                    Ok((outcome, acc, cost_i, cost_ii)) => {
                        let best = truth.best_accuracy();
                        row.selected = outcome.selected;
                        row.acc_selected = acc;
                        row.acc_best = best;
                        row.loss = best - acc;
                        row.delta_rel = relative_accuracy_loss(best, acc).unwrap_or(f64::NAN);
                        row.cost_i = cost_i;
                        row.cost_ii = cost_ii;
                        row.speedup_i = truth.full.total_cost / cost_i;
                        row.speedup_ii = truth.full.total_cost / cost_ii;
                        row.rounds = outcome.trace.len();
                        row.prunes = outcome.trace.pruned_ids().count();
                    }
                    Err(e) => row.error = Some(e.to_string()),
                }
                row
            })
            .collect())
    })
}

/// Summary of all rows sharing (method, instance, epsilon, budget).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Method,
    pub instance: String,
    pub epsilon: f64,
    pub budget: Option<f64>,
    pub runs: usize,
    pub failures: usize,
    pub mean_acc_selected: f64,
    pub mean_loss: f64,
    pub mean_delta_rel: f64,
    pub max_delta_rel: f64,
    /// Fraction of runs with loss above epsilon.
    pub loss_above_epsilon: f64,
    pub mean_cost_i: f64,
    pub mean_speedup_i: f64,
    pub mean_speedup_ii: f64,
    pub p10_speedup_i: f64,
    pub p50_speedup_i: f64,
    pub p90_speedup_i: f64,
}

pub fn aggregate(rows: &[MetricsRow]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(Method, String, u64, Option<u64>), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((
                r.method,
                r.instance.clone(),
                r.epsilon.to_bits(),
                r.budget.map(f64::to_bits),
            ))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((method, instance, eps, budget), rs)| {
            let ok: Vec<&MetricsRow> = rs.iter().copied().filter(|r| !r.failed()).collect();
            let col = |f: fn(&MetricsRow) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let speedups = col(|r| r.speedup_i);
            let epsilon = f64::from_bits(eps);
            Aggregate {
                method,
                instance,
                epsilon,
                budget: budget.map(f64::from_bits),
                runs: rs.len(),
                failures: rs.len() - ok.len(),
                mean_acc_selected: stats::mean(&col(|r| r.acc_selected)),
                mean_loss: stats::mean(&col(|r| r.loss)),
                mean_delta_rel: stats::mean(&col(|r| r.delta_rel)),
                max_delta_rel: col(|r| r.delta_rel).into_iter().fold(f64::NAN, f64::max),
                loss_above_epsilon: if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().filter(|r| r.loss > epsilon).count() as f64 / ok.len() as f64
                },
                mean_cost_i: stats::mean(&col(|r| r.cost_i)),
                mean_speedup_i: stats::mean(&speedups),
                mean_speedup_ii: stats::mean(&col(|r| r.speedup_ii)),
                p10_speedup_i: stats::percentile(&speedups, 0.1),
                p50_speedup_i: stats::percentile(&speedups, 0.5),
                p90_speedup_i: stats::percentile(&speedups, 0.9),
            }
        })
        .collect()
}

/// Writes `metrics.csv`, `metrics.jsonl` and `aggregates.csv` into `dir`.
pub fn write_outputs(dir: &Path, rows: &[MetricsRow]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| AbcError::io(dir, e))?;
    let csv_err = |path: &Path, e: csv::Error| AbcError::Config(format!("{}: {e}", path.display()));

    let path = dir.join("metrics.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(METRICS_HEADER).map_err(|e| csv_err(&path, e))?;
    for r in rows {
        w.write_record(r.csv_record()).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| AbcError::io(&path, e))?;

    let path = dir.join("metrics.jsonl");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path).map_err(|e| AbcError::io(&path, e))?);
    for r in rows {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n").map_err(|e| AbcError::io(&path, e))?;
    }
    f.flush().map_err(|e| AbcError::io(&path, e))?;

    let path = dir.join("aggregates.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    for a in aggregate(rows) {
        w.serialize(a).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| AbcError::io(&path, e))?;
    Ok(())
}
