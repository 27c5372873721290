//! Declarative descriptions of backends and runs, as read from TOML files.
//!
//! Relative paths inside a file are resolved against the file's directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{AbcError, ProbeError, Result};
use crate::method::Method;
use crate::probes::families::Family;
use crate::probes::{
    DatasetHandle, FullEvaluation, LearnerBackend, LearnerConfig, Probe, ProbeBackend, SyntheticInstance,
};
use crate::scheduler::SchedulerKind;
use crate::types::RunParams;

/// Where probes come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    /// A synthetic instance file (TOML, or JSON by extension).
    Synthetic { instance: PathBuf },
    /// A seeded instance from a built-in family.
    Generated {
        family: Family,
        n_configs: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Learners trained on a CSV dataset.
    Csv {
        path: PathBuf,
        #[serde(default = "yes")]
        has_header: bool,
        #[serde(default = "half")]
        holdout: f64,
        #[serde(default)]
        split_seed: u64,
        learners: Vec<LearnerConfig>,
    },
}

fn yes() -> bool {
    true
}

fn half() -> f64 {
    0.5
}

impl BackendSpec {
    pub fn build(&self, base_dir: &Path) -> Result<Backend> {
        match self {
            BackendSpec::Synthetic { instance } => {
                Ok(Backend::Synthetic(SyntheticInstance::load(&base_dir.join(instance))?))
            }
            BackendSpec::Generated {
                family,
                n_configs,
                seed,
            } => {
                if *n_configs == 0 {
                    return Err(AbcError::param("n_configs", "must be at least 1"));
                }
                Ok(Backend::Synthetic(family.generate(*n_configs, *seed)))
            }
            BackendSpec::Csv {
                path,
                has_header,
                holdout,
                split_seed,
                learners,
            } => {
                let data = DatasetHandle::load_csv(&base_dir.join(path), *has_header, *holdout, *split_seed)?;
                Ok(Backend::Learners(LearnerBackend::new(
                    Arc::new(data),
                    learners.clone(),
                    *split_seed,
                )?))
            }
        }
    }

    /// Short name used in metrics rows.
    pub fn describe(&self) -> String {
        match self {
            BackendSpec::Synthetic { instance } => instance
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| instance.display().to_string()),
            BackendSpec::Generated {
                family,
                n_configs,
                seed,
            } => format!("{family}-n{n_configs}-s{seed}"),
            BackendSpec::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }
}

/// A built backend.
#[derive(Debug, Clone)]
pub enum Backend {
    Synthetic(SyntheticInstance),
    Learners(LearnerBackend),
}

impl Backend {
    pub fn is_learner(&self) -> bool {
        matches!(self, Backend::Learners(_))
    }

    /// Real test accuracy of every configuration, when known without training.
    pub fn ground_truth(&self) -> Option<Vec<f64>> {
        match self {
            Backend::Synthetic(inst) => Some(inst.real_accuracies()),
            Backend::Learners(_) => None,
        }
    }

    /// The first `n` configurations only.
    pub fn truncated(&self, n: usize) -> Backend {
        match self {
            Backend::Synthetic(inst) => Backend::Synthetic(inst.truncated(n)),
            Backend::Learners(l) => {
                let mut l = l.clone();
                l.learners.truncate(n);
                Backend::Learners(l)
            }
        }
    }

    fn inner(&self) -> &dyn ProbeBackend {
        match self {
            Backend::Synthetic(s) => s,
            Backend::Learners(l) => l,
        }
    }
}

impl ProbeBackend for Backend {
    fn n_configs(&self) -> usize {
        self.inner().n_configs()
    }

    fn label(&self, id: usize) -> String {
        self.inner().label(id)
    }

    fn train_size(&self) -> u64 {
        self.inner().train_size()
    }

    fn test_size(&self) -> u64 {
        self.inner().test_size()
    }

    fn probe(&self, id: usize, s_tr: u64, s_te: u64, seed: u64) -> Result<Probe, ProbeError> {
        self.inner().probe(id, s_tr, s_te, seed)
    }

    fn full_evaluate(&self, id: usize) -> Result<FullEvaluation, ProbeError> {
        self.inner().full_evaluate(id)
    }

    fn predicted_cost(&self, id: usize, s_tr: u64, s_te: u64) -> Option<f64> {
        self.inner().predicted_cost(id, s_tr, s_te)
    }

    fn true_accuracy(&self, id: usize) -> Option<f64> {
        self.inner().true_accuracy(id)
    }

    fn cost_exponent(&self) -> Option<f64> {
        self.inner().cost_exponent()
    }
}

/// Overrides of the run parameters; anything left out takes the default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    /// Geometric step factor; defaults to `2^(1/alpha)`.
    pub step_factor: Option<f64>,
    /// Cost exponent; defaults to the backend's cost model, else 1.
    pub alpha: Option<f64>,
    pub initial_train_size: Option<u64>,
    pub initial_test_size: Option<u64>,
    pub seed: Option<u64>,
}

impl ParamsSection {
    /// Concrete parameters for `backend`. Initial sizes are capped at the
    /// full sizes only when they were not given explicitly.
    pub fn resolve(&self, backend: &dyn ProbeBackend) -> Result<RunParams> {
        let mut p = RunParams::new(backend.n_configs(), backend.train_size(), backend.test_size());
        if let Some(alpha) = self.alpha.or(backend.cost_exponent()) {
            p = p.with_alpha(alpha);
        }
        if let Some(c) = self.step_factor {
            p = p.with_step_factor(c);
        }
        if let Some(e) = self.epsilon {
            p = p.with_epsilon(e);
        }
        if let Some(d) = self.delta {
            p = p.with_delta(d);
        }
        if let Some(s) = self.initial_train_size {
            p.initial_train_size = s;
        }
        if let Some(s) = self.initial_test_size {
            p.initial_test_size = s;
        }
        if let Some(seed) = self.seed {
            p.seed = seed;
        }
        p.validate()?;
        Ok(p)
    }
}

/// One run, as read by `abc run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `abc` (uses `scheduler`), a scheduler-qualified `abc_*` name,
    /// `full_run` or `successive_halving`.
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_scheduler")]
    pub scheduler: SchedulerKind,
    #[serde(default)]
    pub budget: Option<f64>,
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub params: ParamsSection,
    pub backend: BackendSpec,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_method() -> String {
    "abc".into()
}

fn default_scheduler() -> SchedulerKind {
    SchedulerKind::GradientCi
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| AbcError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.method()?;
        if let Some(b) = cfg.budget {
            if !(b > 0.0) {
                return Err(AbcError::param("budget", format!("{b} must be > 0")));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AbcError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            AbcError::Config(msg) => AbcError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn method(&self) -> Result<Method> {
        Method::parse_with_scheduler(&self.method, self.scheduler)
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }
}
