//! Approximate best-configuration selection.
//!
//! Given `n` candidate training configurations and a large labelled dataset,
//! pick a configuration whose real test accuracy is within `epsilon` of the
//! best with probability at least `1 - delta`, while training on small,
//! geometrically growing samples instead of the full data.
//!
//! The pieces:
//!
//! - [`ci`]: confidence bounds on a configuration's real test accuracy from a
//!   single sampled probe, and their nesting inside cached intervals.
//! - [`engine`]: the probe / bound / prune loop with its incumbent and
//!   snapshot bookkeeping, budgeted runs and trace replay.
//! - [`scheduler`]: which configuration to probe next and at what size.
//! - [`probes`]: backends (a learning-curve simulator and small learners on CSV data).
//! - [`baselines`]: full training of every configuration and successive halving.
//! - [`harness`]: Monte Carlo experiments and trace audits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod ci;
pub mod config;
pub mod engine;
pub mod error;
pub mod harness;
pub mod method;
pub mod probes;
pub mod report;
pub mod scheduler;
pub mod seed;
pub mod types;

pub use baselines::{full_run, relative_accuracy_loss, successive_halving, FullRunResult, HalvingParams};
pub use ci::{estimate_ci, lower_bound, upper_bound, BoundInputs};
pub use config::{Backend, BackendSpec, ParamsSection, RunConfig};
pub use engine::{params_for, run_abc, select_with_budget, AbcRun, EngineState, RunWarning};
pub use error::{AbcError, ProbeError, Result};
pub use method::{run_method, Method, MethodOutcome};
pub use probes::{ProbeBackend, SyntheticInstance};
pub use report::RunReport;
pub use scheduler::{optimal_step_size, SchedulerKind};
pub use types::{ConfidenceInterval, ProbeOutcome, RoundRecord, RunParams, RunTrace, TraceFlag};
