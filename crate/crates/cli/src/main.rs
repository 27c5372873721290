//! `abc`: run selections and baselines, run experiment grids, audit traces
//! and print reports.
//!
//! Exit codes: 1 invalid configuration or arguments, 2 backend or data
//! failure, 3 audit violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abc_core::engine::replay;
use abc_core::harness::{
    aggregate, containment_audit, run_experiment, structural_audit, write_outputs, ExperimentSpec,
};
use abc_core::method::Method;
use abc_core::{run_method, AbcError, ProbeBackend, RunConfig, RunReport, RunTrace, SchedulerKind, SyntheticInstance};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "abc", version, about = "Approximate best configuration selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on the backend described by a config file.
    Run {
        config: PathBuf,
        /// `abc`, `abc_gradient_ci`, `abc_ucb`, `abc_round_robin`, `full_run` or `successive_halving`.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        scheduler: Option<SchedulerKind>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Overridden by the ABC_SEED environment variable.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        budget: Option<f64>,
        /// Where to write the trace (JSON Lines).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Where to write the report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run an experiment grid and write metrics files.
    Experiment {
        spec: PathBuf,
        /// Output directory (default: `results/<name>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: one per logical core).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check a trace for structural invariants and interval containment.
    Audit {
        trace: PathBuf,
        /// Report of the run: supplies the parameters for the prune check and replay.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Synthetic instance file with the ground truth for the containment audit.
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Skip the containment audit.
        #[arg(long)]
        structural_only: bool,
    },
    /// Print the summary of a report file.
    Report { report: PathBuf },
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Backend(String),
    Audit(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Backend(_) => 2,
            Failure::Audit(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Backend(m) | Failure::Audit(m) => m,
        }
    }
}

impl From<AbcError> for Failure {
    fn from(e: AbcError) -> Self {
        if e.is_backend_failure() {
            Failure::Backend(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

type CliResult = Result<(), Failure>;

fn invalid(e: AbcError) -> Failure {
    Failure::Invalid(e.to_string())
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var("ABC_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Invalid(format!("ABC_SEED: `{s}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn ensure_parent(path: &Path) -> CliResult {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Backend(format!("{}: {e}", dir.display())))
        }
        _ => Ok(()),
    }
}

fn write_trace(path: &Path, trace: &RunTrace) -> CliResult {
    ensure_parent(path)?;
    let file = std::fs::File::create(path).map_err(|e| Failure::Backend(format!("{}: {e}", path.display())))?;
    trace.write_jsonl(std::io::BufWriter::new(file))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config: &Path,
    method: Option<String>,
    scheduler: Option<SchedulerKind>,
    epsilon: Option<f64>,
    seed: Option<u64>,
    budget: Option<f64>,
    trace: Option<PathBuf>,
    report: Option<PathBuf>,
) -> CliResult {
    let mut cfg = RunConfig::load(config).map_err(invalid)?;
    if let Some(m) = method {
        cfg.method = m;
    }
    if let Some(s) = scheduler {
        cfg.scheduler = s;
    }
    if let Some(e) = epsilon {
        cfg.params.epsilon = Some(e);
    }
    if let Some(s) = env_seed()?.or(seed) {
        cfg.params.seed = Some(s);
    }
    if budget.is_some() {
        cfg.budget = budget;
    }
    if let Some(b) = cfg.budget {
        if b.is_nan() || b <= 0.0 {
            return Err(Failure::Invalid(format!("invalid parameter `budget`: {b} must be > 0")));
        }
    }
    let method = cfg.method().map_err(invalid)?;
    let backend = cfg.backend.build(&cfg.base_dir)?;
    let params = cfg.params.resolve(&backend).map_err(invalid)?;
    let outcome = run_method(&backend, method, &params, cfg.budget)?;
    let run_report = RunReport::build(&backend, &outcome, cfg.budget, backend.is_learner())?;

    let trace_path = trace.or_else(|| cfg.trace.as_ref().map(|p| cfg.resolve_path(p)));
    if let Some(p) = &trace_path {
        write_trace(p, &outcome.trace)?;
    }
    let report_path = report.or_else(|| cfg.report.as_ref().map(|p| cfg.resolve_path(p)));
    if let Some(p) = &report_path {
        ensure_parent(p)?;
        run_report.write(p)?;
    }
    print!("{}", run_report.summary());
    if let Some(p) = trace_path {
        println!("trace: {}", p.display());
    }
    if let Some(p) = report_path {
        println!("report: {}", p.display());
    }
    Ok(())
}

fn cmd_experiment(spec: &Path, out: Option<PathBuf>, workers: Option<usize>) -> CliResult {
    let spec = ExperimentSpec::load(spec).map_err(invalid)?;
    if workers == Some(0) {
        return Err(Failure::Invalid(
            "invalid parameter `workers`: must be at least 1".into(),
        ));
    }
    let rows = run_experiment(&spec, workers)?;
    let dir = out.unwrap_or_else(|| PathBuf::from("results").join(&spec.name));
    write_outputs(&dir, &rows)?;
    println!(
        "{:<22} {:<34} {:>7} {:>5} {:>9} {:>10} {:>11} {:>10}",
        "method", "instance", "epsilon", "runs", "failures", "mean loss", "max d_rel", "speedup"
    );
    for a in aggregate(&rows) {
        println!(
            "{:<22} {:<34} {:>7} {:>5} {:>9} {:>10.5} {:>11.5} {:>10.2}",
            a.method.as_str(),
            a.instance,
            a.epsilon,
            a.runs,
            a.failures,
            a.mean_loss,
            a.max_delta_rel,
            a.mean_speedup_i
        );
    }
    println!("{} rows written to {}", rows.len(), dir.display());
    Ok(())
}

fn cmd_audit(
    trace_path: &Path,
    report: Option<PathBuf>,
    instance: Option<PathBuf>,
    structural_only: bool,
) -> CliResult {
    let text =
        std::fs::read_to_string(trace_path).map_err(|e| Failure::Backend(format!("{}: {e}", trace_path.display())))?;
    let report = report.map(|p| RunReport::load(&p)).transpose()?;
    let method = report
        .as_ref()
        .map_or_else(|| "unknown".to_string(), |r| r.method.as_str().to_string());
    let trace = RunTrace::from_jsonl(method, &text).map_err(invalid)?;
    let instance = if structural_only {
        None
    } else {
        match instance {
            Some(p) => Some(SyntheticInstance::load(&p)?),
            None => {
                return Err(Failure::Invalid(
                    "the containment audit needs ground truth: pass --instance or --structural-only".into(),
                ))
            }
        }
    };

    let n = report
        .as_ref()
        .map(|r| r.params.n_configs)
        .or(instance.as_ref().map(|i| i.n_configs()));
    let epsilon = report.as_ref().map(|r| r.params.epsilon);
    let mut violations: Vec<String> = structural_audit(&trace, n, epsilon)
        .iter()
        .map(|v| v.to_string())
        .collect();
    if epsilon.is_none() {
        println!("no report given: prune condition not checked");
    }
    if let Some(Method::Abc(scheduler)) = report.as_ref().map(|r| r.method) {
        match replay(&trace, &report.as_ref().unwrap().params, scheduler).map_err(invalid)? {
            Ok(_) => println!("replay: {} rounds reproduced", trace.len()),
            Err(m) => violations.push(format!("round {}: replay mismatch: {}", m.round, m.reason)),
        }
    }
    println!(
        "structural audit: {} rounds, {} snapshots, {} violations",
        trace.len(),
        trace.snapshots(),
        violations.len()
    );

    if let Some(inst) = &instance {
        let params_delta = report
            .as_ref()
            .map_or(abc_core::types::DEFAULT_DELTA, |r| r.params.delta);
        let c =
            containment_audit(std::slice::from_ref(&trace), &inst.real_accuracies(), params_delta).map_err(invalid)?;
        println!(
            "containment: {} of {} intervals exclude the real accuracy (rate {:.6}, threshold {:.6} + margin {:.6}){}",
            c.violations,
            c.probes,
            c.rate,
            c.threshold,
            c.margin,
            if c.within_margin() { "" } else { ", above margin" }
        );
        for pc in c.per_config.iter().filter(|pc| pc.violations > 0) {
            println!(
                "  configuration {}: {} of {} probes{}",
                pc.id,
                pc.violations,
                pc.probes,
                if pc.flagged { " (flagged)" } else { "" }
            );
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        for v in &violations {
            println!("{v}");
        }
        Err(Failure::Audit(format!("{} invariant violations", violations.len())))
    }
}

fn cmd_report(path: &Path) -> CliResult {
    let report = RunReport::load(path)?;
    print!("{}", report.summary());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            method,
            scheduler,
            epsilon,
            seed,
            budget,
            trace,
            report,
        } => cmd_run(&config, method, scheduler, epsilon, seed, budget, trace, report),
        Command::Experiment { spec, out, workers } => cmd_experiment(&spec, out, workers),
        Command::Audit {
            trace,
            report,
            instance,
            structural_only,
        } => cmd_audit(&trace, report, instance, structural_only),
        Command::Report { report } => cmd_report(&report),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
