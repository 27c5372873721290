//! Acceptance suite: one `[PASS]` / `[FAIL]` line per criterion, nonzero exit
//! if any fails. Runs as a plain binary (`harness = false`).

#![allow(clippy::excessive_precision, clippy::type_complexity)]

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use abc_core::harness::stats::{wilson_interval, Z99};
use abc_core::harness::{containment_audit, structural_audit, InstanceTruth};
use abc_core::probes::dataset::write_separable_csv;
use abc_core::probes::families::Family;
use abc_core::probes::{DatasetHandle, LearnerBackend, LearnerConfig, LearnerSpec};
use abc_core::scheduler::next_sample_size;
use abc_core::types::ProbeOutcome;
use abc_core::*;
use rand::Rng;
use rayon::prelude::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn shipped(name: &str) -> SyntheticInstance {
    SyntheticInstance::load(&repo_root().join("instances").join(name)).expect("shipped instance")
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

// (n, delta, |S_tr|, |D_te|, |S_te|, train acc, test acc, u, l), evaluated at 50 digits.
const REFERENCE: [(usize, f64, u64, u64, u64, f64, f64, f64, f64); 16] = [
    (
        5,
        0.5,
        1000,
        100000,
        2000,
        0.85,
        0.8,
        0.90661697631242383991,
        0.76606929787792444101,
    ),
    (
        40,
        0.1,
        6015228,
        8892603,
        486627,
        0.840348,
        0.775959,
        0.84209592735717508025,
        0.77269425419585172346,
    ),
    (
        16,
        0.9,
        869954,
        2631538,
        474821,
        0.371793,
        0.868445,
        0.37496035734848155266,
        0.86586041480278758838,
    ),
    (
        25,
        0.5,
        1710847,
        9629145,
        4183076,
        0.013114,
        0.21673,
        0.015356738936874643942,
        0.21576294133087534108,
    ),
    (
        18,
        0.05,
        6533674,
        2677724,
        301704,
        0.138767,
        0.617453,
        0.14102643821116132399,
        0.61349148949290599757,
    ),
    (
        9,
        0.05,
        29778,
        89149,
        27454,
        0.773594,
        0.960127,
        0.79274935850277167814,
        0.94799374557021248675,
    ),
    (
        11,
        0.05,
        4853736,
        5262206,
        1668405,
        0.539223,
        0.67783,
        0.54112917294969931936,
        0.67623540007751249537,
    ),
    (
        14,
        0.05,
        3303083,
        6429433,
        2506423,
        0.02157,
        0.414907,
        0.023645995633635204282,
        0.41356953858750077993,
    ),
    (
        60,
        0.05,
        4426030,
        1092873,
        695950,
        0.301359,
        0.60311,
        0.30494884605710592398,
        0.60018881033211371239,
    ),
    (
        1,
        0.5,
        5668969,
        1107682,
        650029,
        0.355351,
        0.306064,
        0.35674809603402447972,
        0.30503136613316197034,
    ),
    (
        45,
        0.1,
        3099981,
        8073514,
        3963939,
        0.704669,
        0.057001,
        0.70685579924036388961,
        0.055844195638359330813,
    ),
    (
        2,
        0.9,
        6000272,
        6782939,
        151562,
        0.549066,
        0.418827,
        0.55001630569127415015,
        0.41614229923573058091,
    ),
    (
        25,
        0.5,
        152311,
        7597106,
        391976,
        0.707758,
        0.623713,
        0.71379441213751551148,
        0.62055384480272439562,
    ),
    (
        13,
        0.01,
        4128652,
        7754529,
        2888885,
        0.512496,
        0.892711,
        0.51450334999975751106,
        0.89136753954944087976,
    ),
    (
        17,
        0.3,
        1812827,
        9894597,
        6162225,
        0.859694,
        0.036632,
        0.86184900715964565362,
        0.035848608289058485592,
    ),
    (
        6,
        0.05,
        5716678,
        8604709,
        6083847,
        0.918087,
        0.33996,
        0.91960201962617681598,
        0.33918690174781051196,
    ),
];

fn inputs(n: usize, delta: f64, s_tr: u64, d_te: u64, s_te: u64, a_tr: f64, a_te: f64) -> BoundInputs {
    let outcome = ProbeOutcome {
        train_sample_size: s_tr,
        test_sample_size: s_te,
        train_accuracy: a_tr,
        test_accuracy: a_te,
        cost: 0.0,
    };
    BoundInputs::new(outcome, n, delta, d_te)
}

/// Same formulas, rearranged: logs split into sums, square roots of quotients taken separately.
fn oracle(n: usize, delta: f64, s_tr: u64, d_te: u64, s_te: u64, a_tr: f64, a_te: f64) -> (f64, f64) {
    let ln_n2 = 2.0 * (n as f64).ln();
    let l4 = 4f64.ln() + ln_n2 - delta.ln();
    let l2 = 2f64.ln() + ln_n2 - delta.ln();
    let root = |l: f64, m: u64| l.sqrt() / (2.0 * m as f64).sqrt();
    (a_tr + root(l4, s_tr) + root(l4, d_te), a_te - root(l2, s_te))
}

fn c1_bounds() -> Verdict {
    let mut worst = 0f64;
    for &(n, d, s_tr, d_te, s_te, a, b, u, l) in &REFERENCE {
        let inp = inputs(n, d, s_tr, d_te, s_te, a, b);
        worst = worst
            .max((upper_bound(&inp).unwrap() - u).abs())
            .max((lower_bound(&inp).unwrap() - l).abs());
    }
    let mut rng = abc_core::seed::rng_from(2024);
    for _ in 0..1000 {
        let n = rng.random_range(1..=200usize);
        let delta = rng.random_range(0.001..0.999);
        let d_te = rng.random_range(1..=10_000_000u64);
        let s_te = rng.random_range(1..=d_te);
        let s_tr = rng.random_range(1..=10_000_000u64);
        let (a, b) = (rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
        let inp = inputs(n, delta, s_tr, d_te, s_te, a, b);
        let (u, l) = oracle(n, delta, s_tr, d_te, s_te, a, b);
        worst = worst
            .max((upper_bound(&inp).unwrap() - u).abs())
            .max((lower_bound(&inp).unwrap() - l).abs());
    }
    let worked = inputs(5, 0.5, 1000, 100_000, 2000, 0.85, 0.80);
    let (u, l) = (upper_bound(&worked).unwrap(), lower_bound(&worked).unwrap());
    let worked_ok = (u - 0.90662).abs() < 5e-6 && (l - 0.76607).abs() < 5e-6;
    verdict(
        worst <= 1e-12 && worked_ok,
        format!("max abs error {worst:.2e} over 1016 inputs; worked u={u:.5} l={l:.5}"),
    )
}

fn c2_guarantee() -> Verdict {
    let inst = shipped("wide_spread.toml");
    let truth = inst.real_accuracies();
    let best = truth.iter().copied().fold(f64::MIN, f64::max);
    let runs = 500;
    let bad: usize = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let run = run_abc(&inst, &params_for(&inst).with_seed(r), SchedulerKind::GradientCi).unwrap();
            usize::from(best - truth[run.selected - 1] > 0.01)
        })
        .sum();
    let (_, hi) = wilson_interval(bad, runs, Z99);
    verdict(
        hi <= 0.5,
        format!("{bad}/{runs} runs lose more than epsilon; 99% upper bound {hi:.3} (delta 0.5)"),
    )
}

fn c3_speedup() -> Verdict {
    let ns = [5usize, 10, 15, 20, 25];
    let cells: Vec<(u64, usize)> = (0..5u64).flat_map(|s| ns.iter().map(move |&n| (s, n))).collect();
    let results: Vec<(u64, usize, f64)> = cells
        .par_iter()
        .map(|&(seed, n)| {
            let inst = Family::WideSpread.generate(25, seed).truncated(n);
            let truth = InstanceTruth::compute(&inst).unwrap();
            let costs: Vec<f64> = (0..10u64)
                .map(|r| {
                    run_abc(&inst, &params_for(&inst).with_seed(r), SchedulerKind::GradientCi)
                        .unwrap()
                        .trace
                        .wall_cost_total
                })
                .collect();
            (seed, n, truth.full.total_cost / mean(&costs))
        })
        .collect();
    let hits = results.iter().filter(|(_, n, s)| *s >= *n as f64).count();
    let min = results.iter().map(|r| r.2).fold(f64::MAX, f64::min);
    verdict(
        hits >= 20,
        format!("{hits}/25 cells with speedup >= n (smallest speedup {min:.1})"),
    )
}

fn c4_plateau() -> Verdict {
    let rows: Vec<(f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let inst = Family::AdversarialPlateau.generate(5, seed);
            let truth = inst.real_accuracies();
            let best = truth.iter().copied().fold(f64::MIN, f64::max);
            let abc = run_abc(&inst, &params_for(&inst).with_seed(seed), SchedulerKind::GradientCi).unwrap();
            let sh = successive_halving(&inst, &HalvingParams::new(1000), seed).unwrap();
            let loss = |id: usize| relative_accuracy_loss(best, truth[id - 1]).unwrap();
            (loss(abc.selected), loss(sh.selected))
        })
        .collect();
    let abc: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let sh: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let worst = abc.iter().copied().fold(0.0, f64::max);
    let (ma, ms) = (mean(&abc), mean(&sh));
    verdict(
        ms >= 5.0 * ma && worst <= 0.01,
        format!("mean relative loss: halving {ms:.4}, ABC {ma:.5}; worst ABC {worst:.4} over 50 instances"),
    )
}

fn c5_containment() -> Verdict {
    let inst = shipped("wide_spread.toml");
    let truth = inst.real_accuracies();
    let mut traces = Vec::new();
    let mut seed = 0u64;
    while traces.iter().map(|t: &RunTrace| t.len()).sum::<usize>() < 10_000 {
        let batch: Vec<RunTrace> = (seed..seed + 64)
            .into_par_iter()
            .map(|r| {
                run_abc(&inst, &params_for(&inst).with_seed(r), SchedulerKind::GradientCi)
                    .unwrap()
                    .trace
            })
            .collect();
        traces.extend(batch);
        seed += 64;
    }
    let report = containment_audit(&traces, &truth, 0.5).unwrap();
    let flagged = report.per_config.iter().filter(|c| c.flagged).count();
    verdict(
        report.within_margin() && flagged == 0,
        format!(
            "{} violations in {} probes: rate {:.5} vs threshold {:.5} + margin {:.5}; {flagged} configurations flagged",
            report.violations, report.probes, report.rate, report.threshold, report.margin
        ),
    )
}

/// `sum_{j=1..m} T(s_j) / T(s_{m-1})` for `s_j = c^(j-1)` and `T(s) = s^alpha`.
fn worst_case_ratio(c: f64, alpha: f64, m: i32) -> f64 {
    let x = c.powf(alpha);
    (0..m).map(|j| x.powi(j)).sum::<f64>() / x.powi(m - 2)
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    (lo + hi) / 2.0
}

fn c6_step_size() -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;
    let mut rng = abc_core::seed::rng_from(6);
    let mut schedules = 0;
    let mut worst = 0f64;
    for alpha in [0.5, 1.0, 2.0, 3.0] {
        let numeric = golden_min(|c| worst_case_ratio(c, alpha, 60), 1.0001, 16.0);
        let closed = optimal_step_size(alpha).unwrap();
        let rel = (numeric - closed).abs() / closed;
        pass &= rel <= 0.01;
        notes.push(format!("a={alpha}: {numeric:.4} vs {closed:.4}"));
        for _ in 0..500 {
            let s1 = rng.random_range(100..5000u64);
            let mut sizes = vec![s1];
            while *sizes.last().unwrap() < 100_000_000 {
                sizes.push(next_sample_size(*sizes.last().unwrap(), closed, u64::MAX));
            }
            // optimal size just above a scheduled size (the worst case) or anywhere in between
            let k = rng.random_range(0..sizes.len() - 1);
            let target = if rng.random_bool(0.5) {
                sizes[k] + 1
            } else {
                rng.random_range(sizes[k] + 1..=sizes[k + 1])
            };
            let t = |s: u64| (s as f64).powf(alpha);
            let spent: f64 = sizes.iter().take_while(|&&s| s < target).map(|&s| t(s)).sum::<f64>() + t(sizes[k + 1]);
            let ratio = spent / t(target);
            worst = worst.max(ratio);
            schedules += 1;
        }
    }
    pass &= worst <= 4.0;
    verdict(
        pass,
        format!(
            "argmin {}; worst accumulated/optimal {worst:.4} over {schedules} schedules",
            notes.join(", ")
        ),
    )
}

fn mean_costs(inst: &SyntheticInstance, reps: u64) -> [f64; 3] {
    SchedulerKind::ALL.map(|s| {
        let costs: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|r| {
                run_abc(inst, &params_for(inst).with_seed(r), s)
                    .unwrap()
                    .trace
                    .wall_cost_total
            })
            .collect();
        mean(&costs)
    })
}

fn c7_schedulers() -> Verdict {
    let reps = 20;
    let mut sums = [0.0; 3];
    for seed in 0..5u64 {
        let c = mean_costs(&Family::CostSkewed.generate(8, seed), reps);
        for (s, v) in sums.iter_mut().zip(c) {
            *s += v / 5.0;
        }
    }
    let [g, u, r] = sums;
    let ship = mean_costs(&shipped("cost_skewed.toml"), reps);
    let ship_ratio = ship[2] / ship[0];
    verdict(
        g <= u && u < r && ship_ratio >= 4.0,
        format!(
            "mean cost over 5 skewed instances: GradientCI {g:.3e}, UCB {u:.3e}, RoundRobin {r:.3e}; shipped instance RoundRobin/GradientCI {ship_ratio:.1}"
        ),
    )
}

fn c8_epsilon() -> Verdict {
    let eps = [0.01, 0.05, 0.1];
    let points: Vec<(f64, f64)> = eps
        .iter()
        .map(|&e| {
            let rows: Vec<(f64, f64)> = (0..100u64)
                .into_par_iter()
                .map(|r| {
                    let inst = Family::WideSpread.generate(10, r);
                    let truth = InstanceTruth::compute(&inst).unwrap();
                    let params = params_for(&inst).with_seed(r).with_epsilon(e);
                    let run = run_abc(&inst, &params, SchedulerKind::GradientCi).unwrap();
                    (
                        truth.full.total_cost / run.trace.wall_cost_total,
                        truth.best_accuracy() - truth.accuracies[run.selected - 1],
                    )
                })
                .collect();
            (
                mean(&rows.iter().map(|x| x.0).collect::<Vec<_>>()),
                mean(&rows.iter().map(|x| x.1).collect::<Vec<_>>()),
            )
        })
        .collect();
    let ok = points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
    let desc: Vec<String> = eps
        .iter()
        .zip(&points)
        .map(|(e, (s, l))| format!("eps {e}: speedup {s:.1}, loss {l:.5}"))
        .collect();
    verdict(ok, desc.join("; "))
}

fn c9_budget() -> Verdict {
    let inst = shipped("adversarial_plateau.toml");
    let truth = inst.real_accuracies();
    let reps = 50u64;
    let mut lines = Vec::new();
    let mut pass = true;
    for k in 0..10 {
        let hp = HalvingParams::new(250 << k);
        let rows: Vec<(f64, f64, f64)> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let sh = successive_halving(&inst, &hp, r).unwrap();
                let budget = sh.trace.wall_cost_total;
                let abc = select_with_budget(
                    &inst,
                    &params_for(&inst).with_seed(r),
                    SchedulerKind::GradientCi,
                    budget,
                )
                .unwrap();
                (budget, truth[abc.selected - 1], truth[sh.selected - 1])
            })
            .collect();
        let b = mean(&rows.iter().map(|x| x.0).collect::<Vec<_>>());
        let a = mean(&rows.iter().map(|x| x.1).collect::<Vec<_>>());
        let s = mean(&rows.iter().map(|x| x.2).collect::<Vec<_>>());
        pass &= a >= s;
        lines.push(format!("{b:.2e}: {a:.4}/{s:.4}"));
    }
    verdict(pass, format!("budget: ABC/halving accuracy {}", lines.join(", ")))
}

fn c10_determinism() -> Verdict {
    let mut runs = 0;
    let mut problems = Vec::new();
    for family in Family::ALL {
        for seed in 0..5u64 {
            let inst = family.generate(8, seed);
            for s in SchedulerKind::ALL {
                let params = params_for(&inst).with_seed(seed + 100);
                let a = run_abc(&inst, &params, s).unwrap();
                let b = run_abc(&inst, &params, s).unwrap();
                runs += 1;
                if a.trace.to_jsonl() != b.trace.to_jsonl() {
                    problems.push(format!("{family}/{seed}/{s}: traces differ"));
                }
                let v = structural_audit(&a.trace, Some(8), Some(params.epsilon));
                if !v.is_empty() {
                    problems.push(format!("{family}/{seed}/{s}: {}", v[0]));
                }
                if !matches!(engine::replay(&a.trace, &params, s), Ok(Ok(_))) {
                    problems.push(format!("{family}/{seed}/{s}: replay mismatch"));
                }
            }
        }
    }
    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{runs} runs reproduced bit-identically, replayed and passed the structural audit")
        } else {
            problems.join("; ")
        },
    )
}

fn c11_learners() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("separable.csv");
    write_separable_csv(&path, 100_000, 2, 7).unwrap();
    let data = Arc::new(DatasetHandle::load_csv(&path, true, 0.5, 11).unwrap());
    let lr = |learning_rate: f64, epochs: u32, l2: f64| {
        LearnerConfig::new(LearnerSpec::LogisticRegressionSgd {
            learning_rate,
            epochs,
            l2,
        })
    };
    let learners = vec![
        LearnerConfig::new(LearnerSpec::DecisionStump {}),
        lr(0.5, 20, 0.0),
        LearnerConfig::new(LearnerSpec::MajorityClass {}),
        lr(1e-4, 1, 0.0),
        lr(0.05, 2, 0.1),
        lr(0.1, 3, 1.0),
    ];
    let backend = LearnerBackend::new(data, learners, 3).unwrap();

    let mut full_wall = f64::MAX;
    let mut full = Vec::new();
    for _ in 0..3 {
        let t = Instant::now();
        full = (1..=backend.n_configs())
            .map(|id| backend.full_evaluate(id).unwrap().accuracy)
            .collect();
        full_wall = full_wall.min(t.elapsed().as_secs_f64());
    }
    let best = full.iter().copied().fold(f64::MIN, f64::max);

    let mut abc_wall = f64::MAX;
    let mut selected = 0;
    for _ in 0..3 {
        let t = Instant::now();
        selected = run_abc(&backend, &params_for(&backend), SchedulerKind::GradientCi)
            .unwrap()
            .selected;
        abc_wall = abc_wall.min(t.elapsed().as_secs_f64());
    }
    let acc = backend.full_evaluate(selected).unwrap().accuracy;
    let ratio = abc_wall / full_wall;
    verdict(
        best - acc <= 0.01 && ratio < 0.25,
        format!(
            "selected {} (accuracy {acc:.4}, best {best:.4}); wall {abc_wall:.3}s vs full run {full_wall:.3}s ({:.0}%)",
            backend.label(selected),
            100.0 * ratio
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("C1 bound formulas", c1_bounds),
        ("C2 epsilon guarantee", c2_guarantee),
        ("C3 speedup over full run", c3_speedup),
        ("C4 plateau robustness", c4_plateau),
        ("C5 interval containment", c5_containment),
        ("C6 step size optimality", c6_step_size),
        ("C7 scheduler comparison", c7_schedulers),
        ("C8 epsilon sweep trend", c8_epsilon),
        ("C9 budget sweep", c9_budget),
        ("C10 determinism and audit", c10_determinism),
        ("C11 real learner smoke", c11_learners),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(&format!("{o} "))) {
            continue;
        }
        let t = Instant::now();
        let v = f();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {} ({:.1}s)", v.detail, t.elapsed().as_secs_f64());
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
