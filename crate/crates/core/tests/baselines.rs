use abc_core::probes::families::Family;
use abc_core::probes::{CurveSpec, SyntheticInstance};
use abc_core::*;

fn separated() -> SyntheticInstance {
    let curves = [0.70, 0.80, 0.95, 0.75, 0.60]
        .iter()
        .map(|&a| CurveSpec::new(a, 0.05, 0.5, 0.05, 0.5))
        .collect();
    SyntheticInstance::new("separated", 512_000, 100_000, curves)
}

#[test]
fn full_run_picks_the_argmax_and_sums_costs() {
    let inst = separated();
    let full = full_run(&inst).unwrap();
    assert_eq!(full.best, 3);
    assert_eq!(full.accuracies, inst.real_accuracies());
    assert!((full.total_cost - full.costs.iter().sum::<f64>()).abs() < 1e-6);
}

#[test]
fn halving_keeps_the_upper_half_each_round() {
    let inst = Family::WideSpread.generate(9, 1);
    let run = successive_halving(&inst, &HalvingParams::new(1000), 0).unwrap();
    assert_eq!(run.survivors, vec![9, 5, 3, 2]);
    let probed: Vec<u64> = run.trace.rounds.iter().map(|r| r.s_tr).collect();
    assert_eq!(probed.first(), Some(&1000));
    assert!(probed.windows(2).all(|w| w[1] == w[0] || w[1] == 2 * w[0]));
}

#[test]
fn halving_finds_a_clear_winner() {
    let inst = separated();
    for seed in 0..5 {
        let run = successive_halving(&inst, &HalvingParams::new(1000), seed).unwrap();
        assert_eq!(run.selected, 3);
    }
}

#[test]
fn halving_is_fooled_by_the_plateau() {
    // the point estimate at small sizes prefers the rivals
    let losses: Vec<f64> = (0..20)
        .map(|seed| {
            let inst = Family::AdversarialPlateau.generate(5, seed);
            let truth = inst.real_accuracies();
            let run = successive_halving(&inst, &HalvingParams::new(1000), seed).unwrap();
            relative_accuracy_loss(truth[inst.best_id() - 1], truth[run.selected - 1]).unwrap()
        })
        .collect();
    assert!(losses.iter().filter(|&&l| l > 0.01).count() >= 10, "{losses:?}");
}

#[test]
fn relative_loss() {
    assert!((relative_accuracy_loss(0.8, 0.76).unwrap() - 0.05).abs() < 1e-12);
    assert_eq!(relative_accuracy_loss(0.8, 0.8).unwrap(), 0.0);
    assert!(relative_accuracy_loss(0.0, 0.5).is_err());
}
