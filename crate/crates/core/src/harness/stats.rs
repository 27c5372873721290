//! Small summary statistics used by the experiment reports.

/// Arithmetic mean; `NaN` for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Percentile `q` in `[0, 1]` with linear interpolation between order statistics.
pub fn percentile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// z-value of a two-sided 99% normal interval.
pub const Z99: f64 = 2.575_829_303_548_901;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// `k` standard deviations of a binomial proportion with rate `p` over `trials`.
pub fn binomial_margin(p: f64, trials: usize, k: f64) -> f64 {
    if trials == 0 {
        return f64::INFINITY;
    }
    k * (p * (1.0 - p) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles() {
        let xs = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(percentile(&xs, 0.0), 1.0);
        assert_eq!(percentile(&xs, 1.0), 4.0);
        assert_eq!(percentile(&xs, 0.5), 2.5);
        assert_eq!(mean(&xs), 2.5);
        assert!(mean(&[]).is_nan());
    }

    #[test]
    fn wilson_matches_reference_values() {
        // 0 of 500 at 99%: upper = z^2 / (n + z^2)
        let (lo, hi) = wilson_interval(0, 500, Z99);
        assert_eq!(lo, 0.0);
        let expected = Z99 * Z99 / (500.0 + Z99 * Z99);
        assert!((hi - expected).abs() < 1e-12);
        let (lo, hi) = wilson_interval(250, 500, Z99);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn margin_shrinks_with_trials() {
        assert!(binomial_margin(0.02, 10_000, 3.0) < binomial_margin(0.02, 100, 3.0));
        assert!((binomial_margin(0.02, 10_000, 3.0) - 0.0042).abs() < 1e-12);
    }
}
