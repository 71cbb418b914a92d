use krein_ball::schatten_analysis::{
    fit_decay_exponent, p_tolerance_from_exponent, schatten_partial_sums, threshold, verdict,
    KRange, ThresholdKind,
};
use proptest::prelude::*;

fn power_law(c: f64, a: f64, len: usize) -> Vec<f64> {
    (1..=len).map(|k| c * (k as f64).powf(-a)).collect()
}

fn noisy(a: f64, len: usize, seed: u64) -> Vec<f64> {
    // deterministic bounded multiplicative wiggle
    (1..=len)
        .map(|k| (k as f64).powf(-a) * (1.0 + 0.1 * ((k as u64 ^ seed) as f64 * 0.618).sin()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn exponent_is_scale_invariant(a in 0.2..5.0f64, c in 1e-6..1e6f64, seed in any::<u64>()) {
        let base = noisy(a, 600, seed);
        let scaled: Vec<f64> = base.iter().map(|s| s * c).collect();
        let w = KRange::new(60, 600).unwrap();
        let f1 = fit_decay_exponent(&base, w).unwrap();
        let f2 = fit_decay_exponent(&scaled, w).unwrap();
        prop_assert!((f1.exponent - f2.exponent).abs() <= 1e-10 * (1.0 + f1.exponent.abs()));
        prop_assert!((f2.intercept - f1.intercept - c.ln()).abs() <= 1e-8 * (1.0 + c.ln().abs()));
    }

    #[test]
    fn exact_power_law_is_window_independent(a in 0.2..5.0f64, start in 1usize..500, width in 50usize..1000) {
        let values = power_law(3.0, a, 2000);
        let end = (start + width).min(2000);
        prop_assume!(end + 1 - start >= 50);
        let fit = fit_decay_exponent(&values, KRange::new(start, end).unwrap()).unwrap();
        prop_assert!((fit.exponent - a).abs() <= 1e-12 * a.max(1.0));
        prop_assert!(fit.rms_residual <= 1e-12);
    }

    #[test]
    fn verdict_is_monotone_in_exponent(a in 0.05..5.0f64, b in 0.05..5.0f64, n in 2usize..8, tol in 0.0..0.2f64) {
        let spec = threshold(ThresholdKind::RobinNeumann, n, None).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let w = KRange::new(1, 100).unwrap();
        let slow = fit_decay_exponent(&power_law(1.0, lo, 100), w).unwrap();
        let fast = fit_decay_exponent(&power_law(1.0, hi, 100), w).unwrap();
        let ptol = p_tolerance_from_exponent(&spec, tol);
        let vs = verdict(&slow, &spec, ptol);
        let vf = verdict(&fast, &spec, ptol);
        prop_assert!(vf.margin >= vs.margin - 1e-12);
        if vs.is_consistent() {
            prop_assert!(vf.is_consistent());
        }
    }

    #[test]
    fn partial_sums_are_monotone(a in 0.1..3.0f64, p in 0.1..4.0f64) {
        let values = power_law(1.0, a, 1000);
        let sums = schatten_partial_sums(&values, p, &[10, 100, 1000, 5000]).unwrap();
        for w in sums.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        prop_assert_eq!(sums[2], sums[3]);
    }

    #[test]
    fn parameter_difference_threshold_below_robin_neumann(n in 2usize..10, p0 in 0.01..1e4f64) {
        let pd = threshold(ThresholdKind::ParameterDifference, n, Some(p0)).unwrap();
        let rn = threshold(ThresholdKind::RobinNeumann, n, None).unwrap();
        prop_assert!(pd.p_threshold < rn.p_threshold);
        prop_assert!(pd.p_threshold < p0);
    }
}

#[test]
fn window_too_small_is_rejected() {
    let values = power_law(1.0, 1.0, 100);
    assert!(KRange::new(1, 49)
        .map(|w| fit_decay_exponent(&values, w))
        .unwrap_or_else(Err)
        .is_err());
    assert!(fit_decay_exponent(&values, KRange::new(50, 101).unwrap()).is_err());
}
