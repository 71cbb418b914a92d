use krein_ball::model_domains::{
    gamma_norm, make_ball, modes, multiplicity, weyl_value, weyl_value_with_wavenumber,
    SpectralPoint,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn imaginary_part_follows_lambda(
        n in 2usize..6,
        radius in 0.3..3.0f64,
        ell in 0usize..300,
        re in -20.0..40.0f64,
        im in 0.05..20.0f64,
    ) {
        let d = make_ball(n, radius).unwrap();
        let mode = d.mode(ell);
        let up = weyl_value(&d, &mode, SpectralPoint::new(re, im).unwrap()).unwrap();
        let down = weyl_value(&d, &mode, SpectralPoint::new(re, -im).unwrap()).unwrap();
        prop_assert!(up.im > 0.0);
        prop_assert!(down.im < 0.0);
        prop_assert!((up.conj() - down).norm() <= 1e-12 * up.norm());
    }

    #[test]
    fn branch_choice_is_irrelevant(
        n in 2usize..6,
        ell in 0usize..200,
        re in -20.0..40.0f64,
        im in 0.05..20.0f64,
    ) {
        let d = make_ball(n, 1.0).unwrap();
        let mode = d.mode(ell);
        let k = SpectralPoint::new(re, im).unwrap().wavenumber();
        let a = weyl_value_with_wavenumber(&d, &mode, k).unwrap();
        let b = weyl_value_with_wavenumber(&d, &mode, -k).unwrap();
        prop_assert!((a - b).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn gamma_norm_is_conjugation_invariant(
        n in 2usize..5,
        ell in 0usize..100,
        re in -10.0..10.0f64,
        im in 0.1..5.0f64,
    ) {
        let d = make_ball(n, 1.0).unwrap();
        let mode = d.mode(ell);
        let lam = SpectralPoint::new(re, im).unwrap();
        let a = gamma_norm(&d, &mode, lam).unwrap();
        let b = gamma_norm(&d, &mode, lam.conj()).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }
}

#[test]
fn multiplicity_sums_match_binomial_closed_form() {
    // dim of harmonic polynomials of degree <= L = C(L+n-1, n-1) + C(L+n-2, n-1)
    fn binom(n: u64, k: u64) -> u64 {
        if k > n {
            return 0;
        }
        (1..=k).fold(1u64, |acc, i| acc * (n + 1 - i) / i)
    }
    for n in 2..8usize {
        let d = make_ball(n, 1.0).unwrap();
        for cutoff in 0..40usize {
            let sum: u64 = modes(&d, cutoff).iter().map(|m| m.multiplicity).sum();
            let (l, m) = (cutoff as u64, n as u64);
            assert_eq!(
                sum,
                binom(l + m - 1, m - 1) + binom(l + m - 2, m - 1),
                "n={n} L={cutoff}"
            );
        }
        assert_eq!(multiplicity(n, 0), 1);
    }
}

#[test]
fn weyl_decays_like_radius_over_degree() {
    for radius in [0.5, 1.0, 2.0] {
        let d = make_ball(3, radius).unwrap();
        let m = weyl_value(&d, &d.mode(2000), SpectralPoint::new(0.0, 1.0).unwrap()).unwrap();
        assert!((m.norm() * 2000.0 / radius - 1.0).abs() < 1e-3);
    }
}
