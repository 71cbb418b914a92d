use krein_ball_cli::formula::parse_rule;
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #[test]
    fn printed_terms_parse_back(
        terms in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64, -4.0..4.0f64), 1..4),
        ell in 0usize..500,
    ) {
        let text = terms
            .iter()
            .map(|(re, im, p)| format!("({re:e} + {im:e}*i)*(1+l)^({p:e})"))
            .collect::<Vec<_>>()
            .join(" + ");
        let rule = parse_rule(&text).unwrap();
        let x = 1.0 + ell as f64;
        let expected: Complex64 = terms.iter().map(|(re, im, p)| Complex64::new(*re, *im) * x.powf(*p)).sum();
        let got = rule.value(ell).unwrap();
        prop_assert!((got - expected).norm() <= 1e-12 * (1.0 + expected.norm() + terms.iter().map(|(a, b, p)| Complex64::new(*a, *b).norm() * x.powf(*p)).sum::<f64>()));
    }
}
