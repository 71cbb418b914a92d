use krein_ball::fd_oracle::{
    build_radial_operator, fd_resolvent_difference, fd_weyl_value, gamma_adjoint_identity_check,
    krein_identity_residual, observed_orders, richardson_order, richardson_order_complex,
    FdBoundary, RadialGrid,
};
use krein_ball::model_domains::{
    gamma_norm_squared, gamma_profile, make_ball, weyl_value, SpectralPoint,
};
use krein_ball::triple_engine::{
    correction_coefficient, make_boundary_operator, DiagonalRule, ExtensionPair, Realization,
    Representation, SymmetryClass,
};
use num_complex::Complex64 as C;

fn robin(theta: f64) -> Realization {
    Realization::Robin(
        make_boundary_operator(
            Representation::Diagonal(DiagonalRule::real(theta)),
            SymmetryClass::SelfAdjoint,
        )
        .unwrap(),
    )
}

const GRIDS: [usize; 3] = [1024, 2048, 4096];

#[test]
fn krein_residual_converges_at_second_order() {
    let d = make_ball(3, 1.0).unwrap();
    let lambda = SpectralPoint::new(0.0, 1.0).unwrap();
    let pair = ExtensionPair::new(robin(1.0), Realization::Neumann);
    for ell in [0usize, 1, 5] {
        let mode = d.mode(ell);
        let errors: Vec<f64> = GRIDS
            .iter()
            .map(|&n| {
                krein_identity_residual(&d, &mode, lambda, &pair, RadialGrid::new(&d, n).unwrap())
                    .unwrap()
            })
            .collect();
        for order in observed_orders(&errors) {
            assert!((order - 2.0).abs() < 0.3, "l = {ell}: errors {errors:?}");
        }
    }
}

#[test]
fn fd_weyl_value_converges() {
    let d = make_ball(2, 1.5).unwrap();
    let lambda = SpectralPoint::new(3.0, 0.5).unwrap();
    for ell in [0usize, 2, 7] {
        let mode = d.mode(ell);
        let exact = weyl_value(&d, &mode, lambda).unwrap();
        let values: Vec<C> = GRIDS
            .iter()
            .map(|&n| fd_weyl_value(&d, &mode, lambda, RadialGrid::new(&d, n).unwrap()).unwrap())
            .collect();
        let errors: Vec<f64> = values.iter().map(|v| (v - exact).norm()).collect();
        for order in observed_orders(&errors) {
            assert!((order - 2.0).abs() < 0.3, "l = {ell}: errors {errors:?}");
        }
        let p = richardson_order_complex(values[0], values[1], values[2]);
        assert!((p - 2.0).abs() < 0.3, "l = {ell}: Richardson order {p}");
    }
}

fn fd_gamma_norm_squared(n: usize, ell: usize, lambda: SpectralPoint, points: usize) -> f64 {
    let d = make_ball(n, 1.0).unwrap();
    let op = build_radial_operator(
        &d,
        &d.mode(ell),
        FdBoundary::Neumann,
        RadialGrid::new(&d, points).unwrap(),
    )
    .unwrap();
    let mut load = vec![C::new(0.0, 0.0); op.dim()];
    *load.last_mut().unwrap() = C::new(d.radius().powf((n as f64 - 1.0) / 2.0), 0.0);
    let u = op.solve_shifted(lambda.lambda, &load).unwrap();
    op.inner(&u, &u).re
}

#[test]
fn gamma_norm_matches_discrete_field() {
    let d = make_ball(3, 1.0).unwrap();
    let lambda = SpectralPoint::new(0.0, 1.0).unwrap();
    let exact = gamma_norm_squared(&d, &d.mode(6), lambda).unwrap();
    let fd = fd_gamma_norm_squared(3, 6, lambda, 4096);
    assert!((fd - exact).abs() <= 1e-5, "{fd} vs {exact}");
    let coarse: Vec<f64> = [256, 512, 1024]
        .iter()
        .map(|&p| fd_gamma_norm_squared(3, 6, lambda, p))
        .collect();
    let order = richardson_order(coarse[0], coarse[1], coarse[2]);
    assert!((order - 2.0).abs() < 0.3, "Richardson order {order}");
}

#[test]
fn gamma_adjoint_identity_on_the_gamma_field() {
    let d = make_ball(2, 1.0).unwrap();
    let lambda = SpectralPoint::new(1.0, 1.0).unwrap();
    let mode = d.mode(2);
    let grid = RadialGrid::new(&d, 4096).unwrap();
    let op = build_radial_operator(&d, &mode, FdBoundary::Neumann, grid).unwrap();
    let f: Vec<C> = op
        .nodes()
        .iter()
        .map(|&r| gamma_profile(&d, &mode, lambda.conj(), r).unwrap())
        .collect();
    let v = op.resolvent(lambda.lambda, &f).unwrap();
    let trace = v.last().unwrap() * d.radius().powf(0.5);
    let expected = gamma_norm_squared(&d, &mode, lambda.conj()).unwrap();
    assert!(
        (trace - expected).norm() <= 1e-5 * expected,
        "{trace} vs {expected}"
    );
    let residual = gamma_adjoint_identity_check(&d, &mode, lambda, grid, &f).unwrap();
    assert!(residual <= 1e-5 * expected);
}

#[test]
fn gamma_adjoint_identity_vanishes_for_zero_data() {
    let d = make_ball(4, 2.0).unwrap();
    let mode = d.mode(3);
    let grid = RadialGrid::new(&d, 64).unwrap();
    let dim = build_radial_operator(&d, &mode, FdBoundary::Neumann, grid)
        .unwrap()
        .dim();
    let zero = vec![C::new(0.0, 0.0); dim];
    let r = gamma_adjoint_identity_check(
        &d,
        &mode,
        SpectralPoint::new(0.0, 1.0).unwrap(),
        grid,
        &zero,
    )
    .unwrap();
    assert_eq!(r, 0.0);
}

#[test]
fn gamma_adjoint_identity_rejects_wrong_length() {
    let d = make_ball(2, 1.0).unwrap();
    let grid = RadialGrid::new(&d, 64).unwrap();
    let f = vec![C::new(1.0, 0.0); 10];
    assert!(gamma_adjoint_identity_check(
        &d,
        &d.mode(0),
        SpectralPoint::new(0.0, 1.0).unwrap(),
        grid,
        &f
    )
    .is_err());
}

#[test]
fn dirichlet_neumann_top_value_matches_analytic() {
    let d = make_ball(2, 1.0).unwrap();
    let lambda = SpectralPoint::new(-1.0, 0.0).unwrap();
    let mode = d.mode(0);
    let pair = ExtensionPair::new(Realization::Dirichlet, Realization::Neumann);
    let c = correction_coefficient(&pair, &d, &mode, lambda).unwrap();
    let exact = c.norm() * gamma_norm_squared(&d, &mode, lambda).unwrap();
    let fd = fd_resolvent_difference(
        &d,
        &mode,
        lambda,
        FdBoundary::Dirichlet,
        FdBoundary::Neumann,
        RadialGrid::new(&d, 4096).unwrap(),
    )
    .unwrap();
    let top = fd.top_singular_value();
    assert!((top - exact).abs() <= 1e-5 * exact, "{top} vs {exact}");
    let power = fd.power_iteration(30).unwrap();
    assert!((power - top).abs() <= 1e-8 * top);
}

#[test]
fn rank_one_structure_of_small_difference() {
    let d = make_ball(3, 1.0).unwrap();
    let lambda = SpectralPoint::new(0.0, 1.0).unwrap();
    let fd = fd_resolvent_difference(
        &d,
        &d.mode(1),
        lambda,
        FdBoundary::Robin(C::new(0.5, 0.0)),
        FdBoundary::Neumann,
        RadialGrid::new(&d, 64).unwrap(),
    )
    .unwrap();
    let dense = fd.weighted_dense().unwrap();
    let mut s: Vec<f64> = dense.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    assert!((s[0] - fd.top_singular_value()).abs() <= 1e-10 * s[0]);
    assert!(s[1] <= 1e-10 * s[0]);
}
