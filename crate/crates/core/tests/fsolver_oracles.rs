mod common;

use common::{constants_model, gauss_legendre_y, insurance, representation_reference};
use jumphedge::fsolver::{comparison_lower_bound, interpolate};
use jumphedge::{solve, ClaimSpec, Curve, Interp, MarketModel, Which};

#[test]
fn y_b_matches_implicit_integrator() {
    let m = constants_model();
    let sol = solve(&m, &insurance(), 2000).unwrap();
    let reference = gauss_legendre_y(&m, 20_000);
    for (k, &y) in sol.y_b.values.iter().enumerate() {
        assert!((y - reference[10 * k]).abs() <= 1e-8, "t={} {} vs {}", sol.grid.times[k], y, reference[10 * k]);
    }
}

#[test]
fn claim_solutions_match_integrating_factor_representations() {
    let m = constants_model();
    let c = insurance();
    let sol = solve(&m, &c, 2000).unwrap();
    let r = representation_reference(&m, &c, 20_000);
    assert!((sol.y_b.values[0] - r.y0).abs() <= 1e-8);
    assert!((sol.yc_b.values[0] - r.yc0).abs() <= 1e-8, "{} vs {}", sol.yc_b.values[0], r.yc0);
    assert!((sol.ups_b.values[0] - r.ups0).abs() <= 1e-8, "{} vs {}", sol.ups_b.values[0], r.ups0);
    for &(t, y, yc, ups) in &r.coarse {
        assert!((interpolate(&sol, Which::Y, t) - y).abs() <= 1e-8);
        assert!((interpolate(&sol, Which::Yc, t) - yc).abs() <= 1e-8);
        assert!((interpolate(&sol, Which::Ups, t) - ups).abs() <= 1e-8);
    }
}

#[test]
fn representations_hold_for_time_varying_smooth_curves() {
    let m =
        constants_model().with_curve("sigma", Curve::new(&[(0.0, 0.15), (1.0, 0.3)], Interp::PiecewiseLinear).unwrap()).unwrap();
    // keep the oracle's smoothness requirement: a single linear piece
    assert_eq!(m.breakpoints(), vec![0.0, 1.0]);
    let c = ClaimSpec::new(1.0, Curve::new(&[(0.0, 0.1), (1.0, 0.5)], Interp::PiecewiseLinear).unwrap()).unwrap();
    let sol = solve(&m, &c, 2000).unwrap();
    let r = representation_reference(&m, &c, 20_000);
    assert!((sol.y_b.values[0] - r.y0).abs() <= 1e-8);
    assert!((sol.yc_b.values[0] - r.yc0).abs() <= 1e-8);
    assert!((sol.ups_b.values[0] - r.ups0).abs() <= 1e-8);
}

#[test]
fn no_intensity_closed_forms() {
    let m = MarketModel::constant(1.0, 1.0, 0.05, 0.2, -0.5, 0.0).unwrap();
    let sol = solve(&m, &ClaimSpec::flat(1.0), 2000).unwrap();
    assert!((sol.y_b.values[0] - (-0.0625f64).exp()).abs() <= 1e-12);
    assert!((interpolate(&sol, Which::Y, 0.5) - (-0.03125f64).exp()).abs() <= 1e-8);
    for (&t, &y) in sol.grid.times.iter().zip(&sol.y_b.values) {
        assert!((y - (-0.0625 * (1.0 - t)).exp()).abs() <= 1e-8);
    }
}

#[test]
fn larger_squared_drift_lowers_y_b_without_intensity() {
    let mut last = f64::INFINITY;
    for mu in [0.0, 0.02, 0.05, 0.1, 0.2] {
        let m = MarketModel::constant(1.0, 1.0, mu, 0.2, 0.3, 0.0).unwrap();
        let y0 = solve(&m, &ClaimSpec::flat(1.0), 200).unwrap().y_b.values[0];
        assert!(y0 < last || mu == 0.0);
        last = y0;
    }
}

fn max_error(n: usize, reference: &jumphedge::FSolution, m: &MarketModel, c: &ClaimSpec) -> f64 {
    let sol = solve(m, c, n).unwrap();
    let mut worst: f64 = 0.0;
    for w in Which::ALL {
        for (&t, &v) in sol.grid.times.iter().zip(&sol.curve(w).values) {
            worst = worst.max((v - interpolate(reference, w, t)).abs());
        }
    }
    worst
}

#[test]
fn fourth_order_convergence() {
    let m = constants_model();
    let c = insurance();
    let reference = solve(&m, &c, 160).unwrap();
    let e: Vec<f64> = [4, 8, 16].iter().map(|&n| max_error(n, &reference, &m, &c)).collect();
    for w in e.windows(2) {
        assert!(w[0] / w[1] >= 12.0, "errors {e:?}");
    }
}

#[test]
fn positivity_on_all_fixtures() {
    let pc_lambda = Curve::new(&[(0.0, 0.2), (0.4, 0.6), (0.7, 0.1)], Interp::PiecewiseConstant).unwrap();
    let fixtures = [
        (constants_model(), insurance()),
        (constants_model(), ClaimSpec::credit(2, 0.05, 100.0, 1.0).unwrap()),
        (MarketModel::constant(1.0, 1.0, 0.05, 0.2, -0.5, 0.0).unwrap(), ClaimSpec::flat(1.0)),
        (constants_model().with_lambda(pc_lambda).unwrap(), ClaimSpec::credit(4, 0.03, 10.0, 1.0).unwrap()),
        (MarketModel::constant(2.0, 1.0, 0.3, 0.1, -1.0, 2.0).unwrap(), ClaimSpec::insurance(1.0, 3.0)),
    ];
    for (m, c) in &fixtures {
        let sol = solve(m, c, 2000).unwrap();
        let floor = sol.epsilon_guard;
        assert!(sol.y_b.min() >= floor - 1e-6);
        for (&t, &y) in sol.grid.times.iter().zip(&sol.y_b.values) {
            assert!(y >= comparison_lower_bound(m, t) - 1e-6);
        }
        assert!(sol.ups_b.min() >= -1e-12);
        assert!(!sol.guard_activated);
    }
}
