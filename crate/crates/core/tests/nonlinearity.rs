use std::sync::Arc;

use frontlab::nonlinearity::{PolyShape, ShapeFunction};
use frontlab::{Error, Model, Regime};
use proptest::prelude::*;
use serde_json::{Map, Value};

fn logistic_family(chi: f64) -> Model {
    Model::power(2, chi, 1.0).unwrap()
}

// f for A = u^n written out by hand, independent of the model code
fn f_power(n: i32, chi: f64, lambda: f64, u: f64) -> f64 {
    lambda * lambda * (u - u.powi(n)) * (1.0 + chi * n as f64 * u.powi(n - 1))
}

#[test]
fn f_at_half_for_pushmi_pullyu_square() {
    // (0.5 - 0.25)(1 + 1) = 0.5
    let m = logistic_family(1.0);
    assert!((m.evaluate_f(0.5).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn f_outside_unit_interval_is_rejected() {
    let m = logistic_family(1.0);
    assert!(matches!(m.evaluate_f(1.5), Err(Error::OutOfRange { .. })));
    assert!(matches!(m.evaluate_f(-0.1), Err(Error::OutOfRange { .. })));
}

#[test]
fn chi_fkpp_closed_forms() {
    // A = u^n: A / (A'(u - A)) = 1 / (n (1 - u^{n-1})), infimum 1/n at u -> 0
    assert!((logistic_family(0.0).chi_fkpp() - 0.5).abs() < 1e-12);
    let cubic = Model::power(3, 0.0, 1.0).unwrap();
    assert!((cubic.chi_fkpp() - 1.0 / 3.0).abs() < 1e-9);
    let quartic = Model::power(4, 0.0, 1.0).unwrap();
    assert!((quartic.chi_fkpp() - 0.25).abs() < 1e-6);
}

#[test]
fn regimes_and_speeds() {
    assert_eq!(logistic_family(0.0).regime(), Regime::Fkpp);
    // chi_FKPP(u^2) = 1/2 exactly and the FKPP bound holds there
    assert_eq!(logistic_family(0.5).regime(), Regime::Fkpp);
    assert_eq!(
        Model::power(3, 0.5, 1.0).unwrap().regime(),
        Regime::SemiFkpp
    );
    assert_eq!(logistic_family(0.9).regime(), Regime::SemiFkpp);
    assert_eq!(logistic_family(1.0).regime(), Regime::PushmiPullyu);
    assert_eq!(logistic_family(1.0 + 1e-13).regime(), Regime::PushmiPullyu);
    assert_eq!(logistic_family(4.0).regime(), Regime::Pushed);
    for chi in [0.0, 0.5, 1.0] {
        assert_eq!(logistic_family(chi).predicted_speed(), 2.0);
    }
    assert!((logistic_family(4.0).predicted_speed() - 2.5).abs() < 1e-15);
    let scaled = Model::power(2, 4.0, 3.0).unwrap();
    assert!((scaled.predicted_speed() - 7.5).abs() < 1e-14);
}

#[test]
fn standard_families_validate() {
    for n in 2..6 {
        for chi in [0.0, 0.3, 1.0, 4.0] {
            Model::power(n, chi, 1.0).unwrap().validate(256).unwrap();
        }
    }
    let mix = PolyShape::voting(vec![0.0, 0.0, 0.5, 0.5]).unwrap();
    Model::new(Arc::new(mix), 0.7, 1.0)
        .unwrap()
        .validate(256)
        .unwrap();
}

/// `A = u − η` with `η = (u/2 + sin(10u)/20)(1 − u)`: monostable but `A` not convex.
#[derive(Debug)]
struct Wiggly;

impl ShapeFunction for Wiggly {
    fn family(&self) -> &str {
        "wiggly"
    }
    fn value(&self, u: f64) -> f64 {
        u - (u / 2.0 + (10.0 * u).sin() / 20.0) * (1.0 - u)
    }
    fn d1(&self, u: f64) -> f64 {
        let g = u / 2.0 + (10.0 * u).sin() / 20.0;
        let dg = 0.5 + (10.0 * u).cos() / 2.0;
        1.0 - (dg * (1.0 - u) - g)
    }
    fn d2(&self, u: f64) -> f64 {
        let dg = 0.5 + (10.0 * u).cos() / 2.0;
        let d2g = -5.0 * (10.0 * u).sin();
        -(d2g * (1.0 - u) - 2.0 * dg)
    }
    fn params(&self) -> Map<String, Value> {
        Map::new()
    }
}

#[test]
fn nonconvex_shape_is_reported_with_location() {
    let m = Model::new(Arc::new(Wiggly), 1.0, 1.0).unwrap();
    match m.validate(512) {
        Err(Error::InvalidNonlinearity(v)) => {
            let convex = v
                .iter()
                .find(|x| x.condition == "A convex")
                .expect("convexity flagged");
            assert!(convex.u > 0.0 && convex.u < 1.0);
            assert!(Wiggly.d2(convex.u) < 0.0);
        }
        other => panic!("expected InvalidNonlinearity, got {other:?}"),
    }
}

#[test]
fn negative_chi_and_lambda_rejected() {
    assert!(Model::power(2, -0.1, 1.0).is_err());
    assert!(Model::power(2, 0.0, 0.0).is_err());
    assert!(Model::power(1, 0.0, 1.0).is_err());
}

proptest! {
    #[test]
    fn f_matches_hand_formula(n in 2i32..7, chi in 0.0f64..6.0, lambda in 0.2f64..3.0, u in 0.0f64..=1.0) {
        let m = Model::power(n as u32, chi, lambda).unwrap();
        let want = f_power(n, chi, lambda, u);
        prop_assert!((m.f(u) - want).abs() <= 1e-13 * (1.0 + want.abs()));
    }

    #[test]
    fn f_vanishes_at_ends_and_derivative_at_zero(n in 2u32..7, chi in 0.0f64..6.0, lambda in 0.2f64..3.0) {
        let m = Model::power(n, chi, lambda).unwrap();
        prop_assert_eq!(m.f(0.0), 0.0);
        prop_assert!(m.f(1.0).abs() < 1e-15);
        prop_assert!((m.df(0.0) - lambda * lambda).abs() < 1e-13);
    }

    #[test]
    fn df_matches_central_difference(n in 2u32..6, chi in 0.0f64..5.0, u in 0.01f64..0.99) {
        let m = Model::power(n, chi, 1.0).unwrap();
        let h = 1e-6;
        let fd = (m.f(u + h) - m.f(u - h)) / (2.0 * h);
        prop_assert!((m.df(u) - fd).abs() < 1e-6);
    }

    #[test]
    fn alpha_is_increasing_with_known_endpoints(n in 2u32..7, u in 0.0f64..1.0, du in 1e-6f64..0.5) {
        let m = Model::power(n, 0.0, 1.0).unwrap();
        prop_assert!(m.alpha(0.0) == 0.0);
        prop_assert!((m.alpha(1.0) - 1.0).abs() < 1e-15);
        let v = (u + du).min(1.0);
        prop_assert!(m.alpha(v) >= m.alpha(u));
    }

    #[test]
    fn chi_fkpp_never_exceeds_half(w2 in 0.0f64..1.0, w3 in 0.0f64..1.0) {
        let total = w2 + w3 + 1e-3;
        let weights = vec![0.0, 0.0, w2 / total, w3 / total, 1e-3 / total];
        let shape = PolyShape::voting(weights).unwrap();
        let m = Model::new(Arc::new(shape), 0.0, 1.0).unwrap();
        prop_assert!(m.chi_fkpp() <= 0.5 + 1e-12);
    }

    #[test]
    fn fkpp_bound_holds_below_chi_fkpp(n in 2u32..6, frac in 0.0f64..1.0, u in 1e-4f64..1.0) {
        let base = Model::power(n, 0.0, 1.0).unwrap();
        let m = base.with_chi(frac * base.chi_fkpp()).unwrap();
        prop_assert!(m.f(u) <= m.df(0.0) * u * (1.0 + 1e-12));
    }
}
