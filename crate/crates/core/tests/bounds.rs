mod common;

use common::contractive;
use gsfde::bounds::{
    capacity_bound, default_lambda, lambda_scan, AuxConstants, BoundInputs, BoundReport, EpsTriple, Lambdas, Moments,
    Offsets, Theorem,
};
use gsfde::Error;

fn inputs(l: [f64; 5], mu: [f64; 3], k1: f64, k2: f64, q: f64) -> BoundInputs {
    BoundInputs {
        lambdas: Lambdas { l1: l[0], l2: l[1], l3: l[2], l4: l[3], l5: l[4] },
        moments: Moments { mu1: mu[0], mu2: mu[1], mu3: mu[2] },
        offsets: Offsets::default(),
        aux: AuxConstants { k1, k2, horizon: 10.0 },
        q,
    }
}

fn exact(a: f64, b: f64) {
    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
}

#[test]
fn window_without_delay_terms() {
    let b = inputs([1.2, 0.0, 0.3, 0.0, 0.0], [5.0, 5.0, 5.0], 0.5, 1.0, 2.0);
    let w = b.window(Theorem::MeanSquare);
    assert!(w.feasible);
    exact(w.top, (2.0 * 1.2 + 2.0 * 0.5 * 0.3f64).min(4.0));
}

#[test]
fn window_arithmetic() {
    for q in [0.5, 1.0] {
        let b = inputs([1.0, 0.1, 0.0, 0.0, 0.0], [2.0, 1.0, 1.0], 1.0, 1.0, q);
        let w = b.window(Theorem::MeanSquare);
        assert!(w.feasible);
        exact(w.lhs, 2.0);
        exact(w.rhs, 0.4);
        exact(w.top, 1.6f64.min(2.0 * q));
    }
}

#[test]
fn no_mean_reversion_is_infeasible() {
    let b = inputs([0.0, 0.2, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 1.0, 1.0, 1.0);
    let w = b.window(Theorem::MeanSquare);
    assert!(!w.feasible);
    assert!(matches!(w.require(), Err(Error::Infeasible(_))));
    assert!(default_lambda(&w).is_err());
    assert!(lambda_scan(&w, 10).is_err());
}

#[test]
fn k4_arithmetic() {
    let mut b = inputs([2.0, 0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 1.0, 1.0, 1.0);
    b.offsets.g0_sq = 1.0;
    let (k4, _) = b.k4_k5(0.5, &EpsTriple::uniform(0.1), 0.0, 0.0).unwrap();
    exact(k4, 20.0);
    b.offsets.g0_sq = 0.0;
    let (k4, k5) = b.k4_k5(0.5, &EpsTriple::uniform(0.1), 0.0, 0.0).unwrap();
    assert_eq!((k4, k5), (0.0, 0.0));
}

#[test]
fn k4_rejects_a_bad_epsilon() {
    let b = inputs([1.0, 0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 1.0, 1.0, 1.0);
    let e = b.k4_k5(0.5, &EpsTriple::uniform(0.9), 1.0, 1.0).unwrap_err();
    assert!(matches!(e, Error::InfeasibleEpsilon { .. }));
}

#[test]
fn k6_arithmetic() {
    let b = inputs([2.0, 0.1, 0.0, 0.0, 0.0], [2.0, 1.0, 1.0], 1.0, 1.0, 1.0);
    exact(b.k6(1.0).unwrap(), 1.4);
    let b = inputs([2.0, 0.0, 0.0, 0.0, 0.5], [1.0, 1.0, 3.0], 2.0, 1.0, 1.0);
    exact(b.k6(1.0).unwrap(), 4.0);
    let b = inputs([2.0, 0.0, 0.7, 0.0, 0.0], [9.0, 9.0, 9.0], 2.0, 1.0, 1.0);
    exact(b.k6(1.0).unwrap(), 1.0);
}

#[test]
fn k6_division_domain() {
    let b = inputs([2.0, 0.1, 0.0, 0.0, 0.0], [2.0, 1.0, 1.0], 1.0, 1.0, 1.0);
    assert!(matches!(b.k6(2.0), Err(Error::DivisionDomain { .. })));
    assert!(matches!(b.k6(2.5), Err(Error::DivisionDomain { .. })));
    assert!(b.k9(0.0).is_err());
}

#[test]
fn k7_k8_k9_arithmetic() {
    let b = inputs([2.0, 0.25, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 1.0, 1.0, 1.0);
    let (k7, k8) = b.k7_k8(1.0).unwrap();
    assert_eq!(k7, 0.0);
    exact(k8, 4.0);
    exact(b.k9(1.0).unwrap(), 1.0 + 4.0 * 0.25);
    let zero = inputs([2.0, 0.0, 0.0, 0.0, 0.0], [3.0, 3.0, 3.0], 1.0, 1.0, 1.0);
    exact(zero.k7_k8(0.3).unwrap().1, 3.0);
    exact(zero.k9(0.3).unwrap(), 1.0);
}

#[test]
fn lyapunov_constants() {
    let b = inputs([0.0, 0.0, 0.0, 0.4, 0.0], [1.0, 1.0, 1.0], 1.0, 1.0, 1.0);
    let (k_hat, _, l2, m) = b.l1_l2_m(1.0).unwrap();
    assert_eq!(k_hat, 0.0);
    exact(m, 4.0);
    assert_eq!(l2, 2.0 * m);
}

#[test]
fn global_constants() {
    let b = inputs([1.0, 0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 1.0, 1.0, 1.0);
    let (k1, k2, k3) = b.k1_k2_k3_global(0.0, 0.0);
    assert_eq!((k1, k2), (0.0, 0.0));
    exact(k3, 0.0);
    assert!(capacity_bound(k2 + 1.0, k3, 5.0, 1e8) < 1e-15);
    exact(capacity_bound(2.0, 0.5, 2.0, 2.0), 2.0 * 1f64.exp() / 4.0);
}

#[test]
fn bundled_report() {
    let set = contractive();
    let b = BoundInputs::new(&set, 0.25, AuxConstants { k1: 0.36, k2: 1.2, horizon: 10.0 }).unwrap();
    let mu = 0.5f64.exp();
    exact(b.moments.mu1, mu);
    let r = BoundReport::compute(b, 1.0, 1.0).unwrap();
    for t in Theorem::ALL {
        let tb = r.theorem(t);
        assert!(tb.window.feasible);
        exact(tb.window.top, 0.5);
        exact(tb.lambda.unwrap(), 0.45);
    }
    let lam = 0.45;
    let (l2, l4, l5) = (0.25, 0.05, 0.09);
    let k6 = 1.0 + (2.0 * l2 * mu + 2.0 * 0.36 * l4 * mu + 0.36 * l5 * mu) / (0.5 - lam);
    exact(r.mean_square.constant("K6").unwrap(), k6);
    exact(r.m, r.l2 / 2.0);
    assert!(r.to_text().contains("K6"));
    let mut csv = Vec::new();
    r.write_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("section,name,value"));
}

#[test]
fn fixed_lambda_outside_the_window_is_refused() {
    let set = contractive();
    let b = BoundInputs::new(&set, 0.25, AuxConstants { k1: 0.36, k2: 1.2, horizon: 10.0 }).unwrap();
    assert!(BoundReport::compute_with(b, 1.0, 1.0, Some(0.6), None).is_err());
    let r = BoundReport::compute_with(b, 1.0, 1.0, Some(0.2), None).unwrap();
    assert_eq!(r.mean_square.lambda, Some(0.2));
}

#[test]
fn measure_outside_the_class_is_infeasible() {
    let set = common::scalar_set((2.0, 0.5), (0.0, 0.0), (0.0, 0.0), &common::density(0.4));
    let e = BoundInputs::new(&set, 0.25, AuxConstants { k1: 0.36, k2: 1.2, horizon: 10.0 }).unwrap_err();
    assert!(matches!(e, Error::Infeasible(_)));
}
