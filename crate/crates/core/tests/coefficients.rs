mod common;

use common::{atom, close, contractive, density, mixed, params, scalar_set, zero_set};
use gsfde::coefficients::{
    ball_bound, build_linear_set, truncate, verify_a1, verify_global_conditions, A1_TOLERANCE,
};
use gsfde::measures::integrate_segment;
use gsfde::phase_space::{from_initial_data, InitialData};
use gsfde::Error;

fn constant(c: f64, q: f64) -> gsfde::phase_space::HistorySegment {
    from_initial_data(&InitialData::Constant { value: vec![c] }, q, 1, 1e-3).unwrap()
}

#[test]
fn functional_on_a_constant_history() {
    let set = contractive();
    for c in [1.0, -2.5, 0.0] {
        let seg = constant(c, 0.25);
        let oracle = -2.0 * seg.head()[0] + 0.5 * integrate_segment(&atom(1.0), &seg).unwrap()[0];
        let got = set.drift.eval(&seg).unwrap()[0];
        assert!(close(got, oracle, 1e-15));
        assert!(close(got, (-2.0 + 0.5) * c, 1e-15));
    }
}

#[test]
fn functional_offset_and_head() {
    let f = build_linear_set(params(1.0, 0.0, 0.7, &atom(1.0)), params(0.0, 0.0, 0.0, &atom(1.0)), params(0.0, 0.0, 0.0, &atom(1.0)))
        .unwrap()
        .drift;
    assert_eq!(f.eval(&constant(0.0, 1.0)).unwrap(), vec![0.7]);
    let g = build_linear_set(params(1.0, 0.0, 0.0, &atom(1.0)), params(0.0, 0.0, 0.0, &atom(1.0)), params(0.0, 0.0, 0.0, &atom(1.0)))
        .unwrap()
        .drift;
    assert_eq!(g.eval(&constant(3.0, 1.0)).unwrap(), vec![-3.0]);
}

#[test]
fn certificate_constants() {
    let c = scalar_set((2.0, 1.0), (0.0, 0.0), (0.3, 0.0), &atom(1.0)).certificate;
    assert!(close(c.lambda1, 1.5, 1e-15) && close(c.lambda2, 0.5, 1e-15));
    assert!(close(c.lambda5, 0.09, 1e-15));
    let c = scalar_set((1.3, 0.0), (0.0, 0.0), (0.0, 0.0), &atom(1.0)).certificate;
    assert_eq!((c.lambda1, c.lambda2), (1.3, 0.0));
}

#[test]
fn builder_rejections() {
    let mu = atom(1.0);
    let e = build_linear_set(params(0.5, 1.0, 0.0, &mu), params(0.0, 0.0, 0.0, &mu), params(0.0, 0.0, 0.0, &mu));
    assert!(matches!(e, Err(Error::UncertifiableDrift { .. })));
    let e = build_linear_set(params(1.0, 0.0, 0.0, &mu), params(0.0, 0.0, 0.0, &mu), params(0.2, 0.0, 0.0, &mu));
    assert!(matches!(e, Err(Error::InvalidCoefficients(_))));
    let e = build_linear_set(params(1.0, 0.0, 0.0, &mu), params(0.0, 1.0, 0.0, &mu), params(0.0, 0.0, 0.0, &mu));
    assert!(matches!(e, Err(Error::InvalidCoefficients(_))));
}

#[test]
fn certificates_survive_random_pairs() {
    let sets = [
        contractive(),
        scalar_set((2.0, 1.0), (0.3, 0.4), (0.5, 0.2), &density(3.0)),
        scalar_set((1.0, -0.6), (0.0, 0.0), (0.8, 0.0), &mixed(0.5, 2.0)),
    ];
    for (k, set) in sets.iter().enumerate() {
        let r = verify_a1(set, 0.25, 2000, k as u64).unwrap();
        assert!(r.pass, "set {k}: {:?}", r.max_violation);
        assert!(r.max_violation.iter().all(|&v| v <= A1_TOLERANCE));
    }
}

#[test]
fn inflated_certificate_is_rejected() {
    let mut set = contractive();
    set.certificate.lambda1 *= 2.0;
    let r = verify_a1(&set, 0.25, 2000, 1).unwrap();
    assert!(!r.pass);
    assert!(r.max_violation[0] > 0.0);
}

#[test]
fn global_constants_head_only() {
    let set = scalar_set((1.0, 0.0), (0.0, 0.0), (0.0, 0.0), &atom(1.0));
    let g = verify_global_conditions(&set, 0.5, 2000, 2).unwrap();
    assert_eq!(g.l_analytic, 1.0);
    assert!(g.l_empirical <= 1.0 + 1e-12);
    assert!(g.l_empirical > 0.999, "{}", g.l_empirical);
}

#[test]
fn global_constants_delay_weight_inversion() {
    let (q, b) = (0.5, 0.7);
    let set = scalar_set((0.1, 0.0), (0.0, 0.0), (b, 0.0), &atom(1.0));
    let g = verify_global_conditions(&set, q, 4000, 3).unwrap();
    let oracle = (2.0 * q).exp() * b * b;
    assert!(close(g.l_analytic, oracle, 1e-12));
    assert!(g.l_empirical <= oracle * (1.0 + 1e-9));
    assert!(g.l_empirical > 0.99 * oracle, "{} vs {oracle}", g.l_empirical);
}

#[test]
fn global_constants_of_zero_set() {
    let g = verify_global_conditions(&zero_set(1), 0.5, 200, 4).unwrap();
    assert_eq!(g.l_empirical, 0.0);
    assert_eq!(g.k_empirical, 0.0);
}

#[test]
fn truncation_halves_a_linear_functional() {
    let q = 0.25;
    let set = contractive();
    let t = truncate(&set, 1.5).unwrap();
    let phi = constant(3.0, q);
    assert_eq!(phi.segment_norm(), 3.0);
    let full = set.drift.eval(&phi).unwrap()[0];
    let direct = set.drift.eval(&phi.scaled(1.5 / 3.0)).unwrap()[0];
    assert!(close(t.eval_drift(&phi).unwrap()[0], direct, 1e-15));
    assert!(close(t.eval_drift(&phi).unwrap()[0], full / 2.0, 1e-15));
    assert!(close(t.eval_diffusion(&phi).unwrap()[0], set.diffusion.eval(&phi).unwrap()[0] / 2.0, 1e-15));

    let inside = constant(1.0, q);
    assert_eq!(t.eval_drift(&inside).unwrap(), set.drift.eval(&inside).unwrap());
    assert_eq!(t.eval_qv_drift(&inside).unwrap(), set.qv_drift.eval(&inside).unwrap());
    assert!(truncate(&set, 0.0).is_err());
}

#[test]
fn ball_bound_dominates_truncated_values() {
    let q = 0.25;
    let set = contractive();
    let t = truncate(&set, 2.0).unwrap();
    for c in [-10.0, -1.0, 0.5, 4.0, 100.0] {
        let phi = constant(c, q);
        assert!(t.eval_drift(&phi).unwrap()[0].abs() <= ball_bound(&set.drift, q, 2.0) + 1e-12);
        assert!(t.eval_diffusion(&phi).unwrap()[0].abs() <= ball_bound(&set.diffusion, q, 2.0) + 1e-12);
    }
}
