mod common;

use common::{close, grid_sup};
use gsfde::phase_space::{
    check_lemma_lf3, evolve_segment, from_initial_data, segment_norm, HistorySegment, InitialData, TailModel,
};

fn exp_samples(rate: f64, lo: f64, h: f64) -> Vec<Vec<f64>> {
    let n = (-lo / h).round() as usize;
    (0..=n).map(|k| vec![(rate * (lo + k as f64 * h)).exp()]).collect()
}

#[test]
fn growing_history_norm_matches_grid_oracle() {
    let (q, h) = (2.0, 1e-3);
    let seg = HistorySegment::new(1, q, h, exp_samples(-1.0, -5.0, h), TailModel::exponential_decay(vec![1.0], -1.0))
        .unwrap();
    let oracle = grid_sup(|a| (-a).exp(), q, -60.0, 600_000);
    assert!(close(segment_norm(&seg), 1.0, 1e-6));
    assert!(close(segment_norm(&seg), oracle, 1e-6));
    assert!(close(seg.norm(), oracle, 1e-6));
}

#[test]
fn buffer_sup_away_from_zero() {
    // Bump centred at α = -1: the weighted sup lies inside the buffer.
    let (q, h) = (0.5, 1e-3);
    let f = |a: f64| 3.0 * (-(a + 1.0) * (a + 1.0) * 4.0).exp();
    let samples: Vec<Vec<f64>> = (0..=4000).map(|k| vec![f(-4.0 + k as f64 * h)]).collect();
    let seg = HistorySegment::new(1, q, h, samples, TailModel::Zero).unwrap();
    let oracle = grid_sup(f, q, -4.0, 400_000);
    assert!(close(seg.segment_norm(), oracle, 1e-5), "{} vs {oracle}", seg.segment_norm());
}

#[test]
fn exp_decay_initial_data_has_unit_norm() {
    for q in [0.1, 0.25, 1.0, 3.0] {
        let seg = from_initial_data(&InitialData::ExpDecay { value: vec![1.0], rate: 1.0 }, q, 1, 1e-3).unwrap();
        let oracle = grid_sup(|a| a.exp(), q, -50.0, 500_000);
        assert!(close(seg.segment_norm(), oracle, 1e-9), "q = {q}");
        assert!(close(seg.segment_norm(), 1.0, 1e-12));
    }
}

#[test]
fn trivial_initial_data() {
    let one = from_initial_data(&InitialData::Constant { value: vec![1.0] }, 1.0, 1, 1e-3).unwrap();
    assert_eq!(one.segment_norm(), 1.0);
    let zero = from_initial_data(&InitialData::Constant { value: vec![0.0, 0.0] }, 1.0, 2, 1e-3).unwrap();
    assert_eq!(zero.segment_norm(), 0.0);
    assert!(from_initial_data(&InitialData::ExpDecay { value: vec![1.0], rate: 0.0 }, 1.0, 1, 1e-3).is_err());
    assert!(from_initial_data(&InitialData::Constant { value: vec![1.0] }, 1.0, 2, 1e-3).is_err());
}

#[test]
fn evolve_recomputes_to_the_cached_norm() {
    let (q, h) = (0.8, 1e-3);
    let mut seg = from_initial_data(&InitialData::ExpDecay { value: vec![2.0], rate: 0.5 }, q, 1, h).unwrap();
    for k in 0..3000 {
        let v = (k as f64 * 0.01).sin() * 1.5;
        let before = seg.segment_norm();
        seg = evolve_segment(seg, &[v]);
        let direct = seg.segment_norm();
        assert!(direct >= (-q * h).exp() * before - 1e-12);
        assert!(direct >= v.abs());
        assert!(close(seg.norm(), direct, 1e-12 * direct.max(1.0)));
    }
}

#[test]
fn evolve_constant_and_zero() {
    let seg = from_initial_data(&InitialData::Constant { value: vec![1.5] }, 1.0, 1, 1e-3).unwrap();
    let next = evolve_segment(seg, &[1.5]);
    assert_eq!(next.value_at(-0.5e-3), vec![1.5]);
    assert_eq!(next.value_at(-7.0), vec![1.5]);
    assert_eq!(next.segment_norm(), 1.5);

    let zero = HistorySegment::zero(1, 1.0, 1e-3).unwrap();
    let next = evolve_segment(zero, &[0.7]);
    assert_eq!(next.head(), vec![0.7]);
    assert_eq!(next.value_at(-1e-3), vec![0.0]);
    assert_eq!(next.value_at(-3.0), vec![0.0]);
}

#[test]
fn fading_lemma_trivial_trajectories() {
    let h = 1e-3;
    let zero = from_initial_data(&InitialData::Constant { value: vec![0.0] }, 0.5, 1, h).unwrap();
    let c = check_lemma_lf3(&vec![vec![0.0]; 500], &zero, 2.0, 0.5).unwrap();
    assert!(c.holds);
    assert_eq!(c.min_slack, 0.0);

    let z = from_initial_data(&InitialData::Constant { value: vec![-1.3] }, 0.5, 1, h).unwrap();
    for p in [1.0, 2.0, 4.0] {
        let c = check_lemma_lf3(&vec![vec![-1.3]; 800], &z, p, 0.25 * p).unwrap();
        assert!(c.holds, "p = {p}");
        assert!(c.min_slack >= 0.0);
    }
}

#[test]
fn fading_lemma_rejects_bad_inputs() {
    let z = from_initial_data(&InitialData::Constant { value: vec![1.0] }, 0.5, 1, 1e-3).unwrap();
    assert!(check_lemma_lf3(&[vec![1.0]], &z, 0.5, 0.1).is_err());
    assert!(check_lemma_lf3(&[vec![1.0]], &z, 2.0, 1.0).is_err());
    assert!(check_lemma_lf3(&[vec![2.0]], &z, 2.0, 0.5).is_err());
}
