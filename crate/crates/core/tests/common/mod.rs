#![allow(dead_code)]

use gsfde::coefficients::{build_linear_set, CoefficientSet, FunctionalParams};
use gsfde::measures::{Atom, DelayMeasure, Density};

pub fn atom(tau: f64) -> DelayMeasure {
    DelayMeasure::point_mass(tau).unwrap()
}

pub fn density(rho: f64) -> DelayMeasure {
    DelayMeasure::new(vec![], vec![Density { rate: rho, weight: 1.0 }]).unwrap()
}

/// Half an atom at `tau`, half an exponential density of rate `rho`.
pub fn mixed(tau: f64, rho: f64) -> DelayMeasure {
    DelayMeasure::new(
        vec![Atom { tau, weight: 0.5 }],
        vec![Density { rate: rho, weight: 0.5 }],
    )
    .unwrap()
}

pub fn params(a: f64, b: f64, c0: f64, measure: &DelayMeasure) -> FunctionalParams {
    FunctionalParams {
        a,
        b,
        c0: vec![c0],
        measure: measure.clone(),
    }
}

/// Scalar set `g = -a_g ψ(0) + b_g∫ψdμ`, same for `h`, and `γ = b_γ∫ψdμ + γ₀`.
pub fn scalar_set(g: (f64, f64), h: (f64, f64), gamma: (f64, f64), mu: &DelayMeasure) -> CoefficientSet {
    build_linear_set(
        params(g.0, g.1, 0.0, mu),
        params(h.0, h.1, 0.0, mu),
        params(0.0, gamma.0, gamma.1, mu),
    )
    .unwrap()
}

/// The bundled contractive set.
pub fn contractive() -> CoefficientSet {
    scalar_set((2.0, 0.5), (0.5, 0.1), (0.3, 0.0), &atom(1.0))
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + k as f64 * h);
    }
    s * h / 3.0
}

/// `max_α e^{qα}|f(α)|` over a dense grid of `[lo, 0]`.
pub fn grid_sup(f: impl Fn(f64) -> f64, q: f64, lo: f64, n: usize) -> f64 {
    (0..=n)
        .map(|k| {
            let a = lo * k as f64 / n as f64;
            (q * a).exp() * f(a).abs()
        })
        .fold(0.0, f64::max)
}

/// Standard normal upper tail `P(Z > x)` by quadrature.
pub fn normal_tail(x: f64) -> f64 {
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    simpson(phi, x, x + 40.0, 400_000)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// All three functionals identically zero; bypasses the builder, which rejects `λ₁ = 0`.
pub fn zero_set(dim: usize) -> CoefficientSet {
    use gsfde::coefficients::{A1Certificate, LinearFunctional};
    let mu = atom(0.0);
    let f = LinearFunctional {
        a: 0.0,
        b: 0.0,
        c0: vec![0.0; dim],
        measure: mu.clone(),
    };
    CoefficientSet {
        drift: f.clone(),
        qv_drift: f.clone(),
        diffusion: f,
        certificate: A1Certificate {
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            lambda4: 0.0,
            lambda5: 0.0,
            mu1: mu.clone(),
            mu2: mu.clone(),
            mu3: mu,
        },
    }
}

/// The bundled configuration with the Monte Carlo sizes cut down.
pub fn small_toml() -> String {
    let base = gsfde::harness::DEFAULT_CONFIG;
    let head = &base[..base.find("[experiments]").unwrap()];
    format!(
        "{head}[experiments]
seed = 7
zeta = {{ kind = \"constant\", value = [1.0] }}
xi = {{ kind = \"constant\", value = [0.0] }}
checkpoints = [0.5, 1.0, 2.0, 5.0]
paths = 200
lyapunov_paths = 20
lyapunov_horizon = 20.0
nonexplosion_levels = [2.0, 4.0, 8.0, 16.0]
nonexplosion_horizon = 2.0
lemma_paths = 4
lemma_horizon = 1.0
truncation_seeds = 4
truncation_horizon = 2.0
markov_paths = 2000
"
    )
}

pub fn small_config() -> gsfde::harness::Config {
    gsfde::harness::Config::parse(&small_toml()).unwrap()
}
