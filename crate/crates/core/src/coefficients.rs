//! Affine coefficient functionals `F(ψ) = −a·ψ(0) + b·∫ψ dμ + c₀` with an
//! analytic A1 certificate, numerical verifiers and the truncation operator.
//!
//! For `Δ = ψ − φ`, Young's inequality gives
//! `Δ(0)·(F(ψ) − F(φ)) ≤ −(a − |b|/2)|Δ(0)|² + (|b|/2)∫|Δ|²dμ`, and Jensen's
//! inequality gives `|b∫Δdμ|² ≤ b²∫|Δ|²dμ`. Hence
//! `λ₁ = a_g − |b_g|/2`, `λ₂ = |b_g|/2`, `λ₃ = a_h − |b_h|/2`, `λ₄ = |b_h|/2`,
//! `λ₅ = b_γ²`.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::measures::{integrate_segment, integrate_segment_sq, DelayMeasure};
use crate::phase_space::{HistorySegment, TailModel, TailTerm};
use crate::{dot, norm2};

/// Violations at or below this level count as satisfied.
pub const A1_TOLERANCE: f64 = 1e-8;

/// Parameters of one affine functional.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalParams {
    pub a: f64,
    pub b: f64,
    pub c0: Vec<f64>,
    pub measure: DelayMeasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFunctional {
    pub a: f64,
    pub b: f64,
    pub c0: Vec<f64>,
    pub measure: DelayMeasure,
}

impl LinearFunctional {
    pub fn dim(&self) -> usize {
        self.c0.len()
    }

    /// `F(ψ)`.
    pub fn eval(&self, seg: &HistorySegment) -> Result<Vec<f64>> {
        if seg.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: seg.dim(),
            });
        }
        let head = seg.head();
        let integral = integrate_segment(&self.measure, seg)?;
        let mut out = vec![0.0; self.dim()];
        self.eval_parts(&head, &integral, &mut out);
        Ok(out)
    }

    /// `F` from a precomputed head value and delay integral.
    #[inline]
    pub fn eval_parts(&self, head: &[f64], delay_integral: &[f64], out: &mut [f64]) {
        for i in 0..out.len() {
            out[i] = -self.a * head[i] + self.b * delay_integral[i] + self.c0[i];
        }
    }

    /// `|F(0)|²`.
    pub fn offset_sq(&self) -> f64 {
        dot(&self.c0, &self.c0)
    }

    /// Analytic Lipschitz constant w.r.t. `‖·‖_q`: `a + |b|·μ^(q)`.
    pub fn lipschitz_bound(&self, q: f64) -> f64 {
        match self.measure.moment(q) {
            Ok(m) => self.a + self.b.abs() * m,
            Err(_) => f64::INFINITY,
        }
    }
}

/// The constants `λ₁..λ₅` and measures `μ₁, μ₂, μ₃` of assumption A1.
#[derive(Debug, Clone, PartialEq)]
pub struct A1Certificate {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub lambda5: f64,
    pub mu1: DelayMeasure,
    pub mu2: DelayMeasure,
    pub mu3: DelayMeasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub drift: LinearFunctional,
    pub qv_drift: LinearFunctional,
    pub diffusion: LinearFunctional,
    pub certificate: A1Certificate,
}

impl CoefficientSet {
    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn functionals(&self) -> [&LinearFunctional; 3] {
        [&self.drift, &self.qv_drift, &self.diffusion]
    }

    pub fn max_atom_delay(&self) -> f64 {
        self.functionals()
            .iter()
            .map(|f| f.measure.max_atom_delay())
            .fold(0.0, f64::max)
    }
}

fn functional(name: &str, p: FunctionalParams) -> Result<LinearFunctional> {
    if !(p.a >= 0.0 && p.a.is_finite()) {
        return Err(Error::InvalidCoefficients(format!("{name}.a = {} must be nonnegative", p.a)));
    }
    if !p.b.is_finite() || p.c0.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidCoefficients(format!("{name}: non-finite parameter")));
    }
    if p.c0.is_empty() {
        return Err(Error::InvalidCoefficients(format!("{name}.c0 must be non-empty")));
    }
    Ok(LinearFunctional {
        a: p.a,
        b: p.b,
        c0: p.c0,
        measure: p.measure,
    })
}

/// Builds `g, h, γ` and their certificate.
pub fn build_linear_set(
    drift: FunctionalParams,
    qv_drift: FunctionalParams,
    diffusion: FunctionalParams,
) -> Result<CoefficientSet> {
    let g = functional("drift", drift)?;
    let h = functional("qv_drift", qv_drift)?;
    let gamma = functional("diffusion", diffusion)?;
    for f in [&h, &gamma] {
        if f.dim() != g.dim() {
            return Err(Error::DimensionMismatch {
                expected: g.dim(),
                got: f.dim(),
            });
        }
    }
    if gamma.a != 0.0 {
        return Err(Error::InvalidCoefficients(format!(
            "diffusion.a = {} must be 0: the diffusion may not depend on psi(0)",
            gamma.a
        )));
    }
    let lambda1 = g.a - g.b.abs() / 2.0;
    if !(lambda1 > 0.0) {
        return Err(Error::UncertifiableDrift { lambda1 });
    }
    let lambda3 = h.a - h.b.abs() / 2.0;
    if lambda3 < 0.0 {
        return Err(Error::InvalidCoefficients(format!(
            "lambda3 = a_h - |b_h|/2 = {lambda3} is negative"
        )));
    }
    let certificate = A1Certificate {
        lambda1,
        lambda2: g.b.abs() / 2.0,
        lambda3,
        lambda4: h.b.abs() / 2.0,
        lambda5: gamma.b * gamma.b,
        mu1: g.measure.clone(),
        mu2: h.measure.clone(),
        mu3: gamma.measure.clone(),
    };
    Ok(CoefficientSet {
        drift: g,
        qv_drift: h,
        diffusion: gamma,
        certificate,
    })
}

/// Grid used for the random verification segments.
pub const VERIFY_GRID_STEP: f64 = 1e-3;

/// Draws a random segment mixing a constant, an exponential term `c·e^{rα}`
/// with `r ∈ [−q, 2]`, and scaled grid noise, rescaled to a norm in `(0, 10]`.
pub fn random_segment(
    rng: &mut impl Rng,
    dim: usize,
    q: f64,
    grid_step: f64,
    len: usize,
) -> Result<HistorySegment> {
    let kind = rng.random_range(0..4u8);
    let normal = |rng: &mut dyn rand::RngCore| -> Vec<f64> {
        (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let zero = vec![0.0; dim];
    let c1 = if matches!(kind, 0 | 3) { normal(rng) } else { zero.clone() };
    let c2 = if matches!(kind, 1 | 3) { normal(rng) } else { zero.clone() };
    let rate = if kind == 1 && rng.random_bool(0.5) {
        -q
    } else {
        rng.random_range(-q..=2.0)
    };
    let noise = if matches!(kind, 2 | 3) { rng.random::<f64>() } else { 0.0 };
    let samples: Vec<Vec<f64>> = (0..len)
        .rev()
        .map(|k| {
            let w = (-rate * k as f64 * grid_step).exp();
            (0..dim)
                .map(|i| c1[i] + c2[i] * w + noise * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let tail = TailModel::from_terms(vec![
        TailTerm { coef: c1, rate: 0.0 },
        TailTerm { coef: c2, rate },
    ]);
    let seg = HistorySegment::new(dim, q, grid_step, samples, tail)?;
    let n = seg.segment_norm();
    let target = 10.0 * (1.0 - rng.random::<f64>());
    Ok(if n > 0.0 { seg.scaled(target / n) } else { seg })
}

fn verification_len(set: &CoefficientSet) -> usize {
    let horizon = 1.5 * set.max_atom_delay().max(1.0);
    (horizon / VERIFY_GRID_STEP).ceil() as usize + 1
}

/// `(ψ, φ)` pairs: equal, proportional, or independent.
fn random_pair(
    rng: &mut ChaCha8Rng,
    dim: usize,
    q: f64,
    len: usize,
) -> Result<(HistorySegment, HistorySegment)> {
    let psi = random_segment(rng, dim, q, VERIFY_GRID_STEP, len)?;
    let u = rng.random::<f64>();
    let phi = if u < 0.1 {
        psi.clone()
    } else if u < 0.4 {
        psi.scaled(rng.random_range(-2.0..2.0))
    } else {
        random_segment(rng, dim, q, VERIFY_GRID_STEP, len)?
    };
    Ok((psi, phi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct A1Report {
    /// Maximum of `LHS − RHS` over trials for (c1), (c2), (c3).
    pub max_violation: [f64; 3],
    pub n_trials: usize,
    pub pass: bool,
}

/// Samples `n_trials` random pairs and evaluates `LHS − RHS` of (c1)–(c3).
pub fn verify_a1(set: &CoefficientSet, q: f64, n_trials: usize, seed: u64) -> Result<A1Report> {
    let c = &set.certificate;
    let dim = set.dim();
    let len = verification_len(set);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [f64::NEG_INFINITY; 3];
    for _ in 0..n_trials {
        let (psi, phi) = random_pair(&mut rng, dim, q, len)?;
        let delta = psi.linear_combination(1.0, &phi, -1.0)?;
        let d0 = delta.head();
        let d0_sq = dot(&d0, &d0);
        let diff = |f: &LinearFunctional| -> Result<Vec<f64>> {
            let (a, b) = (f.eval(&psi)?, f.eval(&phi)?);
            Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
        };
        let v1 = dot(&d0, &diff(&set.drift)?)
            - (-c.lambda1 * d0_sq + c.lambda2 * integrate_segment_sq(&c.mu1, &delta)?);
        let v2 = dot(&d0, &diff(&set.qv_drift)?)
            - (-c.lambda3 * d0_sq + c.lambda4 * integrate_segment_sq(&c.mu2, &delta)?);
        let dg = diff(&set.diffusion)?;
        let v3 = dot(&dg, &dg) - c.lambda5 * integrate_segment_sq(&c.mu3, &delta)?;
        for (w, v) in worst.iter_mut().zip([v1, v2, v3]) {
            *w = w.max(v);
        }
    }
    Ok(A1Report {
        pass: worst.iter().all(|&v| v <= A1_TOLERANCE),
        max_violation: worst,
        n_trials,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalReport {
    /// Smallest `L` consistent with the sampled pairs in the global Lipschitz condition.
    pub l_empirical: f64,
    /// Smallest `K` consistent with the sampled segments in the linear growth condition.
    pub k_empirical: f64,
    /// `max_F (a + |b|μ^(q))²`.
    pub l_analytic: f64,
    /// `2·max_F max(|F(0)|², (a + |b|μ^(q))²)`.
    pub k_analytic: f64,
    pub n_trials: usize,
}

/// Empirical constants of the global Lipschitz and linear growth conditions.
pub fn verify_global_conditions(
    set: &CoefficientSet,
    q: f64,
    n_trials: usize,
    seed: u64,
) -> Result<GlobalReport> {
    let dim = set.dim();
    let len = verification_len(set);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut l_emp, mut k_emp) = (0.0f64, 0.0f64);
    for _ in 0..n_trials {
        let (psi, phi) = random_pair(&mut rng, dim, q, len)?;
        let dn = psi.linear_combination(1.0, &phi, -1.0)?.segment_norm();
        let pn = phi.segment_norm();
        for f in set.functionals() {
            let (a, b) = (f.eval(&psi)?, f.eval(&phi)?);
            if dn > 0.0 {
                let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                l_emp = l_emp.max(dot(&d, &d) / (dn * dn));
            }
            k_emp = k_emp.max(dot(&b, &b) / (1.0 + pn * pn));
        }
    }
    let l_analytic = set
        .functionals()
        .iter()
        .map(|f| f.lipschitz_bound(q).powi(2))
        .fold(0.0, f64::max);
    let k_analytic = set
        .functionals()
        .iter()
        .map(|f| 2.0 * f.offset_sq().max(f.lipschitz_bound(q).powi(2)))
        .fold(0.0, f64::max);
    Ok(GlobalReport {
        l_empirical: l_emp,
        k_empirical: k_emp,
        l_analytic,
        k_analytic,
        n_trials,
    })
}

/// Coefficients evaluated on `mφ/‖φ‖_q` whenever `‖φ‖_q > m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSet {
    set: CoefficientSet,
    m: f64,
}

impl TruncatedSet {
    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn inner(&self) -> &CoefficientSet {
        &self.set
    }

    /// The segment the inner functionals see.
    pub fn rescaled<'a>(&self, seg: &'a HistorySegment) -> Cow<'a, HistorySegment> {
        let n = seg.segment_norm();
        if n <= self.m {
            Cow::Borrowed(seg)
        } else {
            Cow::Owned(seg.scaled(self.m / n))
        }
    }

    pub fn eval_drift(&self, seg: &HistorySegment) -> Result<Vec<f64>> {
        self.set.drift.eval(&self.rescaled(seg))
    }

    pub fn eval_qv_drift(&self, seg: &HistorySegment) -> Result<Vec<f64>> {
        self.set.qv_drift.eval(&self.rescaled(seg))
    }

    pub fn eval_diffusion(&self, seg: &HistorySegment) -> Result<Vec<f64>> {
        self.set.diffusion.eval(&self.rescaled(seg))
    }
}

pub fn truncate(set: &CoefficientSet, m: f64) -> Result<TruncatedSet> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Precondition(format!("truncation level {m} must be positive")));
    }
    Ok(TruncatedSet { set: set.clone(), m })
}

/// Largest `|F(φ)|` over the `m`-ball, by the analytic bound `|c₀| + (a + |b|μ^(q))·m`.
pub fn ball_bound(f: &LinearFunctional, q: f64, m: f64) -> f64 {
    norm2(&f.c0) + f.lipschitz_bound(q) * m
}
