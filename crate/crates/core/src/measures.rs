//! Delay measures on `(-∞, 0]`: finitely many atoms plus exponential densities.
//!
//! Densities `w·ρ·e^{ρα}` are integrated over the buffer with the product
//! trapezoid rule: the piecewise-linear interpolant of the samples is
//! integrated exactly against the kernel. Its weights are positive and sum to
//! the kernel mass, so Jensen's inequality holds exactly for the discrete rule.
//! The tail beyond the buffer is integrated in closed form.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::norm2;
use crate::phase_space::{check_trajectory_start, HistorySegment, LemmaCheck, TailModel};

const MASS_TOLERANCE: f64 = 1e-12;

/// Mass `weight` at `α = -tau`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Atom {
    pub tau: f64,
    #[serde(rename = "w")]
    pub weight: f64,
}

/// Density `weight · rate · e^{rate·α}` on `(-∞, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Density {
    #[serde(rename = "rho")]
    pub rate: f64,
    #[serde(rename = "w")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct DelayMeasure {
    atoms: Vec<Atom>,
    densities: Vec<Density>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    #[serde(default)]
    atoms: Vec<Atom>,
    #[serde(default)]
    densities: Vec<Density>,
}

impl TryFrom<RawMeasure> for DelayMeasure {
    type Error = Error;
    fn try_from(r: RawMeasure) -> Result<Self> {
        DelayMeasure::new(r.atoms, r.densities)
    }
}

impl DelayMeasure {
    pub fn new(atoms: Vec<Atom>, densities: Vec<Density>) -> Result<Self> {
        for (i, a) in atoms.iter().enumerate() {
            if !(a.tau >= 0.0 && a.tau.is_finite()) {
                return Err(Error::InvalidMeasure(format!(
                    "atoms[{i}]: tau = {} must be finite and nonnegative",
                    a.tau
                )));
            }
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return Err(Error::InvalidMeasure(format!(
                    "atoms[{i}]: w = {} must be positive",
                    a.weight
                )));
            }
        }
        for (i, d) in densities.iter().enumerate() {
            if !(d.rate > 0.0 && d.rate.is_finite()) {
                return Err(Error::InvalidMeasure(format!(
                    "densities[{i}]: rho = {} must be positive",
                    d.rate
                )));
            }
            if !(d.weight > 0.0 && d.weight.is_finite()) {
                return Err(Error::InvalidMeasure(format!(
                    "densities[{i}]: w = {} must be positive",
                    d.weight
                )));
            }
        }
        let mass: f64 = atoms.iter().map(|a| a.weight).sum::<f64>()
            + densities.iter().map(|d| d.weight).sum::<f64>();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!(
                "total mass {mass} must equal 1"
            )));
        }
        Ok(DelayMeasure { atoms, densities })
    }

    /// Unit mass at `α = -tau`.
    pub fn point_mass(tau: f64) -> Result<Self> {
        Self::new(vec![Atom { tau, weight: 1.0 }], vec![])
    }

    /// The density `ρ e^{ρα}`.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(vec![], vec![Density { rate, weight: 1.0 }])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn densities(&self) -> &[Density] {
        &self.densities
    }

    pub fn max_atom_delay(&self) -> f64 {
        self.atoms.iter().map(|a| a.tau).fold(0.0, f64::max)
    }

    /// Whether `μ ∈ N_m`.
    pub fn in_class(&self, m: f64) -> bool {
        self.densities.iter().all(|d| d.rate > m)
    }

    /// `μ^(m) = ∫ e^{-mα} μ(dα)`.
    pub fn moment(&self, m: f64) -> Result<f64> {
        let mut s = 0.0;
        for a in &self.atoms {
            s += a.weight * (m * a.tau).exp();
        }
        for d in &self.densities {
            if d.rate <= m {
                return Err(Error::NotInClass { m, rate: d.rate });
            }
            s += d.weight * d.rate / (d.rate - m);
        }
        Ok(s)
    }
}

/// [`DelayMeasure::moment`] as a free function.
pub fn moment(mu: &DelayMeasure, m: f64) -> Result<f64> {
    mu.moment(m)
}

/// Product-trapezoid weights for the interval `[-h, 0]` of the kernel
/// `w·ρ·e^{ρα}`: returns `(newer, older, e^{-ρh})`.
fn interval_weights(d: &Density, h: f64) -> (f64, f64, f64) {
    let x = d.rate * h;
    let decay = (-x).exp();
    let mass = -(-x).exp_m1();
    let newer = 1.0 - mass / x;
    let older = mass / x - decay;
    (d.weight * newer, d.weight * older, decay)
}

#[inline]
fn atom_index(tau: f64, h: f64) -> usize {
    (tau / h).round() as usize
}

fn atom_integral_into(a: &Atom, seg: &HistorySegment, out: &mut [f64]) {
    atom_at_index_into(atom_index(a.tau, seg.grid_step()), a, seg, out);
}

#[inline]
fn atom_at_index_into(k: usize, a: &Atom, seg: &HistorySegment, out: &mut [f64]) {
    if k < seg.len() {
        for (i, o) in out.iter_mut().enumerate() {
            *o += a.weight * seg.component(k, i);
        }
    } else {
        for (i, o) in out.iter_mut().enumerate() {
            *o += a.weight * seg.tail_component(-a.tau, i);
        }
    }
}

/// Closed-form `∫_{α ≤ -T} tail(α)·w·ρ·e^{ρα} dα`, added into `out`.
fn tail_density_integral(tail: &TailModel, d: &Density, horizon: f64, out: &mut [f64]) -> Result<()> {
    let mut err = None;
    tail.for_each_term(|c, r| {
        let k = r + d.rate;
        if k <= 0.0 {
            err = Some(Error::DivergentTail { exponent: k });
            return;
        }
        let f = d.weight * d.rate * (-k * horizon).exp() / k;
        for (o, ci) in out.iter_mut().zip(c) {
            *o += f * ci;
        }
    });
    err.map_or(Ok(()), Err)
}

/// Closed-form `∫_{α ≤ -T} |tail(α)|^p·w·ρ·e^{ρα} dα`.
fn tail_density_integral_pow(tail: &TailModel, d: &Density, horizon: f64, p: f64) -> Result<f64> {
    let terms = tail.terms();
    let kernel = |k: f64| -> Result<f64> {
        if k <= 0.0 {
            return Err(Error::DivergentTail { exponent: k });
        }
        Ok(d.weight * d.rate * (-k * horizon).exp() / k)
    };
    match terms.len() {
        0 => Ok(0.0),
        1 => {
            let t = &terms[0];
            Ok(norm2(&t.coef).powf(p) * kernel(p * t.rate + d.rate)?)
        }
        _ if p == 2.0 => {
            let mut s = 0.0;
            for a in &terms {
                for b in &terms {
                    s += crate::dot(&a.coef, &b.coef) * kernel(a.rate + b.rate + d.rate)?;
                }
            }
            Ok(s)
        }
        _ => Err(Error::Unsupported(format!(
            "closed-form |tail|^{p} integral for a mixture tail"
        ))),
    }
}

fn density_integral_into(d: &Density, seg: &HistorySegment, out: &mut [f64]) -> Result<()> {
    let (newer, older, decay) = interval_weights(d, seg.grid_step());
    let mut f = 1.0;
    for k in 0..seg.len() - 1 {
        for (i, o) in out.iter_mut().enumerate() {
            *o += f * (newer * seg.component(k, i) + older * seg.component(k + 1, i));
        }
        f *= decay;
    }
    tail_density_integral(&seg.tail(), d, seg.buffer_horizon(), out)
}

fn density_integral_pow(d: &Density, seg: &HistorySegment, p: f64) -> Result<f64> {
    let (newer, older, decay) = interval_weights(d, seg.grid_step());
    let mut f = 1.0;
    let mut s = 0.0;
    let mut prev = norm2(&seg.sample(0)).powf(p);
    for k in 0..seg.len() - 1 {
        let next = norm2(&seg.sample(k + 1)).powf(p);
        s += f * (newer * prev + older * next);
        prev = next;
        f *= decay;
    }
    Ok(s + tail_density_integral_pow(&seg.tail(), d, seg.buffer_horizon(), p)?)
}

/// `∫ ψ(α) μ(dα)`.
pub fn integrate_segment(mu: &DelayMeasure, seg: &HistorySegment) -> Result<Vec<f64>> {
    let mut out = vec![0.0; seg.dim()];
    for a in &mu.atoms {
        atom_integral_into(a, seg, &mut out);
    }
    for d in &mu.densities {
        density_integral_into(d, seg, &mut out)?;
    }
    Ok(out)
}

/// `∫ |ψ(α)|² μ(dα)`.
pub fn integrate_segment_sq(mu: &DelayMeasure, seg: &HistorySegment) -> Result<f64> {
    integrate_norm_pow(mu, seg, 2.0)
}

/// `∫ |ψ(α)|^p μ(dα)`.
pub fn integrate_norm_pow(mu: &DelayMeasure, seg: &HistorySegment, p: f64) -> Result<f64> {
    let mut s = 0.0;
    let mut x = vec![0.0; seg.dim()];
    for a in &mu.atoms {
        seg.value_into(-a.tau, &mut x);
        s += a.weight * norm2(&x).powf(p);
    }
    for d in &mu.densities {
        s += density_integral_pow(d, seg, p)?;
    }
    Ok(s)
}

#[derive(Debug, Clone)]
struct DensityState {
    newer: f64,
    older: f64,
    decay: f64,
    value: Vec<f64>,
}

/// Running `∫ψ(α)μ(dα)` for a segment that is only ever extended by `push`.
///
/// Atoms are looked up in the segment; each density keeps its integral and
/// updates it in O(1) per step with the same weights as [`integrate_segment`].
#[derive(Debug, Clone)]
pub struct DelayTracker {
    /// `(grid index, atom)`.
    atoms: Vec<(usize, Atom)>,
    densities: Vec<DensityState>,
}

impl DelayTracker {
    pub fn new(mu: &DelayMeasure, seg: &HistorySegment) -> Result<Self> {
        let h = seg.grid_step();
        let mut densities = Vec::with_capacity(mu.densities.len());
        for d in &mu.densities {
            let (newer, older, decay) = interval_weights(d, h);
            let mut value = vec![0.0; seg.dim()];
            density_integral_into(d, seg, &mut value)?;
            densities.push(DensityState {
                newer,
                older,
                decay,
                value,
            });
        }
        Ok(DelayTracker {
            atoms: mu.atoms.iter().map(|a| (atom_index(a.tau, h), *a)).collect(),
            densities,
        })
    }

    /// Accounts for `seg.push(new_head)` where `prev_head` is the head before the push.
    #[inline]
    pub fn advance(&mut self, prev_head: &[f64], new_head: &[f64]) {
        for d in &mut self.densities {
            for ((v, p), n) in d.value.iter_mut().zip(prev_head).zip(new_head) {
                *v = d.decay * *v + d.older * p + d.newer * n;
            }
        }
    }

    /// Writes `∫ψdμ` for the current segment into `out`.
    #[inline]
    pub fn integral_into(&self, seg: &HistorySegment, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, a) in &self.atoms {
            atom_at_index_into(*k, a, seg, out);
        }
        for d in &self.densities {
            for (o, v) in out.iter_mut().zip(&d.value) {
                *o += v;
            }
        }
    }
}

/// Running `∫|ψ(α)|^p μ(dα)`, the scalar counterpart of [`DelayTracker`].
#[derive(Debug, Clone)]
pub struct NormPowTracker {
    p: f64,
    atoms: Vec<Atom>,
    densities: Vec<(f64, f64, f64, f64)>,
}

impl NormPowTracker {
    pub fn new(mu: &DelayMeasure, seg: &HistorySegment, p: f64) -> Result<Self> {
        let mut densities = Vec::with_capacity(mu.densities.len());
        for d in &mu.densities {
            let (newer, older, decay) = interval_weights(d, seg.grid_step());
            densities.push((newer, older, decay, density_integral_pow(d, seg, p)?));
        }
        Ok(NormPowTracker {
            p,
            atoms: mu.atoms.clone(),
            densities,
        })
    }

    pub fn advance(&mut self, prev_head: &[f64], new_head: &[f64]) {
        let a = norm2(prev_head).powf(self.p);
        let b = norm2(new_head).powf(self.p);
        for (newer, older, decay, v) in &mut self.densities {
            *v = *decay * *v + *older * a + *newer * b;
        }
    }

    pub fn value(&self, seg: &HistorySegment) -> f64 {
        let mut x = vec![0.0; seg.dim()];
        let mut s = 0.0;
        for a in &self.atoms {
            seg.value_into(-a.tau, &mut x);
            s += a.weight * norm2(&x).powf(self.p);
        }
        s + self.densities.iter().map(|d| d.3).sum::<f64>()
    }
}

/// Which inequality of the integral lemma to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lf2Variant {
    /// `∫₀ᵗ∫|X(s+α)|^p μ(dα)ds ≤ (μ^(pq)/pq)‖ζ‖^p + ∫₀ᵗ|X(s)|^p ds`.
    Plain,
    /// `∫₀ᵗ e^{λs}∫|X(s+α)|^p μ(dα)ds ≤ (μ^(pq)/(pq−λ))‖ζ‖^p + μ^(pq)∫₀ᵗ e^{λs}|X(s)|^p ds`.
    Exponential,
}

/// Pathwise check of the delay-integral inequalities at every grid time,
/// with time integrals by the trapezoid rule.
///
/// The asserted constants are `μ^(pq)/pq` (plain) and `μ^(pq)/(pq−λ)`
/// (exponential). `alt_min_slack` reports the alternative constants
/// `μ^(2q)/2q` and `μ^(pq)/(2q−λ)` where they are defined.
pub fn check_lemma_lf2(
    states: &[Vec<f64>],
    zeta: &HistorySegment,
    mu: &DelayMeasure,
    p: f64,
    lambda: f64,
    variant: Lf2Variant,
) -> Result<LemmaCheck> {
    let q = zeta.q();
    if !(p >= 2.0) {
        return Err(Error::Precondition(format!("p = {p} must be at least 2")));
    }
    if !(lambda < p * q) {
        return Err(Error::Precondition(format!(
            "lambda = {lambda} must be below p·q = {}",
            p * q
        )));
    }
    check_trajectory_start(states, zeta)?;
    let m_pq = mu.moment(p * q)?;
    let (c, alt_c, factor) = match variant {
        Lf2Variant::Plain => (m_pq / (p * q), mu.moment(2.0 * q).ok().map(|m| m / (2.0 * q)), 1.0),
        Lf2Variant::Exponential => (
            m_pq / (p * q - lambda),
            (lambda < 2.0 * q).then(|| m_pq / (2.0 * q - lambda)),
            m_pq,
        ),
    };
    let weight = |t: f64| match variant {
        Lf2Variant::Plain => 1.0,
        Lf2Variant::Exponential => (lambda * t).exp(),
    };
    let h = zeta.grid_step();
    let zeta_p = zeta.segment_norm().powf(p);
    let mut seg = zeta.clone();
    let mut tracker = NormPowTracker::new(mu, &seg, p)?;
    let mut check = LemmaCheck::new();

    let mut inner_prev = tracker.value(&seg);
    let mut x_prev = states[0].clone();
    let mut xp_prev = norm2(&x_prev).powf(p);
    let (mut lhs, mut rhs_int) = (0.0, 0.0);
    check.record(0.0, 0.0, c * zeta_p);
    if let Some(a) = alt_c {
        check.record_alt(a * zeta_p);
    }
    for (n, x) in states.iter().enumerate().skip(1) {
        tracker.advance(&x_prev, x);
        seg.push(x);
        let inner = tracker.value(&seg);
        let xp = norm2(x).powf(p);
        let t = n as f64 * h;
        let (w0, w1) = (weight(t - h), weight(t));
        lhs += 0.5 * h * (w0 * inner_prev + w1 * inner);
        rhs_int += 0.5 * h * (w0 * xp_prev + w1 * xp);
        check.record(t, lhs, c * zeta_p + factor * rhs_int);
        if let Some(a) = alt_c {
            check.record_alt(a * zeta_p + factor * rhs_int - lhs);
        }
        inner_prev = inner;
        xp_prev = xp;
        x_prev.clone_from(x);
    }
    Ok(check)
}
