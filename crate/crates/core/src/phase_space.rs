//! Fading-memory phase space `C_q((-∞,0]; R^d)`.
//!
//! A [`HistorySegment`] is a finite encoding of a history: uniformly spaced
//! grid samples on a buffered window `[-T_buf, 0]` plus a parametric
//! [`TailModel`] for `α ≤ -T_buf`. The norm is
//! `‖ψ‖_q = sup_{α≤0} e^{qα}|ψ(α)|`, evaluated as a sup over grid points
//! combined with the tail's weighted sup.

use std::collections::VecDeque;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::norm2;

/// Relative tolerance (w.r.t. the current norm) below which a sample leaving
/// the retention window may be absorbed into the tail.
pub const ABSORB_TOLERANCE: f64 = 1e-14;

/// Weight `e^{-qT}` below which history is treated as numerically irrelevant.
pub const NEGLIGIBLE_WEIGHT: f64 = 1e-12;

/// Relative tolerance used by the pathwise lemma checks.
pub const LEMMA_TOLERANCE: f64 = 1e-6;

/// One exponential term `coef · e^{rate·α}`; `rate = 0` is a constant.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TailTerm {
    pub coef: Vec<f64>,
    pub rate: f64,
}

/// Closed-form description of a history on `(-∞, -T_buf]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailModel {
    Zero,
    Constant { value: Vec<f64> },
    ExponentialDecay { value: Vec<f64>, rate: f64 },
    Mixture { terms: Vec<TailTerm> },
}

impl TailModel {
    pub fn constant(value: Vec<f64>) -> Self {
        TailModel::Constant { value }
    }

    pub fn exponential_decay(value: Vec<f64>, rate: f64) -> Self {
        TailModel::ExponentialDecay { value, rate }
    }

    /// Visits every term as `(coef, rate)`.
    pub fn for_each_term(&self, mut f: impl FnMut(&[f64], f64)) {
        match self {
            TailModel::Zero => {}
            TailModel::Constant { value } => f(value, 0.0),
            TailModel::ExponentialDecay { value, rate } => f(value, *rate),
            TailModel::Mixture { terms } => {
                for t in terms {
                    f(&t.coef, t.rate)
                }
            }
        }
    }

    pub fn terms(&self) -> Vec<TailTerm> {
        let mut out = Vec::new();
        self.for_each_term(|c, r| {
            out.push(TailTerm {
                coef: c.to_vec(),
                rate: r,
            })
        });
        out
    }

    pub fn term_count(&self) -> usize {
        let mut n = 0;
        self.for_each_term(|_, _| n += 1);
        n
    }

    /// Builds the simplest variant representing the sum of `terms`.
    /// Terms with equal rates are merged and zero terms dropped.
    pub fn from_terms(terms: Vec<TailTerm>) -> Self {
        let mut merged: Vec<TailTerm> = Vec::new();
        for t in terms {
            if let Some(m) = merged.iter_mut().find(|m| m.rate == t.rate) {
                for (a, b) in m.coef.iter_mut().zip(&t.coef) {
                    *a += b;
                }
            } else {
                merged.push(t);
            }
        }
        merged.retain(|t| t.coef.iter().any(|&c| c != 0.0));
        match merged.len() {
            0 => TailModel::Zero,
            1 => {
                let t = merged.pop().unwrap();
                if t.rate == 0.0 {
                    TailModel::Constant { value: t.coef }
                } else {
                    TailModel::ExponentialDecay {
                        value: t.coef,
                        rate: t.rate,
                    }
                }
            }
            _ => TailModel::Mixture { terms: merged },
        }
    }

    fn validate(&self, dim: usize, q: f64) -> Result<()> {
        let mut err = None;
        self.for_each_term(|c, r| {
            if err.is_some() {
                return;
            }
            if c.len() != dim {
                err = Some(Error::DimensionMismatch {
                    expected: dim,
                    got: c.len(),
                });
            } else if c.iter().any(|x| !x.is_finite()) || !r.is_finite() {
                err = Some(Error::InvalidSegment("non-finite tail term".into()));
            } else if r < -q {
                err = Some(Error::InvalidSegment(format!(
                    "tail rate {r} below -q = {}: e^(q·α)·ψ(α) would diverge",
                    -q
                )));
            }
        });
        err.map_or(Ok(()), Err)
    }

    /// The tail `α ↦ tail(α + shift)`, with the shift folded into the coefficients.
    pub fn shifted(&self, shift: f64) -> Self {
        if shift == 0.0 {
            return self.clone();
        }
        self.map_terms(|c, r| c * (r * shift).exp())
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map_terms(|c, _| a * c)
    }

    fn map_terms(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let terms = self
            .terms()
            .into_iter()
            .map(|t| TailTerm {
                coef: t.coef.iter().map(|&c| f(c, t.rate)).collect(),
                rate: t.rate,
            })
            .collect();
        TailModel::from_terms(terms)
    }

    /// Component `i` of the tail at `α` (with the tail evaluated at `α + shift`).
    #[inline]
    pub fn component(&self, alpha: f64, shift: f64, i: usize) -> f64 {
        let mut s = 0.0;
        self.for_each_term(|c, r| {
            s += if r == 0.0 {
                c[i]
            } else {
                c[i] * (r * (alpha + shift)).exp()
            };
        });
        s
    }

    pub fn value_into(&self, alpha: f64, shift: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.component(alpha, shift, i);
        }
    }

    /// `sup_{α ≤ -horizon} e^{qα}|tail(α + shift)|`.
    pub fn weighted_sup(&self, q: f64, horizon: f64, shift: f64) -> f64 {
        let terms = self.shifted(shift).terms();
        match terms.len() {
            0 => 0.0,
            1 => {
                let t = &terms[0];
                norm2(&t.coef) * (-(q + t.rate) * horizon).exp()
            }
            _ => mixture_sup(&terms, q, horizon),
        }
    }
}

/// Numerical sup of `u ↦ |Σ c_i e^{-(q+r_i)(T+u)}|` over `u ≥ 0`.
fn mixture_sup(terms: &[TailTerm], q: f64, horizon: f64) -> f64 {
    let dim = terms[0].coef.len();
    let mut buf = vec![0.0; dim];
    let mut eval = |u: f64| {
        buf.iter_mut().for_each(|b| *b = 0.0);
        for t in terms {
            let w = (-(q + t.rate) * (horizon + u)).exp();
            for (b, c) in buf.iter_mut().zip(&t.coef) {
                *b += c * w;
            }
        }
        norm2(&buf)
    };
    let mut limit = vec![0.0; dim];
    let mut kmin = f64::INFINITY;
    for t in terms {
        let k = q + t.rate;
        if k == 0.0 {
            for (l, c) in limit.iter_mut().zip(&t.coef) {
                *l += c;
            }
        } else {
            kmin = kmin.min(k);
        }
    }
    let limit = norm2(&limit);
    if !kmin.is_finite() {
        return eval(0.0).max(limit);
    }
    const N: usize = 4096;
    let umax = 60.0 / kmin;
    let grid = |j: usize| umax * (j as f64 / N as f64).powi(2);
    let (mut best_j, mut best) = (0, eval(0.0));
    for j in 1..=N {
        let v = eval(grid(j));
        if v > best {
            best = v;
            best_j = j;
        }
    }
    let (mut lo, mut hi) = (grid(best_j.saturating_sub(1)), grid((best_j + 1).min(N)));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        let (fa, fb) = (eval(a), eval(b));
        best = best.max(fa).max(fb);
        if fa > fb {
            hi = b;
        } else {
            lo = a;
        }
    }
    best.max(limit)
}

/// Initial data `ζ` in one of the closed forms supported by the config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// `ζ ≡ value`.
    Constant { value: Vec<f64> },
    /// `ζ(α) = value · e^{rate·α}` with `rate > 0`.
    ExpDecay { value: Vec<f64>, rate: f64 },
    /// Grid samples (oldest first, last one is `ζ(0)`) followed by a tail beyond them.
    Samples { values: Vec<Vec<f64>>, tail: TailModel },
}

impl InitialData {
    pub fn dim(&self) -> usize {
        match self {
            InitialData::Constant { value } | InitialData::ExpDecay { value, .. } => value.len(),
            InitialData::Samples { values, .. } => values.first().map_or(0, Vec::len),
        }
    }
}

/// A finite encoding of an element of `C_q`.
#[derive(Debug, Clone)]
pub struct HistorySegment {
    dim: usize,
    q: f64,
    grid_step: f64,
    /// Flattened samples, oldest first; the last `dim` entries are `ψ(0)`.
    buffer: VecDeque<f64>,
    tail: TailModel,
    t_anchor0: f64,
    steps: u64,
    retention: f64,
    /// `⌊retention / h⌋`.
    retention_steps: usize,
    norm: f64,
    decay: f64,
}

impl HistorySegment {
    /// Builds a segment from samples at `α = -(n-1)h, …, -h, 0` (oldest first)
    /// and a tail describing `α ≤ -(n-1)h`.
    pub fn new(
        dim: usize,
        q: f64,
        grid_step: f64,
        samples: Vec<Vec<f64>>,
        tail: TailModel,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSegment("dimension must be positive".into()));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidSegment(format!("q = {q} must be positive")));
        }
        if !(grid_step > 0.0 && grid_step.is_finite()) {
            return Err(Error::InvalidSegment(format!(
                "grid step {grid_step} must be positive"
            )));
        }
        if samples.is_empty() {
            return Err(Error::InvalidSegment("empty buffer".into()));
        }
        let mut buffer = VecDeque::with_capacity(samples.len() * dim);
        for (k, s) in samples.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.len(),
                });
            }
            if s.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidSegment(format!("sample {k} is not finite")));
            }
            buffer.extend(s.iter().copied());
        }
        tail.validate(dim, q)?;
        let mut seg = HistorySegment {
            dim,
            q,
            grid_step,
            buffer,
            tail,
            t_anchor0: 0.0,
            steps: 0,
            retention: 0.0,
            retention_steps: 0,
            norm: 0.0,
            decay: (-q * grid_step).exp(),
        };
        seg.norm = seg.segment_norm();
        Ok(seg.with_retention((1.0 / NEGLIGIBLE_WEIGHT).ln() / q))
    }

    /// The zero history.
    pub fn zero(dim: usize, q: f64, grid_step: f64) -> Result<Self> {
        Self::new(dim, q, grid_step, vec![vec![0.0; dim]], TailModel::Zero)
    }

    /// Sets the horizon beyond which samples become candidates for absorption.
    pub fn with_retention(mut self, retention: f64) -> Self {
        self.retention = retention;
        self.retention_steps = (retention / self.grid_step).floor().min(usize::MAX as f64) as usize;
        self
    }

    pub fn with_anchor(mut self, t_anchor: f64) -> Self {
        self.t_anchor0 = t_anchor - self.steps as f64 * self.grid_step;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }
    pub fn retention(&self) -> f64 {
        self.retention
    }
    /// Number of grid samples in the buffer.
    pub fn len(&self) -> usize {
        self.buffer.len() / self.dim
    }
    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }
    /// `T_buf`, the age of the oldest buffered sample.
    pub fn buffer_horizon(&self) -> f64 {
        (self.len() - 1) as f64 * self.grid_step
    }
    pub fn t_anchor(&self) -> f64 {
        self.t_anchor0 + self.steps as f64 * self.grid_step
    }
    /// Number of `push` calls since construction.
    pub fn elapsed_steps(&self) -> u64 {
        self.steps
    }
    fn tail_shift(&self) -> f64 {
        self.steps as f64 * self.grid_step
    }
    /// The tail as a function of the current segment coordinate `α`.
    pub fn tail(&self) -> TailModel {
        self.tail.shifted(self.tail_shift())
    }

    pub fn reserve(&mut self, samples: usize) {
        self.buffer.reserve(samples * self.dim);
    }

    /// Component `i` of the sample at `α = -k·h`.
    #[inline]
    pub fn component(&self, k: usize, i: usize) -> f64 {
        self.buffer[self.buffer.len() - (k + 1) * self.dim + i]
    }

    pub fn sample(&self, k: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.component(k, i)).collect()
    }

    pub fn head(&self) -> Vec<f64> {
        self.sample(0)
    }

    #[inline]
    pub fn head_into(&self, out: &mut [f64]) {
        let base = self.buffer.len() - self.dim;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.buffer[base + i];
        }
    }

    /// `ψ(α)`: nearest grid sample inside the buffer, the tail beyond it.
    pub fn value_into(&self, alpha: f64, out: &mut [f64]) {
        let k = (-alpha / self.grid_step).round();
        if k >= 0.0 && (k as usize) < self.len() {
            let k = k as usize;
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.component(k, i);
            }
        } else {
            self.tail.value_into(alpha, self.tail_shift(), out);
        }
    }

    pub fn value_at(&self, alpha: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.value_into(alpha, &mut out);
        out
    }

    /// Component `i` of the tail at `α`.
    #[inline]
    pub fn tail_component(&self, alpha: f64, i: usize) -> f64 {
        self.tail.component(alpha, self.tail_shift(), i)
    }

    /// The norm maintained incrementally by [`push`](Self::push); agrees with
    /// [`segment_norm`](Self::segment_norm) up to rounding.
    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// `‖ψ‖_q` recomputed directly from the buffer and the tail.
    pub fn segment_norm(&self) -> f64 {
        let n = self.len();
        let mut best: f64 = 0.0;
        let mut x = vec![0.0; self.dim];
        for k in 0..n {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = self.component(k, i);
            }
            let w = (-self.q * k as f64 * self.grid_step).exp();
            best = best.max(w * norm2(&x));
        }
        best.max(
            self.tail
                .weighted_sup(self.q, self.buffer_horizon(), self.tail_shift()),
        )
    }

    /// Appends `ψ(0) = value`, shifting every older sample one grid step into the past.
    pub fn push(&mut self, value: &[f64]) {
        debug_assert_eq!(value.len(), self.dim);
        self.norm = (self.norm * self.decay).max(norm2(value));
        for &v in value {
            self.buffer.push_back(v);
        }
        self.steps += 1;
        self.absorb();
    }

    /// Functional form of [`push`](Self::push).
    pub fn evolve(mut self, value: &[f64]) -> Self {
        self.push(value);
        self
    }

    fn absorb(&mut self) {
        loop {
            let n = self.len();
            if n <= 1 || n - 1 <= self.retention_steps {
                return;
            }
            let alpha = -((n - 1) as f64) * self.grid_step;
            if -alpha <= self.retention {
                return;
            }
            let mut diff = 0.0;
            for i in 0..self.dim {
                let d = self.buffer[i] - self.tail_component(alpha, i);
                diff += d * d;
            }
            if (self.q * alpha).exp() * diff.sqrt() > ABSORB_TOLERANCE * self.norm {
                return;
            }
            self.buffer.drain(..self.dim);
        }
    }

    /// `a · ψ`.
    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.buffer.iter_mut().for_each(|x| *x *= a);
        out.tail = self.tail.scaled(a);
        out.norm = self.norm * a.abs();
        out
    }

    /// `a · self + b · other`; both segments must share dimension, `q`, grid and buffer length.
    pub fn linear_combination(&self, a: f64, other: &HistorySegment, b: f64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        if self.q != other.q || self.grid_step != other.grid_step || self.len() != other.len() {
            return Err(Error::InvalidSegment(
                "segments differ in q, grid step or buffer length".into(),
            ));
        }
        let mut terms = self.tail().scaled(a).terms();
        terms.extend(other.tail().scaled(b).terms());
        let mut out = HistorySegment {
            dim: self.dim,
            q: self.q,
            grid_step: self.grid_step,
            buffer: self
                .buffer
                .iter()
                .zip(&other.buffer)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            tail: TailModel::from_terms(terms),
            t_anchor0: self.t_anchor(),
            steps: 0,
            retention: 0.0,
            retention_steps: 0,
            norm: 0.0,
            decay: self.decay,
        };
        out.norm = out.segment_norm();
        Ok(out.with_retention(self.retention.max(other.retention)))
    }
}

/// [`HistorySegment::segment_norm`] as a free function.
pub fn segment_norm(seg: &HistorySegment) -> f64 {
    seg.segment_norm()
}

/// [`HistorySegment::evolve`] as a free function.
pub fn evolve_segment(seg: HistorySegment, new_value: &[f64]) -> HistorySegment {
    seg.evolve(new_value)
}

/// Encodes initial data exactly: parametric forms keep a single buffered
/// sample `ζ(0)` and carry the rest in the tail.
pub fn from_initial_data(
    spec: &InitialData,
    q: f64,
    dim: usize,
    grid_step: f64,
) -> Result<HistorySegment> {
    if spec.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: spec.dim(),
        });
    }
    match spec {
        InitialData::Constant { value } => HistorySegment::new(
            dim,
            q,
            grid_step,
            vec![value.clone()],
            TailModel::constant(value.clone()),
        ),
        InitialData::ExpDecay { value, rate } => {
            if !(*rate > 0.0 && rate.is_finite()) {
                return Err(Error::InvalidInitialData(format!(
                    "exp_decay rate {rate} must be positive"
                )));
            }
            HistorySegment::new(
                dim,
                q,
                grid_step,
                vec![value.clone()],
                TailModel::exponential_decay(value.clone(), *rate),
            )
        }
        InitialData::Samples { values, tail } => {
            let mut bad = None;
            tail.for_each_term(|_, r| {
                if r < 0.0 {
                    bad = Some(r)
                }
            });
            if let TailModel::ExponentialDecay { rate, .. } = tail {
                if *rate <= 0.0 {
                    bad = Some(*rate);
                }
            }
            if let Some(r) = bad {
                return Err(Error::InvalidInitialData(format!(
                    "tail rate {r} must be positive"
                )));
            }
            HistorySegment::new(dim, q, grid_step, values.clone(), tail.clone()).map_err(|e| {
                match e {
                    Error::InvalidSegment(m) => Error::InvalidInitialData(m),
                    other => other,
                }
            })
        }
    }
}

/// Outcome of a pathwise inequality check.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaCheck {
    pub holds: bool,
    /// Minimum of `RHS − LHS` over all grid times.
    pub min_slack: f64,
    /// Time at which the minimum slack occurs.
    pub worst_time: f64,
    /// Minimum slack of the alternative (printed-statement) constant, when defined.
    pub alt_min_slack: Option<f64>,
    pub points: usize,
}

impl LemmaCheck {
    pub(crate) fn new() -> Self {
        LemmaCheck {
            holds: true,
            min_slack: f64::INFINITY,
            worst_time: 0.0,
            alt_min_slack: None,
            points: 0,
        }
    }

    pub(crate) fn record(&mut self, t: f64, lhs: f64, rhs: f64) {
        let slack = rhs - lhs;
        if slack < self.min_slack {
            self.min_slack = slack;
            self.worst_time = t;
        }
        if slack < -LEMMA_TOLERANCE * rhs.abs().max(1.0) || !slack.is_finite() {
            self.holds = false;
        }
        self.points += 1;
    }

    pub(crate) fn record_alt(&mut self, slack: f64) {
        self.alt_min_slack = Some(self.alt_min_slack.map_or(slack, |s: f64| s.min(slack)));
    }
}

pub(crate) fn check_trajectory_start(states: &[Vec<f64>], zeta: &HistorySegment) -> Result<()> {
    let first = states
        .first()
        .ok_or_else(|| Error::Precondition("empty trajectory".into()))?;
    let z0 = zeta.head();
    if first.len() != z0.len() {
        return Err(Error::DimensionMismatch {
            expected: z0.len(),
            got: first.len(),
        });
    }
    if first.iter().zip(&z0).any(|(a, b)| a != b) {
        return Err(Error::Precondition(
            "trajectory must start at X(0) = zeta(0)".into(),
        ));
    }
    Ok(())
}

/// Pathwise check of `‖X_t‖^p_q ≤ e^{-λt}‖ζ‖^p_q + sup_{0<s≤t}|X(s)|^p`
/// at every grid time. `states[n]` is `X(n·h)` with `h = zeta.grid_step()`.
pub fn check_lemma_lf3(
    states: &[Vec<f64>],
    zeta: &HistorySegment,
    p: f64,
    lambda: f64,
) -> Result<LemmaCheck> {
    if !(p >= 1.0) {
        return Err(Error::Precondition(format!("p = {p} must be at least 1")));
    }
    if !(lambda < p * zeta.q()) {
        return Err(Error::Precondition(format!(
            "lambda = {lambda} must be below p·q = {}",
            p * zeta.q()
        )));
    }
    check_trajectory_start(states, zeta)?;
    let h = zeta.grid_step();
    let zeta_p = zeta.segment_norm().powf(p);
    let mut seg = zeta.clone();
    let mut check = LemmaCheck::new();
    check.record(0.0, seg.norm().powf(p), zeta_p);
    let mut sup_p: f64 = 0.0;
    for (n, x) in states.iter().enumerate().skip(1) {
        seg.push(x);
        sup_p = sup_p.max(norm2(x).powf(p));
        let t = n as f64 * h;
        check.record(t, seg.norm().powf(p), (-lambda * t).exp() * zeta_p + sup_p);
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_sup(f: impl Fn(f64) -> f64, q: f64, lo: f64) -> f64 {
        let n = 2_000_000;
        (0..=n)
            .map(|j| {
                let a = lo * j as f64 / n as f64;
                (q * a).exp() * f(a).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_norm_is_abs_value() {
        let seg = HistorySegment::new(
            1,
            0.7,
            1e-3,
            vec![vec![-2.5]; 10],
            TailModel::constant(vec![-2.5]),
        )
        .unwrap();
        assert_eq!(seg.segment_norm(), 2.5);
        assert_eq!(seg.norm(), 2.5);
    }

    #[test]
    fn zero_segment_has_zero_norm() {
        let seg = HistorySegment::new(2, 1.0, 1e-3, vec![vec![0.0; 2]; 5], TailModel::Zero).unwrap();
        assert_eq!(seg.segment_norm(), 0.0);
    }

    #[test]
    fn growing_history_norm_matches_brute_force() {
        let q = 2.0;
        let h = 1e-3;
        let samples: Vec<Vec<f64>> = (0..=5000)
            .rev()
            .map(|k| vec![(k as f64 * h).exp()])
            .collect();
        let seg = HistorySegment::new(
            1,
            q,
            h,
            samples,
            TailModel::exponential_decay(vec![1.0], -1.0),
        )
        .unwrap();
        let oracle = brute_sup(|a| (-a).exp(), q, -40.0);
        assert!((seg.segment_norm() - oracle).abs() < 1e-6);
        assert!((seg.segment_norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_buffer_rejected() {
        assert!(matches!(
            HistorySegment::new(1, 1.0, 1e-3, vec![], TailModel::Zero),
            Err(Error::InvalidSegment(_))
        ));
    }

    #[test]
    fn tail_rate_below_minus_q_rejected() {
        let r = HistorySegment::new(
            1,
            1.0,
            1e-3,
            vec![vec![1.0]],
            TailModel::exponential_decay(vec![1.0], -1.5),
        );
        assert!(r.is_err());
    }

    #[test]
    fn initial_data_norms() {
        let c = from_initial_data(&InitialData::Constant { value: vec![1.0] }, 1.0, 1, 1e-3).unwrap();
        assert_eq!(c.segment_norm(), 1.0);
        for q in [0.1, 1.0, 3.0] {
            let e = from_initial_data(
                &InitialData::ExpDecay {
                    value: vec![1.0],
                    rate: 1.0,
                },
                q,
                1,
                1e-3,
            )
            .unwrap();
            let oracle = brute_sup(|a| a.exp(), q, -30.0);
            assert!((e.segment_norm() - oracle).abs() < 1e-9);
        }
        let z = from_initial_data(&InitialData::Constant { value: vec![0.0] }, 1.0, 1, 1e-3).unwrap();
        assert_eq!(z.segment_norm(), 0.0);
    }

    #[test]
    fn nonpositive_decay_rate_rejected() {
        for rate in [0.0, -0.5] {
            let r = from_initial_data(
                &InitialData::ExpDecay {
                    value: vec![1.0],
                    rate,
                },
                1.0,
                1,
                1e-3,
            );
            assert!(matches!(r, Err(Error::InvalidInitialData(_))));
        }
    }

    #[test]
    fn evolve_constant_stays_constant() {
        let seg = from_initial_data(&InitialData::Constant { value: vec![3.0] }, 1.0, 1, 1e-3).unwrap();
        let t0 = seg.t_anchor();
        let next = evolve_segment(seg, &[3.0]);
        assert_eq!(next.t_anchor(), t0 + 1e-3);
        for a in [0.0, -1e-3, -0.5, -10.0] {
            assert_eq!(next.value_at(a), vec![3.0]);
        }
        assert_eq!(next.segment_norm(), 3.0);
    }

    #[test]
    fn evolve_zero_segment_gets_single_head() {
        let seg = HistorySegment::zero(1, 1.0, 1e-3).unwrap().evolve(&[2.0]);
        assert_eq!(seg.head(), vec![2.0]);
        assert_eq!(seg.sample(1), vec![0.0]);
        assert_eq!(seg.value_at(-5.0), vec![0.0]);
        assert_eq!(seg.segment_norm(), 2.0);
    }

    #[test]
    fn exp_decay_tail_shifts_exactly() {
        let seg = from_initial_data(
            &InitialData::ExpDecay {
                value: vec![1.0],
                rate: 2.0,
            },
            1.0,
            1,
            1e-2,
        )
        .unwrap();
        let mut s = seg.clone();
        for _ in 0..50 {
            s.push(&[0.0]);
        }
        let v = s.value_at(-1.5)[0];
        assert!((v - (2.0 * -1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn cached_norm_tracks_direct_norm() {
        let mut seg = from_initial_data(
            &InitialData::ExpDecay {
                value: vec![1.0, -2.0],
                rate: 0.5,
            },
            0.8,
            2,
            1e-2,
        )
        .unwrap();
        for n in 0..500 {
            let t = n as f64 * 0.01;
            seg.push(&[t.sin() * 3.0, (2.0 * t).cos()]);
            let d = seg.segment_norm();
            assert!((seg.norm() - d).abs() <= 1e-12 * d.max(1.0));
        }
    }

    #[test]
    fn absorption_keeps_norm_and_values() {
        let mut seg = from_initial_data(&InitialData::Constant { value: vec![1.0] }, 5.0, 1, 1e-2)
            .unwrap()
            .with_retention(0.5);
        for _ in 0..200 {
            seg.push(&[1.0]);
        }
        assert!(seg.len() <= 52);
        assert_eq!(seg.segment_norm(), 1.0);
        assert_eq!(seg.value_at(-1.7), vec![1.0]);
    }

    #[test]
    fn nonmatching_samples_are_kept() {
        let mut seg = HistorySegment::zero(1, 5.0, 1e-2).unwrap().with_retention(0.5);
        seg.push(&[1.0]);
        for _ in 0..200 {
            seg.push(&[0.0]);
        }
        assert_eq!(seg.len(), 201);
        assert_eq!(seg.value_at(-2.0), vec![1.0]);
    }

    #[test]
    fn mixture_sup_matches_brute_force() {
        let tail = TailModel::from_terms(vec![
            TailTerm {
                coef: vec![1.0],
                rate: 0.0,
            },
            TailTerm {
                coef: vec![-3.0],
                rate: 1.0,
            },
        ]);
        let q = 0.5;
        let got = tail.weighted_sup(q, 0.0, 0.0);
        let oracle = brute_sup(|a| 1.0 - 3.0 * a.exp(), q, -60.0);
        assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
    }

    #[test]
    fn lf3_trivial_cases() {
        let z = HistorySegment::zero(1, 1.0, 1e-3).unwrap();
        let c = check_lemma_lf3(&vec![vec![0.0]; 100], &z, 2.0, 1.0).unwrap();
        assert!(c.holds);
        assert_eq!(c.min_slack, 0.0);

        let z = from_initial_data(&InitialData::Constant { value: vec![2.0] }, 1.0, 1, 1e-3).unwrap();
        let c = check_lemma_lf3(&vec![vec![2.0]; 100], &z, 2.0, 1.0).unwrap();
        assert!(c.holds);
        assert!(c.min_slack >= 0.0);
    }

    #[test]
    fn lf3_rejects_large_lambda() {
        let z = HistorySegment::zero(1, 1.0, 1e-3).unwrap();
        assert!(matches!(
            check_lemma_lf3(&[vec![0.0]], &z, 2.0, 2.0),
            Err(Error::Precondition(_))
        ));
    }
}
