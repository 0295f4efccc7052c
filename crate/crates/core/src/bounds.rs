//! Explicit constants of the moment, map and exponential estimates, their
//! feasibility windows, and the choice of `λ` and `ε`.
//!
//! Every formula depends on the certificate only through `λ₁..λ₅` and the
//! moments `μᵢ^(2q)`.

use std::fmt::Write as _;

use crate::coefficients::{A1Certificate, CoefficientSet};
use crate::error::{Error, Result};

/// `λ₁..λ₅`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lambdas {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
}

impl From<&A1Certificate> for Lambdas {
    fn from(c: &A1Certificate) -> Self {
        Lambdas {
            l1: c.lambda1,
            l2: c.lambda2,
            l3: c.lambda3,
            l4: c.lambda4,
            l5: c.lambda5,
        }
    }
}

/// `μ₁^(2q), μ₂^(2q), μ₃^(2q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
}

impl Moments {
    /// Fails with the offending measure when one is not in `N_{2q}`.
    pub fn from_certificate(cert: &A1Certificate, q: f64) -> Result<Self> {
        let m = 2.0 * q;
        let get = |name: &str, mu: &crate::measures::DelayMeasure| {
            mu.moment(m).map_err(|e| Error::Infeasible(format!("{name}: {e}")))
        };
        Ok(Moments {
            mu1: get("mu1", &cert.mu1)?,
            mu2: get("mu2", &cert.mu2)?,
            mu3: get("mu3", &cert.mu3)?,
        })
    }
}

/// `|g(0)|², |h(0)|², |γ(0)|²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Offsets {
    pub g0_sq: f64,
    pub h0_sq: f64,
    pub gamma0_sq: f64,
}

impl Offsets {
    pub fn from_set(set: &CoefficientSet) -> Self {
        Offsets {
            g0_sq: set.drift.offset_sq(),
            h0_sq: set.qv_drift.offset_sq(),
            gamma0_sq: set.diffusion.offset_sq(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxConstants {
    pub k1: f64,
    pub k2: f64,
    /// Horizon for the time-dependent constants.
    pub horizon: f64,
}

impl AuxConstants {
    /// `k₁ = σ̄²`, `k₂ = 2σ̄`.
    pub fn from_sigma_hi(sigma_hi: f64, horizon: f64) -> Self {
        AuxConstants {
            k1: sigma_hi * sigma_hi,
            k2: 2.0 * sigma_hi,
            horizon,
        }
    }

    pub fn k3(&self) -> f64 {
        self.k2 * self.k2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsTriple {
    pub eps: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl EpsTriple {
    pub fn uniform(e: f64) -> Self {
        EpsTriple { eps: e, eps1: e, eps2: e }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theorem {
    MeanSquare,
    MapBound,
    MapConvergence,
}

impl Theorem {
    pub const ALL: [Theorem; 3] = [Theorem::MeanSquare, Theorem::MapBound, Theorem::MapConvergence];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::MeanSquare => "mean_square",
            Theorem::MapBound => "map_bound",
            Theorem::MapConvergence => "map_convergence",
        }
    }
}

/// Admissible `λ` range `(0, top)` with `top = min(surplus, 2q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub theorem: Theorem,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs − rhs`.
    pub surplus: f64,
    pub top: f64,
    pub feasible: bool,
}

impl Window {
    fn new(theorem: Theorem, lhs: f64, rhs: f64, q: f64) -> Self {
        let surplus = lhs - rhs;
        Window {
            theorem,
            lhs,
            rhs,
            surplus,
            top: surplus.min(2.0 * q),
            feasible: lhs > rhs,
        }
    }

    pub fn contains(&self, lambda: f64) -> bool {
        self.feasible && lambda > 0.0 && lambda < self.top
    }

    pub fn require(&self) -> Result<()> {
        if self.feasible {
            Ok(())
        } else {
            Err(Error::Infeasible(format!(
                "{} condition fails: {} > {} is false",
                self.theorem.name(),
                self.lhs,
                self.rhs
            )))
        }
    }
}

/// `0.9 × top`.
pub fn default_lambda(w: &Window) -> Result<f64> {
    w.require()?;
    Ok(0.9 * w.top)
}

/// `n` evenly spaced interior points of the window.
pub fn lambda_scan(w: &Window, n: usize) -> Result<Vec<f64>> {
    w.require()?;
    Ok((1..=n).map(|i| w.top * i as f64 / (n + 1) as f64).collect())
}

/// Everything the constants depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub lambdas: Lambdas,
    pub moments: Moments,
    pub offsets: Offsets,
    pub aux: AuxConstants,
    pub q: f64,
}

impl BoundInputs {
    pub fn new(set: &CoefficientSet, q: f64, aux: AuxConstants) -> Result<Self> {
        Ok(BoundInputs {
            lambdas: Lambdas::from(&set.certificate),
            moments: Moments::from_certificate(&set.certificate, q)?,
            offsets: Offsets::from_set(set),
            aux,
            q,
        })
    }

    fn two_q(&self) -> f64 {
        2.0 * self.q
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        if !(lambda > 0.0) {
            return Err(Error::Precondition(format!("lambda = {lambda} must be positive")));
        }
        if lambda >= self.two_q() {
            return Err(Error::DivisionDomain {
                lambda,
                two_q: self.two_q(),
            });
        }
        Ok(())
    }

    /// `2λ₁ + 2k₁λ₃ − 2λ₂μ₁ − 2k₁λ₄μ₂ − k₁λ₅μ₃`.
    fn ms_surplus(&self) -> f64 {
        let (l, m, k1) = (&self.lambdas, &self.moments, self.aux.k1);
        2.0 * l.l1 + 2.0 * k1 * l.l3 - 2.0 * l.l2 * m.mu1 - 2.0 * k1 * l.l4 * m.mu2 - k1 * l.l5 * m.mu3
    }

    pub fn window(&self, theorem: Theorem) -> Window {
        let (l, m, k1, k3) = (&self.lambdas, &self.moments, self.aux.k1, self.aux.k3());
        let lhs = 2.0 * l.l1;
        let rhs = match theorem {
            Theorem::MeanSquare => {
                2.0 * l.l2 * m.mu1 + 2.0 * k1 * l.l4 * m.mu2 + k1 * l.l5 * m.mu3 - 2.0 * k1 * l.l3
            }
            Theorem::MapBound => {
                2.0 * l.l2 * m.mu1 + 1.0 + 2.0 * k1 * l.l4 * m.mu2 - 2.0 * k1 * l.l3
                    + k1
                    + 2.0 * (k1 * m.mu2 + 2.0 * k3 * m.mu3) * l.l5
            }
            Theorem::MapConvergence => {
                2.0 * l.l2 * m.mu1 - 2.0 * k1 * l.l3
                    + 2.0 * k1 * l.l4 * m.mu2
                    + (k1 + 2.0 * k3) * m.mu3 * l.l5
            }
        };
        Window::new(theorem, lhs, rhs, self.q)
    }

    pub fn feasibility(&self) -> [Window; 3] {
        Theorem::ALL.map(|t| self.window(t))
    }

    /// `surplus − λ − ε − k₁ε₁ − k₁λ₅μ₃(1/(1−ε₂) − 1)`; must be positive.
    pub fn eps_residual(&self, lambda: f64, e: &EpsTriple) -> f64 {
        let k1 = self.aux.k1;
        self.ms_surplus()
            - lambda
            - e.eps
            - k1 * e.eps1
            - k1 * self.lambdas.l5 * self.moments.mu3 * (1.0 / (1.0 - e.eps2) - 1.0)
    }

    /// `ε = ε₁ = ε₂ = min(0.05·(surplus − λ), 0.5)`, halved until the residual is positive.
    pub fn default_eps(&self, lambda: f64) -> Result<EpsTriple> {
        let mut e = (0.05 * (self.ms_surplus() - lambda)).min(0.5);
        if !(e > 0.0) {
            return Err(Error::InfeasibleEpsilon {
                residual: self.ms_surplus() - lambda,
            });
        }
        for _ in 0..64 {
            let t = EpsTriple::uniform(e);
            if self.eps_residual(lambda, &t) > 0.0 {
                return Ok(t);
            }
            e /= 2.0;
        }
        Err(Error::InfeasibleEpsilon {
            residual: self.eps_residual(lambda, &EpsTriple::uniform(e)),
        })
    }

    /// `(K₁, K₂, K₃)` of the non-explosion argument.
    pub fn k1_k2_k3_global(&self, zeta_norm_sq: f64, x0_sq: f64) -> (f64, f64, f64) {
        let (l, m, o, k1) = (&self.lambdas, &self.moments, &self.offsets, self.aux.k1);
        let big_k1 = x0_sq + (o.g0_sq + k1 * o.h0_sq + 2.0 * k1 * o.gamma0_sq) * self.aux.horizon;
        let big_k2 = big_k1
            + (l.l2 * m.mu1 + k1 * l.l4 * m.mu2 + k1 * l.l5 * m.mu3) * zeta_norm_sq / self.q;
        let big_k3 = k1 + 1.0 - 2.0 * l.l1 + 2.0 * l.l2 - 2.0 * k1 * l.l3 + 2.0 * k1 * l.l4 + 2.0 * k1 * l.l5;
        (big_k1, big_k2, big_k3)
    }

    /// `(K₄, K₅)`; the ε-triple must leave a positive residual.
    pub fn k4_k5(&self, lambda: f64, e: &EpsTriple, zeta_norm_sq: f64, x0_sq: f64) -> Result<(f64, f64)> {
        self.check_lambda(lambda)?;
        for v in [e.eps, e.eps1, e.eps2] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Precondition(format!("epsilon {v} must lie in (0, 1)")));
            }
        }
        let residual = self.eps_residual(lambda, e);
        if !(residual > 0.0) {
            return Err(Error::InfeasibleEpsilon { residual });
        }
        let (l, m, o, k1) = (&self.lambdas, &self.moments, &self.offsets, self.aux.k1);
        let k4 = (o.g0_sq / e.eps + k1 * o.h0_sq / e.eps1 + k1 * o.gamma0_sq / e.eps2) / lambda;
        let d = self.two_q() - lambda;
        let k5 = x0_sq
            + (2.0 * l.l2 * m.mu1 + 2.0 * k1 * l.l4 * m.mu2) / d * zeta_norm_sq
            + k1 * l.l5 * m.mu3 / (d * (1.0 - e.eps2)) * zeta_norm_sq;
        Ok((k4, k5))
    }

    pub fn k6(&self, lambda: f64) -> Result<f64> {
        self.check_lambda(lambda)?;
        let (l, m, k1) = (&self.lambdas, &self.moments, self.aux.k1);
        Ok(1.0
            + (2.0 * l.l2 * m.mu1 + 2.0 * k1 * l.l4 * m.mu2 + k1 * l.l5 * m.mu3) / (self.two_q() - lambda))
    }

    pub fn k7_k8(&self, lambda: f64) -> Result<(f64, f64)> {
        self.check_lambda(lambda)?;
        let (l, m, o, k1, k3) = (&self.lambdas, &self.moments, &self.offsets, self.aux.k1, self.aux.k3());
        let k7 = 2.0 / lambda * (o.g0_sq + k1 * o.h0_sq + 2.0 * (k1 + 2.0 * k3) * o.gamma0_sq);
        let k8 = 3.0
            + 4.0 / (self.two_q() - lambda)
                * (l.l2 * m.mu1 + k1 * (l.l4 + l.l5) * m.mu2 + 2.0 * k3 * l.l5 * m.mu3);
        Ok((k7, k8))
    }

    pub fn k9(&self, lambda: f64) -> Result<f64> {
        self.check_lambda(lambda)?;
        let (l, m, k1, k3) = (&self.lambdas, &self.moments, self.aux.k1, self.aux.k3());
        Ok(1.0
            + 4.0 / (self.two_q() - lambda)
                * (l.l2 * m.mu1 + k1 * (2.0 * l.l4 * m.mu2 + l.l5 * m.mu3) + k3 * l.l5 * m.mu3))
    }

    /// `(K̂, L₁, L₂, M)`.
    pub fn l1_l2_m(&self, zeta_norm_sq: f64) -> Result<(f64, f64, f64, f64)> {
        if !(self.aux.horizon > 0.0) {
            return Err(Error::Precondition(format!("horizon {} must be positive", self.aux.horizon)));
        }
        let (l, m, o, k1, k3) = (&self.lambdas, &self.moments, &self.offsets, self.aux.k1, self.aux.k3());
        let k_hat = 2.0 * (o.g0_sq + k1 * (o.h0_sq + 2.0 * o.gamma0_sq) + 4.0 * k3 * o.gamma0_sq) * self.aux.horizon;
        let l1 = k_hat
            + 2.0 / self.q
                * (self.q + l.l2 * m.mu1 + k1 * (l.l5 * m.mu3 + m.mu2) + 2.0 * k3 * l.l5 * m.mu3)
                * zeta_norm_sq;
        let big_m = 2.0 * l.l2 - 2.0 * l.l1 + 1.0 + k1 * (2.0 * l.l5 - 2.0 * l.l3 + 3.0) + 4.0 * k3 * l.l5;
        let l2 = 2.0 * (2.0 * l.l2 - 2.0 * l.l1 + 1.0 + k1 * (2.0 * l.l5 - 2.0 * l.l3 + 3.0) + 4.0 * k3 * l.l5);
        debug_assert_eq!(big_m * 2.0, l2);
        Ok((k_hat, l1, l2, big_m))
    }
}

/// `K₂e^{K₃T}/m²`.
pub fn capacity_bound(k2: f64, k3: f64, horizon: f64, m: f64) -> f64 {
    k2 * (k3 * horizon).exp() / (m * m)
}

/// λ and constants for one feasible theorem.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremBound {
    pub window: Window,
    pub lambda: Option<f64>,
    /// Named constants, in print order.
    pub constants: Vec<(&'static str, f64)>,
    pub note: Option<String>,
}

impl TheoremBound {
    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|(n, _)| *n == name).map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub zeta_norm_sq: f64,
    pub x0_sq: f64,
    pub global: (f64, f64, f64),
    pub eps: Option<EpsTriple>,
    pub mean_square: TheoremBound,
    pub map_bound: TheoremBound,
    pub map_convergence: TheoremBound,
    pub k_hat: f64,
    pub l1: f64,
    pub l2: f64,
    pub m: f64,
}

impl BoundReport {
    /// Evaluates every constant at the default `λ` and `ε` of each feasible theorem.
    pub fn compute(inputs: BoundInputs, zeta_norm_sq: f64, x0_sq: f64) -> Result<Self> {
        Self::compute_with(inputs, zeta_norm_sq, x0_sq, None, None)
    }

    /// As [`compute`](Self::compute) with a fixed `λ` and/or `ε`-triple.
    /// A fixed `λ` outside a feasible window is an error.
    pub fn compute_with(
        inputs: BoundInputs,
        zeta_norm_sq: f64,
        x0_sq: f64,
        lambda: Option<f64>,
        eps_override: Option<EpsTriple>,
    ) -> Result<Self> {
        let global = inputs.k1_k2_k3_global(zeta_norm_sq, x0_sq);
        let (k_hat, l1, l2, m) = inputs.l1_l2_m(zeta_norm_sq)?;
        let mut eps = None;
        let mut build = |t: Theorem| -> Result<TheoremBound> {
            let window = inputs.window(t);
            let mut out = TheoremBound {
                window: window.clone(),
                lambda: None,
                constants: Vec::new(),
                note: None,
            };
            if !window.feasible {
                out.note = Some(format!("condition {} > {} fails", window.lhs, window.rhs));
                return Ok(out);
            }
            let lambda = match lambda {
                Some(l) if !window.contains(l) => {
                    return Err(Error::Precondition(format!(
                        "lambda = {l} lies outside the {} window (0, {})",
                        t.name(),
                        window.top
                    )))
                }
                Some(l) => l,
                None => default_lambda(&window)?,
            };
            out.lambda = Some(lambda);
            match t {
                Theorem::MeanSquare => {
                    let e = match eps_override {
                        Some(e) => e,
                        None => inputs.default_eps(lambda)?,
                    };
                    let (k4, k5) = inputs.k4_k5(lambda, &e, zeta_norm_sq, x0_sq)?;
                    eps = Some(e);
                    out.constants = vec![("K4", k4), ("K5", k5), ("K6", inputs.k6(lambda)?)];
                }
                Theorem::MapBound => {
                    let (k7, k8) = inputs.k7_k8(lambda)?;
                    out.constants = vec![("K7", k7), ("K8", k8)];
                    out.note = Some("K8 multiplies E||zeta||^2 in the derivation".into());
                }
                Theorem::MapConvergence => {
                    out.constants = vec![("K9", inputs.k9(lambda)?)];
                    out.note = Some("decay uses lambda; the statement writes lambda-hat".into());
                }
            }
            Ok(out)
        };
        let mean_square = build(Theorem::MeanSquare)?;
        let map_bound = build(Theorem::MapBound)?;
        let map_convergence = build(Theorem::MapConvergence)?;
        Ok(BoundReport {
            inputs,
            zeta_norm_sq,
            x0_sq,
            global,
            eps,
            mean_square,
            map_bound,
            map_convergence,
            k_hat,
            l1,
            l2,
            m,
        })
    }

    pub fn theorem(&self, t: Theorem) -> &TheoremBound {
        match t {
            Theorem::MeanSquare => &self.mean_square,
            Theorem::MapBound => &self.map_bound,
            Theorem::MapConvergence => &self.map_convergence,
        }
    }

    /// Rows `(section, name, value)`.
    pub fn rows(&self) -> Vec<(String, String, f64)> {
        let mut rows = Vec::new();
        let mut push = |s: &str, n: &str, v: f64| rows.push((s.to_string(), n.to_string(), v));
        let i = &self.inputs;
        push("inputs", "q", i.q);
        push("inputs", "k1", i.aux.k1);
        push("inputs", "k2", i.aux.k2);
        push("inputs", "k3", i.aux.k3());
        push("inputs", "T", i.aux.horizon);
        for (n, v) in [
            ("lambda1", i.lambdas.l1),
            ("lambda2", i.lambdas.l2),
            ("lambda3", i.lambdas.l3),
            ("lambda4", i.lambdas.l4),
            ("lambda5", i.lambdas.l5),
            ("mu1_2q", i.moments.mu1),
            ("mu2_2q", i.moments.mu2),
            ("mu3_2q", i.moments.mu3),
            ("zeta_norm_sq", self.zeta_norm_sq),
            ("x0_sq", self.x0_sq),
        ] {
            push("inputs", n, v);
        }
        push("global", "K1", self.global.0);
        push("global", "K2", self.global.1);
        push("global", "K3", self.global.2);
        for t in Theorem::ALL {
            let b = self.theorem(t);
            push(t.name(), "feasible", f64::from(u8::from(b.window.feasible)));
            push(t.name(), "surplus", b.window.surplus);
            push(t.name(), "window_top", b.window.top);
            if let Some(l) = b.lambda {
                push(t.name(), "lambda", l);
            }
            for &(n, v) in &b.constants {
                push(t.name(), n, v);
            }
        }
        if let Some(e) = self.eps {
            push("mean_square", "eps", e.eps);
            push("mean_square", "eps1", e.eps1);
            push("mean_square", "eps2", e.eps2);
        }
        push("l2_estimate", "K_hat", self.k_hat);
        push("l2_estimate", "L1", self.l1);
        push("l2_estimate", "L2", self.l2);
        push("lyapunov", "M", self.m);
        rows
    }

    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["section", "name", "value"])?;
        for (s, n, v) in self.rows() {
            out.write_record([s, n, v.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let i = &self.inputs;
        let _ = writeln!(s, "Bound report");
        let _ = writeln!(
            s,
            "  q = {}, k1 = {}, k2 = {}, k3 = {}, T = {}",
            i.q,
            i.aux.k1,
            i.aux.k2,
            i.aux.k3(),
            i.aux.horizon
        );
        let l = &i.lambdas;
        let _ = writeln!(
            s,
            "  lambda1..5 = {:.6}, {:.6}, {:.6}, {:.6}, {:.6}",
            l.l1, l.l2, l.l3, l.l4, l.l5
        );
        let m = &i.moments;
        let _ = writeln!(s, "  mu^(2q) = {:.6}, {:.6}, {:.6}", m.mu1, m.mu2, m.mu3);
        let _ = writeln!(
            s,
            "  global: K1 = {:.6}, K2 = {:.6}, K3 = {:.6}",
            self.global.0, self.global.1, self.global.2
        );
        for t in Theorem::ALL {
            let b = self.theorem(t);
            let _ = write!(
                s,
                "  {}: {} (lhs {:.6}, rhs {:.6}, window (0, {:.6}))",
                t.name(),
                if b.window.feasible { "feasible" } else { "INFEASIBLE" },
                b.window.lhs,
                b.window.rhs,
                b.window.top
            );
            if let Some(lam) = b.lambda {
                let _ = write!(s, " lambda = {lam:.6}");
            }
            for (n, v) in &b.constants {
                let _ = write!(s, " {n} = {v:.6}");
            }
            if let Some(note) = &b.note {
                let _ = write!(s, " [{note}]");
            }
            s.push('\n');
        }
        if let Some(e) = self.eps {
            let _ = writeln!(s, "  eps = {}, eps1 = {}, eps2 = {}", e.eps, e.eps1, e.eps2);
        }
        let _ = writeln!(
            s,
            "  K_hat = {:.6}, L1 = {:.6}, L2 = {:.6}, M = {:.6}",
            self.k_hat, self.l1, self.l2, self.m
        );
        if self.l2 < 0.0 {
            let _ = writeln!(s, "  note: L2 < 0, the Gronwall envelope is not a valid bound");
        }
        s
    }
}
