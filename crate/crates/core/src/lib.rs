//! Simulation and bound verification for functional SDEs driven by
//! G-Brownian motion with infinite delay, posed in the fading-memory space `C_q`.
//!
//! The crate is organised bottom-up:
//!
//! - [`phase_space`]: history segments and the weighted sup-norm `‖·‖_q`.
//! - [`measures`]: delay measures (atoms plus exponential densities) and integration against segments.
//! - [`gbm`]: G-Brownian motion as a family of volatility scenarios, sublinear expectation and capacity.
//! - [`coefficients`]: affine coefficient functionals with an analytic A1 certificate, truncation.
//! - [`integrator`]: Euler–Maruyama simulation, coupled and truncated runs.
//! - [`bounds`]: theorem constants, feasibility conditions and λ windows.
//! - [`harness`]: configuration, experiments, verdicts and reports.

pub mod bounds;
pub mod coefficients;
pub mod error;
pub mod gbm;
pub mod harness;
pub mod integrator;
pub mod measures;
pub mod phase_space;
pub mod stats;

pub use error::{Error, Result};

/// Euclidean norm.
pub(crate) fn norm2(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
