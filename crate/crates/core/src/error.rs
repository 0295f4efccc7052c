//! Error type shared by every module.

use crate::integrator::TrajectoryRecord;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("measure is not in N_{m}: density rate {rate} must exceed {m}")]
    NotInClass { m: f64, rate: f64 },
    #[error("tail integral diverges: p*rate + rho = {exponent} must be positive")]
    DivergentTail { exponent: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid volatility band: {0}")]
    InvalidBand(String),
    #[error("insufficient sample: need at least 2 paths, got {0}")]
    InsufficientSample(usize),
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("uncertifiable drift: lambda1 = a_g - |b_g|/2 = {lambda1} must be positive")]
    UncertifiableDrift { lambda1: f64 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("numerical blowup at step {step}")]
    NumericalBlowup {
        step: usize,
        partial: Option<Box<TrajectoryRecord>>,
    },
    #[error("division domain: lambda = {lambda} must be below 2q = {two_q}")]
    DivisionDomain { lambda: f64, two_q: f64 },
    #[error("infeasible epsilon triple: residual {residual} must be positive")]
    InfeasibleEpsilon { residual: f64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
