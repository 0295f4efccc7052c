//! TOML configuration.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::bounds::{AuxConstants, EpsTriple};
use crate::coefficients::{build_linear_set, CoefficientSet, FunctionalParams};
use crate::error::{Error, Result};
use crate::gbm::{Control, ScenarioSet, VolatilityBand};
use crate::measures::DelayMeasure;
use crate::phase_space::InitialData;

/// The bundled configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../../configs/default.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub space: SpaceConfig,
    pub measures: BTreeMap<String, DelayMeasure>,
    pub coefficients: CoefficientsConfig,
    pub scenarios: ScenariosConfig,
    #[serde(default)]
    pub aux_constants: AuxConfig,
    pub experiments: ExperimentsConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub dim: usize,
    pub q: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalConfig {
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    /// `F(0)`; zero when omitted.
    #[serde(default)]
    pub c0: Option<Vec<f64>>,
    /// Key into `[measures]`.
    pub measure: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    pub drift: FunctionalConfig,
    pub qv_drift: FunctionalConfig,
    pub diffusion: FunctionalConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenariosConfig {
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    /// Constant-volatility levels evenly spaced over the band.
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Extra switching or feedback controls.
    #[serde(default)]
    pub controls: Vec<Control>,
}

fn default_levels() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxConfig {
    /// Defaults to `σ̄²`.
    pub k1: Option<f64>,
    /// Defaults to `2σ̄`.
    pub k2: Option<f64>,
    /// Horizon of the time-dependent constants; defaults to the last checkpoint.
    pub horizon: Option<f64>,
    /// Fixed `λ` for every theorem instead of `0.9 × window top`.
    pub lambda: Option<f64>,
    /// Fixed `(ε, ε₁, ε₂)`.
    pub eps: Option<[f64; 3]>,
    #[serde(default)]
    pub lambda_scan: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentsConfig {
    pub seed: u64,
    pub zeta: InitialData,
    pub xi: InitialData,
    pub checkpoints: Vec<f64>,
    pub paths: usize,
    #[serde(default = "all_experiments")]
    pub enabled: Vec<String>,
    pub lyapunov_paths: usize,
    pub lyapunov_horizon: f64,
    pub nonexplosion_levels: Vec<f64>,
    pub nonexplosion_horizon: f64,
    pub lemma_paths: usize,
    pub lemma_horizon: f64,
    pub truncation_seeds: usize,
    pub truncation_horizon: f64,
    pub markov_paths: usize,
    #[serde(default)]
    pub dump_trajectories: usize,
}

/// Experiment names in run order.
pub const EXPERIMENTS: [&str; 10] = [
    "ms_bound",
    "pair_convergence",
    "map_bound",
    "map_convergence",
    "l2_estimate",
    "lyapunov",
    "markov",
    "lemmas",
    "truncation",
    "nonexplosion",
];

fn all_experiments() -> Vec<String> {
    EXPERIMENTS.iter().map(|s| s.to_string()).collect()
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("bundled config is valid")
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let e = &self.experiments;
        if self.space.dim == 0 {
            return bad("space.dim must be positive".into());
        }
        if e.checkpoints.is_empty() || e.checkpoints.iter().any(|&t| !(t > 0.0)) {
            return bad("experiments.checkpoints must be positive and non-empty".into());
        }
        if e.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return bad("experiments.checkpoints must be strictly increasing".into());
        }
        for name in &e.enabled {
            if !EXPERIMENTS.contains(&name.as_str()) {
                return bad(format!("experiments.enabled: unknown experiment '{name}'"));
            }
        }
        for (field, n) in [("paths", e.paths), ("lyapunov_paths", e.lyapunov_paths), ("markov_paths", e.markov_paths)] {
            if n < 2 {
                return bad(format!("experiments.{field} = {n} must be at least 2"));
            }
        }
        if e.nonexplosion_levels.iter().any(|&m| !(m > 0.0)) {
            return bad("experiments.nonexplosion_levels must be positive".into());
        }
        for (name, d) in [("zeta", &e.zeta), ("xi", &e.xi)] {
            if d.dim() != self.space.dim {
                return bad(format!(
                    "experiments.{name} has dimension {}, space.dim is {}",
                    d.dim(),
                    self.space.dim
                ));
            }
        }
        Ok(())
    }

    fn functional(&self, name: &str, f: &FunctionalConfig) -> Result<FunctionalParams> {
        let measure = self.measures.get(&f.measure).ok_or_else(|| {
            Error::Config(format!("coefficients.{name}.measure: unknown measure '{}'", f.measure))
        })?;
        Ok(FunctionalParams {
            a: f.a,
            b: f.b,
            c0: f.c0.clone().unwrap_or_else(|| vec![0.0; self.space.dim]),
            measure: measure.clone(),
        })
    }

    pub fn coefficient_set(&self) -> Result<CoefficientSet> {
        let c = &self.coefficients;
        build_linear_set(
            self.functional("drift", &c.drift)?,
            self.functional("qv_drift", &c.qv_drift)?,
            self.functional("diffusion", &c.diffusion)?,
        )
    }

    pub fn band(&self) -> Result<VolatilityBand> {
        VolatilityBand::new(self.scenarios.sigma_lo, self.scenarios.sigma_hi)
    }

    pub fn scenario_set(&self) -> Result<ScenarioSet> {
        let mut set = ScenarioSet::constant_grid(self.band()?, self.scenarios.levels, self.space.dt)?;
        for c in &self.scenarios.controls {
            set.push(c.clone())?;
        }
        Ok(set)
    }

    pub fn last_checkpoint(&self) -> f64 {
        *self.experiments.checkpoints.last().expect("validated non-empty")
    }

    pub fn aux(&self) -> AuxConstants {
        let hi = self.scenarios.sigma_hi;
        let a = &self.aux_constants;
        AuxConstants {
            k1: a.k1.unwrap_or(hi * hi),
            k2: a.k2.unwrap_or(2.0 * hi),
            horizon: a.horizon.unwrap_or_else(|| self.last_checkpoint()),
        }
    }

    pub fn eps_override(&self) -> Option<EpsTriple> {
        self.aux_constants.eps.map(|[eps, eps1, eps2]| EpsTriple { eps, eps1, eps2 })
    }
}
