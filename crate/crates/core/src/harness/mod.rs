//! Configuration, experiment orchestration and report emission.
//!
//! A [`Harness`] owns one resolved configuration. Experiments that read the
//! same simulated paths share them: the single-path statistics feed
//! `ms_bound`, `map_bound`, `l2_estimate` and `nonexplosion`, and the coupled
//! pairs feed `pair_convergence` and `map_convergence`. Each cache is filled
//! on first use.

pub mod config;
mod experiments;
pub mod report;

use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::bounds::{BoundInputs, BoundReport, Theorem};
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::gbm::{mesh_steps, PathSeed, ScenarioSet};
use crate::integrator::{simulate, simulate_pair, SimConfig};
use crate::norm2;
use crate::phase_space::InitialData;
use crate::stats::{MeanEstimate, ScenarioMax};

pub use config::{Config, DEFAULT_CONFIG, EXPERIMENTS};
pub use report::{summary, CheckRow, Verdict, SE_MARGIN};

/// Offsets added to the master seed so that experiments draw distinct noise.
mod stream {
    pub const SINGLE: u64 = 0;
    pub const PAIRS: u64 = 1;
    pub const LYAPUNOV: u64 = 2;
    pub const MARKOV: u64 = 3;
    pub const LEMMAS: u64 = 4;
    pub const TRUNCATION: u64 = 5;
}

/// Per-path samples at each probe time, per scenario.
#[derive(Debug, Clone)]
pub(crate) struct ProbeSamples {
    pub times: Vec<f64>,
    /// `[scenario][probe][statistic][path]`.
    pub values: Vec<Vec<Vec<Vec<f64>>>>,
}

impl ProbeSamples {
    fn probe(&self, t: f64) -> usize {
        self.times
            .iter()
            .position(|&s| (s - t).abs() < 1e-9)
            .expect("probe time was registered")
    }

    /// Scenario-max of the mean of statistic `stat` at time `t`.
    pub fn scenario_max(&self, t: f64, stat: usize) -> Result<ScenarioMax> {
        let k = self.probe(t);
        let means = self
            .values
            .iter()
            .map(|s| MeanEstimate::from_samples(&s[k][stat]))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScenarioMax::from_means(means))
    }

    pub fn paths(&self, t: f64, stat: usize) -> impl Iterator<Item = &[f64]> {
        let k = self.probe(t);
        self.values.iter().map(move |s| s[k][stat].as_slice())
    }
}

/// Statistic indices of the single-path cache.
pub(crate) mod single {
    /// `|X(t)|²`.
    pub const X_SQ: usize = 0;
    /// `‖X_t‖²_q`.
    pub const NORM_SQ: usize = 1;
    /// `sup_{0≤s≤t}|X(s)|`.
    pub const SUP_ABS: usize = 2;
}

/// Statistic indices of the pair cache.
pub(crate) mod pair {
    /// `|X(t) − Y(t)|²`.
    pub const DIFF_SQ: usize = 0;
    /// `‖X_t − Y_t‖²_q`.
    pub const DIFF_NORM_SQ: usize = 1;
}

pub struct Harness {
    pub config: Config,
    pub set: CoefficientSet,
    pub scenarios: ScenarioSet,
    pub inputs: BoundInputs,
    pub report: BoundReport,
    /// `‖ζ‖²_q`.
    pub zeta_norm_sq: f64,
    /// `‖ζ − ξ‖²_q`.
    pub diff_norm_sq: f64,
    single: OnceLock<ProbeSamples>,
    pairs: OnceLock<ProbeSamples>,
}

impl Harness {
    /// Builds the coefficient set, scenarios and bound report; fails on an
    /// invalid configuration or a measure outside `N_{2q}`.
    pub fn new(config: Config) -> Result<Self> {
        let set = config.coefficient_set()?;
        let scenarios = config.scenario_set()?;
        let inputs = BoundInputs::new(&set, config.space.q, config.aux())?;
        let e = &config.experiments;
        let probe = SimConfig::new(1.0, config.space.dt, config.space.q, set.clone(), e.zeta.clone());
        let zeta = probe.initial_segment(&e.zeta)?;
        let xi = probe.initial_segment(&e.xi)?;
        let zeta_norm_sq = zeta.segment_norm().powi(2);
        let diff_norm_sq = zeta.linear_combination(1.0, &xi, -1.0)?.segment_norm().powi(2);
        let x0_sq = norm2(&zeta.head()).powi(2);
        let report = BoundReport::compute_with(
            inputs,
            zeta_norm_sq,
            x0_sq,
            config.aux_constants.lambda,
            config.eps_override(),
        )?;
        let h = Harness {
            config,
            set,
            scenarios,
            inputs,
            report,
            zeta_norm_sq,
            diff_norm_sq,
            single: OnceLock::new(),
            pairs: OnceLock::new(),
        };
        h.sim_config(h.horizon(), h.config.experiments.zeta.clone()).validate()?;
        Ok(h)
    }

    pub fn bundled() -> Result<Self> {
        Self::new(Config::bundled())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(Config::load(path)?)
    }

    pub fn seed(&self, offset: u64) -> u64 {
        self.config.experiments.seed.wrapping_add(offset)
    }

    pub fn checkpoints(&self) -> &[f64] {
        &self.config.experiments.checkpoints
    }

    fn horizon(&self) -> f64 {
        self.config.last_checkpoint().max(self.config.experiments.nonexplosion_horizon)
    }

    pub fn sim_config(&self, horizon: f64, initial: InitialData) -> SimConfig {
        SimConfig::new(horizon, self.config.space.dt, self.config.space.q, self.set.clone(), initial)
    }

    /// `λ` used for `theorem`, or the failed condition.
    pub fn lambda(&self, theorem: Theorem) -> Result<f64> {
        let b = self.report.theorem(theorem);
        b.window.require()?;
        b.lambda
            .ok_or_else(|| Error::Infeasible(format!("no lambda for {}", theorem.name())))
    }

    /// Probe grid: the recording stride divides every probe step.
    fn probe_plan(&self, times: &[f64]) -> Result<(f64, usize, Vec<usize>)> {
        let dt = self.config.space.dt;
        let steps = times.iter().map(|&t| mesh_steps(t, dt)).collect::<Result<Vec<_>>>()?;
        let stride = steps.iter().fold(0, |g, &s| gcd(g, s));
        let horizon = times.iter().copied().fold(0.0, f64::max);
        Ok((horizon, stride, steps))
    }

    fn probe_times(&self) -> Vec<f64> {
        let mut t = self.checkpoints().to_vec();
        let tn = self.config.experiments.nonexplosion_horizon;
        if !t.iter().any(|&s| (s - tn).abs() < 1e-9) {
            t.push(tn);
        }
        t.sort_by(f64::total_cmp);
        t
    }

    pub(crate) fn single_stats(&self) -> Result<&ProbeSamples> {
        if let Some(s) = self.single.get() {
            return Ok(s);
        }
        let times = self.probe_times();
        let (horizon, stride, steps) = self.probe_plan(&times)?;
        let mut cfg = self.sim_config(horizon, self.config.experiments.zeta.clone());
        cfg.record_stride = stride;
        let n = self.config.experiments.paths;
        let seed = self.seed(stream::SINGLE);
        let mut values = Vec::with_capacity(self.scenarios.len());
        for sc in &self.scenarios.scenarios {
            let recs = (0..n as u64)
                .into_par_iter()
                .map(|p| {
                    let r = simulate(&cfg, sc, PathSeed::new(seed, p))?;
                    Ok(steps
                        .iter()
                        .map(|&k| {
                            let i = k / stride;
                            [norm2(&r.states[i]).powi(2), r.norms[i].powi(2), r.running_sup[i]]
                        })
                        .collect::<Vec<_>>())
                })
                .collect::<Result<Vec<_>>>()?;
            values.push(transpose(&recs, times.len(), 3));
        }
        Ok(self.single.get_or_init(|| ProbeSamples { times, values }))
    }

    pub(crate) fn pair_stats(&self) -> Result<&ProbeSamples> {
        if let Some(s) = self.pairs.get() {
            return Ok(s);
        }
        let times = self.checkpoints().to_vec();
        let (horizon, stride, steps) = self.probe_plan(&times)?;
        let e = &self.config.experiments;
        let mut cfg = self.sim_config(horizon, e.zeta.clone());
        cfg.record_stride = stride;
        let seed = self.seed(stream::PAIRS);
        let mut values = Vec::with_capacity(self.scenarios.len());
        for sc in &self.scenarios.scenarios {
            let recs = (0..e.paths as u64)
                .into_par_iter()
                .map(|p| {
                    let r = simulate_pair(&cfg, &e.zeta, &e.xi, sc, PathSeed::new(seed, p))?;
                    Ok(steps
                        .iter()
                        .map(|&k| {
                            let i = k / stride;
                            let d: Vec<f64> = r.first.states[i]
                                .iter()
                                .zip(&r.second.states[i])
                                .map(|(a, b)| a - b)
                                .collect();
                            [norm2(&d).powi(2), r.difference_norms[i].powi(2)]
                        })
                        .collect::<Vec<_>>())
                })
                .collect::<Result<Vec<_>>>()?;
            values.push(transpose(&recs, times.len(), 2));
        }
        Ok(self.pairs.get_or_init(|| ProbeSamples { times, values }))
    }
}

/// `[path][probe][stat]` to `[probe][stat][path]`.
fn transpose<const S: usize>(recs: &[Vec<[f64; S]>], probes: usize, stats: usize) -> Vec<Vec<Vec<f64>>> {
    (0..probes)
        .map(|k| (0..stats).map(|s| recs.iter().map(|r| r[k][s]).collect()).collect())
        .collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcd_of_steps() {
        assert_eq!([500, 1000, 2000, 5000, 10000].iter().fold(0, |g, &s| gcd(g, s)), 500);
    }

    #[test]
    fn bundled_config_is_feasible() {
        let h = Harness::bundled().unwrap();
        for t in Theorem::ALL {
            assert!(h.lambda(t).is_ok(), "{t:?}");
        }
        assert_eq!(h.zeta_norm_sq, 1.0);
        assert_eq!(h.diff_norm_sq, 1.0);
    }
}
