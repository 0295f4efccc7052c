//! Scalar G-Brownian motion as a family of volatility scenarios.
//!
//! Each [`Scenario`] is one classical measure: `ΔB_n = σ_n √Δt ξ_n` with
//! Gaussian `ξ_n` and `σ_n ∈ [σ̲, σ̄]` chosen by an adapted control, and
//! `Δ⟨B⟩_n = σ_n² Δt`. The sublinear expectation and the capacity are
//! estimated as maxima over a finite scenario set, which is a lower estimate
//! of the supremum over all controls.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::stats::{MeanEstimate, ScenarioMax};

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "RawBand")]
pub struct VolatilityBand {
    lo: f64,
    hi: f64,
}

#[derive(Deserialize)]
struct RawBand {
    sigma_lo: f64,
    sigma_hi: f64,
}

impl TryFrom<RawBand> for VolatilityBand {
    type Error = Error;
    fn try_from(r: RawBand) -> Result<Self> {
        VolatilityBand::new(r.sigma_lo, r.sigma_hi)
    }
}

impl VolatilityBand {
    pub fn new(sigma_lo: f64, sigma_hi: f64) -> Result<Self> {
        if !(sigma_lo >= 0.0 && sigma_hi.is_finite() && sigma_lo <= sigma_hi) {
            return Err(Error::InvalidBand(format!(
                "need 0 <= sigma_lo <= sigma_hi, got [{sigma_lo}, {sigma_hi}]"
            )));
        }
        Ok(VolatilityBand {
            lo: sigma_lo,
            hi: sigma_hi,
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    fn clamp(&self, s: f64) -> f64 {
        s.clamp(self.lo, self.hi)
    }
}

/// How `σ_n` is chosen from the step index and the observed state.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Control {
    Constant { sigma: f64 },
    /// `σ̲` for the first half of each period, `σ̄` for the second.
    Periodic { period: f64 },
    /// `σ̄` while the observed magnitude exceeds `level`, `σ̲` otherwise.
    Threshold { level: f64 },
    /// An independent uniform draw in the band at every step, fixed by `seed`.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: usize,
    pub band: VolatilityBand,
    pub dt: f64,
    pub control: Control,
}

impl Scenario {
    pub fn new(id: usize, band: VolatilityBand, dt: f64, control: Control) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt = {dt} must be positive")));
        }
        match &control {
            Control::Constant { sigma } if !(band.lo..=band.hi).contains(sigma) => {
                return Err(Error::InvalidBand(format!(
                    "constant control {sigma} outside [{}, {}]",
                    band.lo, band.hi
                )))
            }
            Control::Periodic { period } if !(*period > 0.0) => {
                return Err(Error::InvalidConfig(format!("period {period} must be positive")))
            }
            _ => {}
        }
        Ok(Scenario {
            id,
            band,
            dt,
            control,
        })
    }

    /// `σ_n` given the step index and the magnitude of the observed state at `t_n`.
    #[inline]
    pub fn sigma(&self, step: usize, observed: f64) -> f64 {
        let b = &self.band;
        match &self.control {
            Control::Constant { sigma } => b.clamp(*sigma),
            Control::Periodic { period } => {
                let half = ((step as f64 * self.dt) / (0.5 * period)).floor() as u64;
                if half % 2 == 0 {
                    b.lo
                } else {
                    b.hi
                }
            }
            Control::Threshold { level } => {
                if observed > *level {
                    b.hi
                } else {
                    b.lo
                }
            }
            Control::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_word_pos(2 * step as u128);
                b.clamp(b.lo + (b.hi - b.lo) * rng.random::<f64>())
            }
        }
    }

    pub fn label(&self) -> String {
        match &self.control {
            Control::Constant { sigma } => format!("constant({sigma})"),
            Control::Periodic { period } => format!("periodic({period})"),
            Control::Threshold { level } => format!("threshold({level})"),
            Control::Random { seed } => format!("random({seed})"),
        }
    }
}

/// A finite family of scenarios sharing a band and a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub band: VolatilityBand,
    pub dt: f64,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn new(band: VolatilityBand, dt: f64, controls: Vec<Control>) -> Result<Self> {
        if controls.is_empty() {
            return Err(Error::InvalidConfig("scenario set is empty".into()));
        }
        let scenarios = controls
            .into_iter()
            .enumerate()
            .map(|(i, c)| Scenario::new(i, band, dt, c))
            .collect::<Result<_>>()?;
        Ok(ScenarioSet {
            band,
            dt,
            scenarios,
        })
    }

    /// `levels` constant controls evenly spaced over the band (one if the band is a point).
    pub fn constant_grid(band: VolatilityBand, levels: usize, dt: f64) -> Result<Self> {
        let levels = if band.lo == band.hi { 1 } else { levels };
        if levels == 0 {
            return Err(Error::InvalidConfig("need at least one level".into()));
        }
        let controls = (0..levels)
            .map(|i| {
                let sigma = if levels == 1 {
                    band.hi
                } else {
                    band.lo + (band.hi - band.lo) * i as f64 / (levels - 1) as f64
                };
                Control::Constant { sigma }
            })
            .collect();
        Self::new(band, dt, controls)
    }

    pub fn push(&mut self, control: Control) -> Result<()> {
        let s = Scenario::new(self.scenarios.len(), self.band, self.dt, control)?;
        self.scenarios.push(s);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

/// Identifies one random stream: a master seed and a path index. The stream
/// also depends on the scenario id, so every (scenario, path) pair is independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathSeed {
    pub master: u64,
    pub path: u64,
}

impl PathSeed {
    pub fn new(master: u64, path: u64) -> Self {
        PathSeed { master, path }
    }

    pub fn rng(&self, scenario_id: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(((scenario_id as u64) << 32) | (self.path & 0xFFFF_FFFF));
        rng
    }
}

/// Number of mesh steps in `[0, horizon]`; the step must divide the horizon.
pub fn mesh_steps(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidConfig(format!("horizon {horizon} must be positive")));
    }
    let n = horizon / dt;
    let r = n.round();
    if (n - r).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::InvalidConfig(format!(
            "dt = {dt} does not divide the horizon {horizon}"
        )));
    }
    Ok(r as usize)
}

/// A sampled path of `(B, ⟨B⟩)` on the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct GPath {
    pub dt: f64,
    pub sigma: Vec<f64>,
    pub db: Vec<f64>,
    pub dqv: Vec<f64>,
    /// Cumulative `B`, starting at `B(0) = 0`; one entry longer than the increments.
    pub b: Vec<f64>,
    /// Cumulative `⟨B⟩`, starting at 0.
    pub qv: Vec<f64>,
}

impl GPath {
    pub(crate) fn with_capacity(dt: f64, n: usize) -> Self {
        let mut b = Vec::with_capacity(n + 1);
        let mut qv = Vec::with_capacity(n + 1);
        b.push(0.0);
        qv.push(0.0);
        GPath {
            dt,
            sigma: Vec::with_capacity(n),
            db: Vec::with_capacity(n),
            dqv: Vec::with_capacity(n),
            b,
            qv,
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, sigma: f64, db: f64) {
        let dqv = sigma * sigma * self.dt;
        self.sigma.push(sigma);
        self.db.push(db);
        self.dqv.push(dqv);
        self.b.push(self.b[self.b.len() - 1] + db);
        self.qv.push(self.qv[self.qv.len() - 1] + dqv);
    }

    pub fn steps(&self) -> usize {
        self.db.len()
    }

    pub fn final_b(&self) -> f64 {
        self.b[self.b.len() - 1]
    }

    pub fn final_qv(&self) -> f64 {
        self.qv[self.qv.len() - 1]
    }

    /// `B` at the mesh point nearest to `t`.
    pub fn b_at(&self, t: f64) -> f64 {
        self.b[((t / self.dt).round() as usize).min(self.b.len() - 1)]
    }

    /// `Σ (ΔB_n)²`.
    pub fn realized_qv(&self) -> f64 {
        self.db.iter().map(|d| d * d).sum()
    }

    /// Whether `σ̲²Δt ≤ Δ⟨B⟩_n ≤ σ̄²Δt` holds exactly on every step and `⟨B⟩(0) = 0`.
    pub fn qv_band_holds(&self, band: &VolatilityBand) -> bool {
        let (lo, hi) = (band.lo * band.lo * self.dt, band.hi * band.hi * self.dt);
        self.qv[0] == 0.0 && self.dqv.iter().all(|&d| lo <= d && d <= hi)
    }
}

/// Samples `(B, ⟨B⟩)` on `[0, horizon]`. Feedback controls observe `|B(t_n)|`.
pub fn sample_path(scenario: &Scenario, horizon: f64, seed: PathSeed) -> Result<GPath> {
    let n = mesh_steps(horizon, scenario.dt)?;
    let mut rng = seed.rng(scenario.id);
    let sq = scenario.dt.sqrt();
    let mut path = GPath::with_capacity(scenario.dt, n);
    for step in 0..n {
        let sigma = scenario.sigma(step, path.final_b().abs());
        let xi: f64 = rng.sample(StandardNormal);
        path.push(sigma, sigma * sq * xi);
    }
    Ok(path)
}

fn per_scenario<T, F>(
    set: &ScenarioSet,
    horizon: f64,
    n_paths: usize,
    seed: u64,
    f: F,
) -> Result<Vec<Vec<T>>>
where
    T: Send,
    F: Fn(&GPath) -> T + Sync,
{
    if n_paths < 2 {
        return Err(Error::InsufficientSample(n_paths));
    }
    if set.is_empty() {
        return Err(Error::InvalidConfig("scenario set is empty".into()));
    }
    set.scenarios
        .iter()
        .map(|s| {
            (0..n_paths as u64)
                .into_par_iter()
                .map(|p| sample_path(s, horizon, PathSeed::new(seed, p)).map(|g| f(&g)))
                .collect::<Result<Vec<T>>>()
        })
        .collect()
}

fn scenario_max(values: &[Vec<f64>]) -> Result<ScenarioMax> {
    let means = values
        .iter()
        .map(|v| MeanEstimate::from_samples(v))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioMax::from_means(means))
}

/// `Ê[f]` estimated as the maximum over scenarios of the Monte Carlo mean.
pub fn sublinear_expectation<F>(
    functional: F,
    set: &ScenarioSet,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ScenarioMax>
where
    F: Fn(&GPath) -> f64 + Sync,
{
    scenario_max(&per_scenario(set, horizon, n_paths, seed, functional)?)
}

/// `Ĉ(A)` estimated as the maximum over scenarios of the event frequency.
pub fn capacity_estimate<E>(
    event: E,
    set: &ScenarioSet,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ScenarioMax>
where
    E: Fn(&GPath) -> bool + Sync,
{
    sublinear_expectation(|g| f64::from(u8::from(event(g))), set, horizon, n_paths, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovCheck {
    pub capacity: ScenarioMax,
    pub expectation: ScenarioMax,
    /// `Ê|X|^p / δ`, the asserted form.
    pub bound: f64,
    /// `Ê|X|^p / δ^p`, reported only.
    pub bound_delta_p: f64,
    pub combined_se: f64,
    /// `bound + 3·SE − capacity`.
    pub slack: f64,
    pub holds: bool,
}

/// Checks `Ĉ(|X| > δ) ≤ Ê|X|^p / δ` within three combined standard errors.
pub fn check_g_markov<V>(
    variable: V,
    p: f64,
    delta: f64,
    set: &ScenarioSet,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<MarkovCheck>
where
    V: Fn(&GPath) -> f64 + Sync,
{
    if !(delta > 0.0) {
        return Err(Error::Precondition(format!("delta = {delta} must be positive")));
    }
    if !(p >= 1.0) {
        return Err(Error::Precondition(format!("p = {p} must be at least 1")));
    }
    let values = per_scenario(set, horizon, n_paths, seed, |g| variable(g).abs())?;
    let events: Vec<Vec<f64>> = values
        .iter()
        .map(|v| v.iter().map(|&x| f64::from(u8::from(x > delta))).collect())
        .collect();
    let powers: Vec<Vec<f64>> = values
        .iter()
        .map(|v| v.iter().map(|&x| x.powf(p)).collect())
        .collect();
    let capacity = scenario_max(&events)?;
    let expectation = scenario_max(&powers)?;
    let bound = expectation.estimate / delta;
    let combined_se = (capacity.se.powi(2) + (expectation.se / delta).powi(2)).sqrt();
    let slack = bound + 3.0 * combined_se - capacity.estimate;
    Ok(MarkovCheck {
        bound_delta_p: expectation.estimate / delta.powf(p),
        capacity,
        expectation,
        bound,
        combined_se,
        slack,
        holds: slack >= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(lo: f64, hi: f64) -> VolatilityBand {
        VolatilityBand::new(lo, hi).unwrap()
    }

    #[test]
    fn band_validation() {
        assert!(VolatilityBand::new(0.6, 0.3).is_err());
        assert!(VolatilityBand::new(-0.1, 0.3).is_err());
        assert!(VolatilityBand::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn classical_band_has_exact_qv() {
        let s = Scenario::new(0, band(1.0, 1.0), 0.01, Control::Constant { sigma: 1.0 }).unwrap();
        let g = sample_path(&s, 1.0, PathSeed::new(1, 0)).unwrap();
        assert_eq!(g.steps(), 100);
        assert!((g.final_qv() - 1.0).abs() < 1e-12);
        assert!(g.qv_band_holds(&s.band));
    }

    #[test]
    fn zero_band_is_degenerate() {
        let s = Scenario::new(0, band(0.0, 0.0), 0.01, Control::Constant { sigma: 0.0 }).unwrap();
        let g = sample_path(&s, 1.0, PathSeed::new(1, 0)).unwrap();
        assert!(g.b.iter().all(|&b| b == 0.0));
        assert!(g.qv.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_seed_same_path() {
        let s = Scenario::new(3, band(0.3, 0.6), 0.01, Control::Random { seed: 9 }).unwrap();
        let a = sample_path(&s, 1.0, PathSeed::new(5, 7)).unwrap();
        let b = sample_path(&s, 1.0, PathSeed::new(5, 7)).unwrap();
        let c = sample_path(&s, 1.0, PathSeed::new(5, 8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.b, c.b);
    }

    #[test]
    fn controls_stay_in_band() {
        let b = band(0.3, 0.6);
        for c in [
            Control::Periodic { period: 0.3 },
            Control::Threshold { level: 0.1 },
            Control::Random { seed: 2 },
        ] {
            let s = Scenario::new(0, b, 0.01, c).unwrap();
            let g = sample_path(&s, 2.0, PathSeed::new(4, 0)).unwrap();
            assert!(g.sigma.iter().all(|&x| (0.3..=0.6).contains(&x)));
            assert!(g.qv_band_holds(&b));
        }
        assert!(Scenario::new(0, b, 0.01, Control::Constant { sigma: 0.7 }).is_err());
    }

    #[test]
    fn periodic_switches() {
        let s = Scenario::new(0, band(0.3, 0.6), 0.1, Control::Periodic { period: 1.0 }).unwrap();
        assert_eq!(s.sigma(0, 0.0), 0.3);
        assert_eq!(s.sigma(4, 0.0), 0.3);
        assert_eq!(s.sigma(5, 0.0), 0.6);
        assert_eq!(s.sigma(10, 0.0), 0.3);
    }

    #[test]
    fn mesh_must_divide_horizon() {
        assert_eq!(mesh_steps(1.0, 1e-3).unwrap(), 1000);
        assert!(mesh_steps(1.0, 0.3).is_err());
    }

    #[test]
    fn constant_functional_preserved() {
        let set = ScenarioSet::constant_grid(band(0.5, 1.0), 3, 0.1).unwrap();
        let e = sublinear_expectation(|_| 4.2, &set, 1.0, 10, 1).unwrap();
        assert!((e.estimate - 4.2).abs() < 1e-12);
        assert!(e.se < 1e-12);
    }

    #[test]
    fn insufficient_sample() {
        let set = ScenarioSet::constant_grid(band(0.5, 1.0), 3, 0.1).unwrap();
        assert!(matches!(
            sublinear_expectation(|_| 1.0, &set, 1.0, 1, 1),
            Err(Error::InsufficientSample(1))
        ));
    }

    #[test]
    fn trivial_capacities() {
        let set = ScenarioSet::constant_grid(band(0.5, 1.0), 2, 0.1).unwrap();
        assert_eq!(capacity_estimate(|_| false, &set, 1.0, 20, 1).unwrap().estimate, 0.0);
        assert_eq!(capacity_estimate(|_| true, &set, 1.0, 20, 1).unwrap().estimate, 1.0);
    }

    #[test]
    fn markov_zero_variable() {
        let set = ScenarioSet::constant_grid(band(0.5, 1.0), 2, 0.1).unwrap();
        let m = check_g_markov(|_| 0.0, 2.0, 1.0, &set, 1.0, 20, 1).unwrap();
        assert!(m.holds);
        assert_eq!(m.capacity.estimate, 0.0);
        assert_eq!(m.bound, 0.0);
    }
}
