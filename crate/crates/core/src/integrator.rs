//! Euler–Maruyama integration of
//! `dX = g(X_t)dt + h(X_t)d⟨B⟩ + γ(X_t)dB` under a fixed scenario.
//!
//! `d⟨B⟩` is integrated as `σ_n²Δt`. Delay integrals are maintained
//! incrementally (see [`DelayTracker`]), so a step costs O(1) in the length of
//! the stored history.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::coefficients::{CoefficientSet, LinearFunctional};
use crate::error::{Error, Result};
use crate::gbm::{mesh_steps, GPath, PathSeed, Scenario};
use crate::measures::{integrate_segment, DelayMeasure, DelayTracker};
use crate::norm2;
use crate::phase_space::{from_initial_data, HistorySegment, InitialData, NEGLIGIBLE_WEIGHT};

/// Largest admissible step.
pub const MAX_DT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: f64,
    pub dt: f64,
    pub q: f64,
    pub coefficients: CoefficientSet,
    pub initial: InitialData,
    /// Level `m` for the stopping time `θ_m`; the run halts at `θ_m` when set.
    pub exit_level: Option<f64>,
    pub record_stride: usize,
    /// Keep `(σ_n, ΔB_n, Δ⟨B⟩_n)` in the record.
    pub record_noise: bool,
}

impl SimConfig {
    pub fn new(horizon: f64, dt: f64, q: f64, coefficients: CoefficientSet, initial: InitialData) -> Self {
        SimConfig {
            horizon,
            dt,
            q,
            coefficients,
            initial,
            exit_level: None,
            record_stride: 1,
            record_noise: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::InvalidConfig(format!(
                "dt = {} must lie in (0, {MAX_DT}]",
                self.dt
            )));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::InvalidConfig(format!("q = {} must be positive", self.q)));
        }
        mesh_steps(self.horizon, self.dt)?;
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig("record stride must be positive".into()));
        }
        if let Some(m) = self.exit_level {
            if !(m > 0.0) {
                return Err(Error::InvalidConfig(format!("exit level {m} must be positive")));
            }
        }
        if self.initial.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: self.initial.dim(),
            });
        }
        for f in self.coefficients.functionals() {
            for a in f.measure.atoms() {
                let k = a.tau / self.dt;
                if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "atom delay {} is not a multiple of dt = {}",
                        a.tau, self.dt
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> Result<usize> {
        mesh_steps(self.horizon, self.dt)
    }

    /// Age beyond which stored samples become candidates for absorption into the tail.
    pub fn retention(&self) -> f64 {
        self.coefficients
            .max_atom_delay()
            .max((1.0 / NEGLIGIBLE_WEIGHT).ln() / self.q)
    }

    pub fn initial_segment(&self, initial: &InitialData) -> Result<HistorySegment> {
        Ok(from_initial_data(initial, self.q, self.dim(), self.dt)?.with_retention(self.retention()))
    }
}

/// One simulated path, sampled every `record_stride` steps and at the final step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `‖X_t‖_q` at the recorded times.
    pub norms: Vec<f64>,
    /// `sup_{0≤s≤t}|X(s)|` over every grid time up to the recorded time.
    pub running_sup: Vec<f64>,
    pub theta: Option<f64>,
    pub scenario_id: usize,
    pub seed: PathSeed,
    pub noise: Option<GPath>,
}

impl TrajectoryRecord {
    fn new(scenario_id: usize, seed: PathSeed) -> Self {
        TrajectoryRecord {
            times: Vec::new(),
            states: Vec::new(),
            norms: Vec::new(),
            running_sup: Vec::new(),
            theta: None,
            scenario_id,
            seed,
            noise: None,
        }
    }

    fn record(&mut self, t: f64, x: &[f64], norm: f64, sup: f64) {
        self.times.push(t);
        self.states.push(x.to_vec());
        self.norms.push(norm);
        self.running_sup.push(sup);
    }

    pub fn final_state(&self) -> &[f64] {
        &self.states[self.states.len() - 1]
    }

    /// Writes columns `t, x0.., segment_norm, scenario_id, seed, path`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let dim = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(|i| format!("x{i}")));
        header.extend(["segment_norm", "scenario_id", "seed", "path"].map(String::from));
        out.write_record(&header)?;
        for ((t, x), n) in self.times.iter().zip(&self.states).zip(&self.norms) {
            let mut row = vec![t.to_string()];
            row.extend(x.iter().map(f64::to_string));
            row.push(n.to_string());
            row.push(self.scenario_id.to_string());
            row.push(self.seed.master.to_string());
            row.push(self.seed.path.to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// One explicit step from a segment, with delay integrals evaluated directly.
pub fn step(
    seg: &HistorySegment,
    coeffs: &CoefficientSet,
    sigma: f64,
    dw: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let x = seg.head();
    let g = coeffs.drift.eval(seg)?;
    let h = coeffs.qv_drift.eval(seg)?;
    let gamma = coeffs.diffusion.eval(seg)?;
    let next: Vec<f64> = (0..x.len())
        .map(|i| x[i] + g[i] * dt + h[i] * sigma * sigma * dt + gamma[i] * dw)
        .collect();
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBlowup {
            step: seg.elapsed_steps() as usize + 1,
            partial: None,
        });
    }
    Ok(next)
}

/// Per-path integration state.
struct Engine {
    seg: HistorySegment,
    trackers: Vec<DelayTracker>,
    /// `(a, b, offset into integrals)` for `g, h, γ`.
    params: [(f64, f64, usize); 3],
    c0: [Vec<f64>; 3],
    x: Vec<f64>,
    next: Vec<f64>,
    /// Tracker integrals, `dim` entries per tracker.
    integrals: Vec<f64>,
}

impl Engine {
    fn new(coeffs: &CoefficientSet, seg: HistorySegment) -> Result<Self> {
        let functionals: [&LinearFunctional; 3] = coeffs.functionals();
        let d = seg.dim();
        let mut measures: Vec<&DelayMeasure> = Vec::new();
        let mut params = [(0.0, 0.0, 0); 3];
        for (i, f) in functionals.iter().enumerate() {
            let j = match measures.iter().position(|m| **m == f.measure) {
                Some(j) => j,
                None => {
                    measures.push(&f.measure);
                    measures.len() - 1
                }
            };
            params[i] = (f.a, f.b, j * d);
        }
        let trackers = measures
            .iter()
            .map(|m| DelayTracker::new(m, &seg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Engine {
            integrals: vec![0.0; trackers.len() * d],
            trackers,
            params,
            c0: functionals.map(|f| f.c0.clone()),
            x: seg.head(),
            next: vec![0.0; d],
            seg,
        })
    }

    #[inline]
    fn head_norm(&self) -> f64 {
        norm2(&self.x)
    }

    /// Advances one step; `truncation` evaluates the coefficients on `mφ/‖φ‖` when `‖φ‖ > m`.
    #[inline]
    fn advance(&mut self, sigma: f64, db: f64, dt: f64, truncation: Option<f64>) -> bool {
        let d = self.x.len();
        for (j, t) in self.trackers.iter().enumerate() {
            t.integral_into(&self.seg, &mut self.integrals[j * d..(j + 1) * d]);
        }
        let scale = match truncation {
            Some(m) if self.seg.norm() > m => m / self.seg.norm(),
            _ => 1.0,
        };
        let incr = [dt, sigma * sigma * dt, db];
        let mut finite = true;
        for i in 0..d {
            let x = self.x[i];
            let xs = if scale == 1.0 { x } else { scale * x };
            let mut v = x;
            for k in 0..3 {
                let (a, b, off) = self.params[k];
                let integral = self.integrals[off + i];
                let is = if scale == 1.0 { integral } else { scale * integral };
                v += (-a * xs + b * is + self.c0[k][i]) * incr[k];
            }
            finite &= v.is_finite();
            self.next[i] = v;
        }
        for t in &mut self.trackers {
            t.advance(&self.x, &self.next);
        }
        self.seg.push(&self.next);
        std::mem::swap(&mut self.x, &mut self.next);
        finite
    }
}

fn blowup(step: usize, rec: TrajectoryRecord) -> Error {
    Error::NumericalBlowup {
        step,
        partial: Some(Box::new(rec)),
    }
}

/// Simulates one path from `config.initial`.
pub fn simulate(config: &SimConfig, scenario: &Scenario, seed: PathSeed) -> Result<TrajectoryRecord> {
    config.validate()?;
    let n = config.n_steps()?;
    let mut seg = config.initial_segment(&config.initial)?;
    seg.reserve(n);
    let mut eng = Engine::new(&config.coefficients, seg)?;
    let mut rng = seed.rng(scenario.id);
    let sq = config.dt.sqrt();
    let mut rec = TrajectoryRecord::new(scenario.id, seed);
    let mut noise = config.record_noise.then(|| GPath::with_capacity(config.dt, n));
    let mut sup = eng.head_norm();
    rec.record(0.0, &eng.x, eng.seg.norm(), sup);
    if let Some(m) = config.exit_level {
        if sup > m {
            rec.theta = Some(0.0);
            rec.noise = noise;
            return Ok(rec);
        }
    }
    for step in 0..n {
        let sigma = scenario.sigma(step, eng.head_norm());
        let xi: f64 = rng.sample(StandardNormal);
        let db = sigma * sq * xi;
        if let Some(g) = noise.as_mut() {
            g.push(sigma, db);
        }
        let ok = eng.advance(sigma, db, config.dt, None);
        let k = step + 1;
        let t = k as f64 * config.dt;
        let a = eng.head_norm();
        sup = sup.max(a);
        if !ok {
            rec.record(t, &eng.x, eng.seg.norm(), sup);
            rec.noise = noise;
            return Err(blowup(k, rec));
        }
        if config.exit_level.is_some_and(|m| a > m) {
            rec.record(t, &eng.x, eng.seg.norm(), sup);
            rec.theta = Some(t);
            break;
        }
        if k % config.record_stride == 0 || k == n {
            rec.record(t, &eng.x, eng.seg.norm(), sup);
        }
    }
    rec.noise = noise;
    Ok(rec)
}

/// Two paths driven by the same `(σ_n, ξ_n)`. Feedback controls observe the first path.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun {
    pub first: TrajectoryRecord,
    pub second: TrajectoryRecord,
    /// `‖X_t − Y_t‖_q` at the recorded times.
    pub difference_norms: Vec<f64>,
}

impl CoupledRun {
    pub fn into_pair(self) -> (TrajectoryRecord, TrajectoryRecord) {
        (self.first, self.second)
    }
}

fn run_coupled(
    config: &SimConfig,
    zeta: &InitialData,
    xi: &InitialData,
    truncation: [Option<f64>; 2],
    scenario: &Scenario,
    seed: PathSeed,
) -> Result<CoupledRun> {
    config.validate()?;
    let n = config.n_steps()?;
    let sz = config.initial_segment(zeta)?;
    let sx = config.initial_segment(xi)?;
    let mut dnorm = sz.linear_combination(1.0, &sx, -1.0)?.segment_norm();
    let decay = (-config.q * config.dt).exp();
    let mut e1 = Engine::new(&config.coefficients, sz)?;
    let mut e2 = Engine::new(&config.coefficients, sx)?;
    e1.seg.reserve(n);
    e2.seg.reserve(n);
    let mut rng = seed.rng(scenario.id);
    let sq = config.dt.sqrt();
    let mut r1 = TrajectoryRecord::new(scenario.id, seed);
    let mut r2 = TrajectoryRecord::new(scenario.id, seed);
    let mut dn = Vec::new();
    let (mut s1, mut s2) = (e1.head_norm(), e2.head_norm());
    r1.record(0.0, &e1.x, e1.seg.norm(), s1);
    r2.record(0.0, &e2.x, e2.seg.norm(), s2);
    dn.push(dnorm);
    let mut diff = vec![0.0; config.dim()];
    for step in 0..n {
        let sigma = scenario.sigma(step, e1.head_norm());
        let z: f64 = rng.sample(StandardNormal);
        let db = sigma * sq * z;
        let ok1 = e1.advance(sigma, db, config.dt, truncation[0]);
        let ok2 = e2.advance(sigma, db, config.dt, truncation[1]);
        let k = step + 1;
        let t = k as f64 * config.dt;
        s1 = s1.max(e1.head_norm());
        s2 = s2.max(e2.head_norm());
        for (d, (a, b)) in diff.iter_mut().zip(e1.x.iter().zip(&e2.x)) {
            *d = a - b;
        }
        dnorm = (dnorm * decay).max(norm2(&diff));
        if !(ok1 && ok2) {
            r1.record(t, &e1.x, e1.seg.norm(), s1);
            return Err(blowup(k, r1));
        }
        let exit = config.exit_level.is_some_and(|m| e1.head_norm() > m);
        if exit || k % config.record_stride == 0 || k == n {
            r1.record(t, &e1.x, e1.seg.norm(), s1);
            r2.record(t, &e2.x, e2.seg.norm(), s2);
            dn.push(dnorm);
        }
        if exit {
            r1.theta = Some(t);
            break;
        }
    }
    Ok(CoupledRun {
        first: r1,
        second: r2,
        difference_norms: dn,
    })
}

/// Paths from `zeta` and `xi` under identical noise.
pub fn simulate_pair(
    config: &SimConfig,
    zeta: &InitialData,
    xi: &InitialData,
    scenario: &Scenario,
    seed: PathSeed,
) -> Result<CoupledRun> {
    run_coupled(config, zeta, xi, [None, None], scenario, seed)
}

/// The untruncated (`first`) and `m`-truncated (`second`) solutions from
/// `config.initial` under identical noise.
pub fn simulate_truncated(
    config: &SimConfig,
    m: f64,
    scenario: &Scenario,
    seed: PathSeed,
) -> Result<CoupledRun> {
    if !(m > 0.0) {
        return Err(Error::Precondition(format!("truncation level {m} must be positive")));
    }
    run_coupled(config, &config.initial, &config.initial, [None, Some(m)], scenario, seed)
}

/// `∫ψdμ` for each functional, evaluated directly; used to cross-check the trackers.
pub fn direct_delay_integrals(coeffs: &CoefficientSet, seg: &HistorySegment) -> Result<[Vec<f64>; 3]> {
    Ok([
        integrate_segment(&coeffs.drift.measure, seg)?,
        integrate_segment(&coeffs.qv_drift.measure, seg)?,
        integrate_segment(&coeffs.diffusion.measure, seg)?,
    ])
}
