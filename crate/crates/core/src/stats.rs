//! Monte Carlo summaries.

use crate::error::{Error, Result};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanEstimate {
    /// Mean and `sd/√n` with the unbiased sample variance; needs two samples.
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 2 {
            return Err(Error::InsufficientSample(n));
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(MeanEstimate {
            mean,
            se: (var / n as f64).sqrt(),
            n,
        })
    }
}

/// Maximum of per-scenario means; the standard error is that of the maximising scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMax {
    pub estimate: f64,
    pub se: f64,
    pub argmax: usize,
    pub per_scenario: Vec<MeanEstimate>,
}

impl ScenarioMax {
    pub fn from_means(per_scenario: Vec<MeanEstimate>) -> Self {
        let mut argmax = 0;
        for (i, m) in per_scenario.iter().enumerate() {
            if m.mean > per_scenario[argmax].mean {
                argmax = i;
            }
        }
        ScenarioMax {
            estimate: per_scenario[argmax].mean,
            se: per_scenario[argmax].se,
            argmax,
            per_scenario,
        }
    }
}
