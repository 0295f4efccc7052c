//! Verdicts and their file output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Statistical margin in standard errors.
pub const SE_MARGIN: f64 = 3.0;

/// One comparison of an empirical value against a bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub t: f64,
    pub empirical: f64,
    pub se: f64,
    pub bound: f64,
    pub pass: bool,
    pub label: String,
}

impl CheckRow {
    /// Passes when `empirical ≤ bound + 3·SE`.
    pub fn statistical(t: f64, empirical: f64, se: f64, bound: f64, label: impl Into<String>) -> Self {
        CheckRow {
            t,
            empirical,
            se,
            bound,
            pass: empirical <= bound + SE_MARGIN * se,
            label: label.into(),
        }
    }

    /// Passes when `empirical ≤ bound` exactly.
    pub fn exact(t: f64, empirical: f64, bound: f64, label: impl Into<String>) -> Self {
        CheckRow {
            t,
            empirical,
            se: 0.0,
            bound,
            pass: empirical <= bound,
            label: label.into(),
        }
    }

    /// A boolean property recorded as `empirical = 0/1` against `bound = 1`.
    pub fn flag(t: f64, holds: bool, label: impl Into<String>) -> Self {
        CheckRow {
            t,
            empirical: f64::from(u8::from(!holds)),
            se: 0.0,
            bound: 0.0,
            pass: holds,
            label: label.into(),
        }
    }

    /// `bound + 3·SE − empirical`.
    pub fn margin(&self) -> f64 {
        self.bound + SE_MARGIN * self.se - self.empirical
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub experiment: String,
    pub rows: Vec<CheckRow>,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn new(experiment: impl Into<String>) -> Self {
        Verdict {
            experiment: experiment.into(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// A verdict that failed before any comparison, e.g. an infeasible condition.
    pub fn refused(experiment: impl Into<String>, reason: impl Into<String>) -> Self {
        let mut v = Verdict::new(experiment);
        v.rows.push(CheckRow::flag(0.0, false, "refused"));
        v.notes.push(reason.into());
        v
    }

    pub fn pass(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }

    pub fn min_margin(&self) -> f64 {
        self.rows.iter().map(CheckRow::margin).fold(f64::INFINITY, f64::min)
    }

    /// Largest `bound / empirical` over rows with positive empirical value.
    pub fn max_ratio(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.empirical > 0.0 && r.bound.is_finite())
            .map(|r| r.bound / r.empirical)
            .fold(None, |m, x| Some(m.map_or(x, |m: f64| m.max(x))))
    }

    /// Columns `t, empirical, SE, bound, pass, label`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "empirical", "SE", "bound", "pass", "label"])?;
        for r in &self.rows {
            out.write_record([
                r.t.to_string(),
                r.empirical.to_string(),
                r.se.to_string(),
                r.bound.to_string(),
                r.pass.to_string(),
                r.label.clone(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let path = dir.as_ref().join(format!("{}.csv", self.experiment));
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn summary_line(&self) -> String {
        let ratio = self.max_ratio().map_or("-".to_string(), |r| format!("{r:.3e}"));
        format!(
            "{:<18} {:<4} rows={:<3} min_margin={:.4e} max_bound/empirical={}",
            self.experiment,
            if self.pass() { "PASS" } else { "FAIL" },
            self.rows.len(),
            self.min_margin(),
            ratio
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.summary_line());
        for r in &self.rows {
            let _ = writeln!(
                s,
                "    t={:<6} {:<28} empirical={:.6e} se={:.3e} bound={:.6e} {}",
                r.t,
                r.label,
                r.empirical,
                r.se,
                r.bound,
                if r.pass { "ok" } else { "FAIL" }
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "    note: {n}");
        }
        s
    }
}

/// Text for `summary.txt`: bound report then verdict table.
pub fn summary(bounds: &str, verdicts: &[Verdict]) -> String {
    let mut s = String::from(bounds);
    s.push('\n');
    let _ = writeln!(s, "Verdicts");
    for v in verdicts {
        s.push_str(&v.to_text());
    }
    let all = verdicts.iter().all(Verdict::pass);
    let _ = writeln!(s, "\nOVERALL {}", if all { "PASS" } else { "FAIL" });
    s
}
