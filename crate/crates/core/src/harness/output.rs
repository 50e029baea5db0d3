//! CSV tables and `key=value` summaries. Floats carry 17 significant digits so
//! reruns can be compared byte for byte.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use super::complexity::{CostStudy, ParticleComparison};
use super::convergence::ConvergenceReport;
use super::pricing::{EpsilonRun, TrancheQuote};
use super::regularity::RegularityRow;
use crate::error::Result;
use crate::mlmc::LevelStats;
use crate::regression::LinearFit;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

pub fn convergence_table(r: &ConvergenceReport) -> Table {
    let mut t = Table::new(&["level", "h", "k", "value", "std_err", "samples"]);
    for row in &r.rows {
        t.push(vec![
            row.level.to_string(),
            fmt_f64(row.h),
            fmt_f64(row.k),
            fmt_f64(row.value),
            fmt_f64(row.std_err),
            row.samples.to_string(),
        ]);
    }
    t
}

pub fn regularity_table(rows: &[RegularityRow]) -> Table {
    let mut t = Table::new(&["level", "h", "mean", "std_err", "variance", "samples"]);
    for row in rows {
        t.push(vec![
            row.level.to_string(),
            fmt_f64(row.h),
            fmt_f64(row.mean),
            fmt_f64(row.std_err),
            fmt_f64(row.variance),
            row.samples.to_string(),
        ]);
    }
    t
}

pub fn stability_table(scan: &[(f64, f64)]) -> Table {
    let mut t = Table::new(&["theta", "amplification"]);
    for &(theta, s) in scan {
        t.push(vec![fmt_f64(theta), fmt_f64(s)]);
    }
    t
}

/// Per-level statistics of component 0.
pub fn level_table(levels: &[LevelStats]) -> Table {
    let mut t = Table::new(&[
        "level",
        "samples",
        "mean",
        "variance",
        "fine_mean",
        "fine_variance",
        "cost_per_sample",
    ]);
    for s in levels {
        t.push(vec![
            s.level.to_string(),
            s.n_samples.to_string(),
            fmt_f64(s.mean()),
            fmt_f64(s.variance()),
            fmt_f64(s.fine_mean()),
            fmt_f64(s.fine_variance()),
            fmt_f64(s.cost_per_sample()),
        ]);
    }
    t
}

pub fn epsilon_table(runs: &[EpsilonRun]) -> Table {
    let mut t = Table::new(&[
        "epsilon",
        "estimate",
        "std_err",
        "finest_level",
        "samples",
        "mlmc_cost",
        "standard_cost",
    ]);
    for r in runs {
        let samples: Vec<String> = r.samples.iter().map(u64::to_string).collect();
        t.push(vec![
            fmt_f64(r.epsilon),
            fmt_f64(r.estimate),
            fmt_f64(r.std_err),
            r.finest_level.to_string(),
            samples.join(" "),
            fmt_f64(r.mlmc_cost),
            fmt_f64(r.standard_cost),
        ]);
    }
    t
}

pub fn quote_table(quotes: &[TrancheQuote]) -> Table {
    let mut t = Table::new(&["attachment", "detachment", "protection", "spread_bp"]);
    for q in quotes {
        t.push(vec![
            fmt_f64(q.tranche.attachment),
            fmt_f64(q.tranche.detachment),
            fmt_f64(q.protection),
            fmt_f64(q.spread * 1e4),
        ]);
    }
    t
}

pub fn cost_table(study: &CostStudy) -> Table {
    let mut t = Table::new(&[
        "epsilon",
        "n_firms",
        "estimate",
        "finest_level",
        "cost",
        "standard_cost",
    ]);
    for p in &study.points {
        t.push(vec![
            fmt_f64(p.epsilon),
            p.n_firms.map_or(String::new(), |n| n.to_string()),
            fmt_f64(p.estimate),
            p.finest_level.to_string(),
            fmt_f64(p.cost),
            p.standard_cost.map_or(String::new(), fmt_f64),
        ]);
    }
    t
}

pub fn comparison_table(c: &ParticleComparison) -> Table {
    let mut t = Table::new(&["model", "value", "std_err"]);
    t.push(vec![
        "spde".into(),
        fmt_f64(c.spde_value),
        fmt_f64(c.spde_std_err),
    ]);
    t.push(vec![
        "particles".into(),
        fmt_f64(c.particle_value),
        fmt_f64(c.particle_std_err),
    ]);
    t
}

/// Ordered `key=value` lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn float(&mut self, key: &str, value: f64) -> &mut Self {
        self.text(key, fmt_f64(value))
    }

    pub fn flag(&mut self, key: &str, pass: bool) -> &mut Self {
        self.text(key, if pass { "pass" } else { "fail" })
    }

    /// `<prefix>_slope`, `<prefix>_half_width`.
    pub fn fit(&mut self, prefix: &str, fit: &LinearFit) -> &mut Self {
        self.float(&format!("{prefix}_slope"), fit.slope)
            .float(&format!("{prefix}_half_width"), fit.half_width)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}
