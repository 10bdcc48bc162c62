//! Benchmark reports: a JSON file for machines and a category × method
//! table for people.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::FrameScore;
use crate::error::{Error, Result};

pub const REPORT_FORMAT: &str = "sixpack-report/1";
pub const OVERALL: &str = "overall";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Percent of frames under 5° and 5 cm.
    pub five_deg_five_cm: f64,
    /// Percent of frames with box IoU above 0.25.
    pub iou25: f64,
    /// Degrees.
    pub r_err_mean: f64,
    /// Centimeters.
    pub t_err_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub category: String,
    pub method: String,
    pub frames: usize,
    pub metrics: Option<Metrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub format: String,
    pub rows: Vec<ReportRow>,
}

impl MetricReport {
    /// Builds per-category rows plus an `overall` row per method pooling all
    /// frames of that method.
    pub fn from_scores(scores: &[(String, String, Vec<FrameScore>)]) -> Self {
        let mut rows = Vec::new();
        let mut methods: Vec<&str> = Vec::new();
        for (method, category, s) in scores {
            if !methods.contains(&method.as_str()) {
                methods.push(method);
            }
            rows.push(ReportRow {
                category: category.clone(),
                method: method.clone(),
                frames: s.len(),
                metrics: Metrics::from_scores(s),
            });
        }
        for m in methods {
            let pooled: Vec<FrameScore> =
                scores.iter().filter(|(method, _, _)| method == m).flat_map(|(_, _, s)| s.iter().copied()).collect();
            rows.push(ReportRow {
                category: OVERALL.into(),
                method: m.into(),
                frames: pooled.len(),
                metrics: Metrics::from_scores(&pooled),
            });
        }
        Self { format: REPORT_FORMAT.into(), rows }
    }

    pub fn methods(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method.as_str()) {
                out.push(&r.method);
            }
        }
        out
    }

    /// Categories in first-appearance order with `overall` last.
    pub fn categories(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if r.category != OVERALL && !out.contains(&r.category.as_str()) {
                out.push(&r.category);
            }
        }
        if self.rows.iter().any(|r| r.category == OVERALL) {
            out.push(OVERALL);
        }
        out
    }

    pub fn get(&self, category: &str, method: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.category == category && r.method == method)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if report.format != REPORT_FORMAT {
            return Err(Error::FormatVersionMismatch { expected: REPORT_FORMAT.into(), found: report.format });
        }
        Ok(report)
    }

    /// One row per category, a block of four columns per method. Absent
    /// metrics print as `-`.
    pub fn table(&self) -> String {
        let methods = self.methods();
        let mut out = String::new();
        let block = 4 * 9 - 1;
        let _ = write!(out, "{:<10}", "");
        for m in &methods {
            let _ = write!(out, " | {:^block$}", m);
        }
        out.push('\n');
        let _ = write!(out, "{:<10}", "category");
        for _ in &methods {
            let _ = write!(out, " | {:>8} {:>8} {:>8} {:>8}", "5°5cm", "IoU25", "R_err", "T_err");
        }
        out.push('\n');
        for c in self.categories() {
            let _ = write!(out, "{c:<10}");
            for m in &methods {
                match self.get(c, m).and_then(|r| r.metrics) {
                    Some(x) => {
                        let _ = write!(
                            out,
                            " | {:>8.1} {:>8.1} {:>8.2} {:>8.2}",
                            x.five_deg_five_cm, x.iou25, x.r_err_mean, x.t_err_mean
                        );
                    }
                    None => {
                        let _ = write!(out, " | {:>8} {:>8} {:>8} {:>8}", "-", "-", "-", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Writes `path` (JSON) and the table next to it with a `.txt` extension.
pub fn emit_report(report: &MetricReport, path: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::write(path, report.to_json())?;
    let table = path.with_extension("txt");
    fs::write(&table, report.table())?;
    Ok((path.to_path_buf(), table))
}

pub fn parse_report(path: &Path) -> Result<MetricReport> {
    MetricReport::from_json(&fs::read_to_string(path)?)
}

/// Keypoint-count comparison table.
pub fn ablation_table(rows: &[(usize, Option<Metrics>)]) -> String {
    let mut out = format!("{:>4} | {:>8} {:>8} {:>8} {:>8}\n", "K", "5°5cm", "IoU25", "R_err", "T_err");
    for (k, m) in rows {
        match m {
            Some(x) => {
                let _ = writeln!(
                    out,
                    "{k:>4} | {:>8.1} {:>8.1} {:>8.2} {:>8.2}",
                    x.five_deg_five_cm, x.iou25, x.r_err_mean, x.t_err_mean
                );
            }
            None => {
                let _ = writeln!(out, "{k:>4} | {:>8} {:>8} {:>8} {:>8}", "-", "-", "-", "-");
            }
        }
    }
    out
}
