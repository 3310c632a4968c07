//! Result rows, CSV serialization and the summary table.

use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::estimators::Provenance;

pub const SCHEMA_VERSION: u32 = 1;

/// One CSV row: a (method, grid point, repeat, trial) outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub method: Provenance,
    pub d: usize,
    pub n: usize,
    pub snr: f64,
    pub seed: u64,
    pub tpr: f64,
    pub fpr: f64,
    pub exact: bool,
    pub sign_consistent: bool,
    pub lambda: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub clamps: usize,
    #[serde(skip)]
    pub point: usize,
    #[serde(skip)]
    pub repeat: usize,
    #[serde(skip)]
    pub trial: usize,
}

impl TrialRow {
    pub(crate) fn sort_key(&self) -> (usize, usize, usize, Provenance) {
        (self.point, self.repeat, self.trial, self.method)
    }
}

/// Means over repeats and trials for one (method, grid point).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Provenance,
    pub d: usize,
    pub n: usize,
    pub snr: f64,
    pub rows: usize,
    pub mean_tpr: f64,
    pub mean_fpr: f64,
    pub exact_rate: f64,
    pub sign_consistent_rate: f64,
    pub mean_lambda: f64,
    pub unconverged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub config_hash: String,
    pub rows: Vec<TrialRow>,
    pub summary: Vec<SummaryRow>,
}

pub(crate) fn config_hash(canonical: &str) -> String {
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn nan_mean(vals: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = vals
        .filter(|v| !v.is_nan())
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Aggregate rows that are already in sorted order.
pub(crate) fn summarize(rows: &[TrialRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(usize, Provenance)> = rows.iter().map(|r| (r.point, r.method)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(point, method)| {
            let group: Vec<&TrialRow> = rows
                .iter()
                .filter(|r| r.point == point && r.method == method)
                .collect();
            let first = group[0];
            let frac = |f: fn(&TrialRow) -> bool| {
                group.iter().filter(|r| f(r)).count() as f64 / group.len() as f64
            };
            SummaryRow {
                method,
                d: first.d,
                n: first.n,
                snr: first.snr,
                rows: group.len(),
                mean_tpr: nan_mean(group.iter().map(|r| r.tpr)),
                mean_fpr: nan_mean(group.iter().map(|r| r.fpr)),
                exact_rate: frac(|r| r.exact),
                sign_consistent_rate: frac(|r| r.sign_consistent),
                mean_lambda: nan_mean(group.iter().map(|r| r.lambda)),
                unconverged: group.iter().filter(|r| !r.converged).count(),
            }
        })
        .collect()
}

impl ExperimentOutput {
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(
            w,
            "# ggm-mac results schema={SCHEMA_VERSION} config_sha256={}",
            self.config_hash
        )?;
        let mut csv = csv::Writer::from_writer(w);
        for row in &self.rows {
            csv.serialize(row)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Rows for one method and grid point.
    pub fn summary_for(&self, method: Provenance, point_index: usize) -> Option<&SummaryRow> {
        let mut points: Vec<(usize, usize, u64)> = self
            .summary
            .iter()
            .map(|s| (s.d, s.n, s.snr.to_bits()))
            .collect();
        points.dedup();
        let key = points.get(point_index)?;
        self.summary
            .iter()
            .find(|s| s.method == method && (s.d, s.n, s.snr.to_bits()) == *key)
    }

    /// Aligned plain-text summary.
    pub fn summary_table(&self) -> String {
        let header = [
            "method", "d", "n", "snr", "rows", "tpr", "fpr", "exact", "sign_ok", "lambda", "unconv",
        ];
        let body: Vec<[String; 11]> = self
            .summary
            .iter()
            .map(|s| {
                [
                    s.method.to_string(),
                    s.d.to_string(),
                    s.n.to_string(),
                    format!("{:.3}", s.snr),
                    s.rows.to_string(),
                    format!("{:.4}", s.mean_tpr),
                    format!("{:.4}", s.mean_fpr),
                    format!("{:.3}", s.exact_rate),
                    format!("{:.3}", s.sign_consistent_rate),
                    format!("{:.4e}", s.mean_lambda),
                    s.unconverged.to_string(),
                ]
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                body.iter()
                    .map(|r| r[c].len())
                    .chain([header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[&str]| {
            cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = line(&header);
        out.push('\n');
        for r in &body {
            out.push_str(&line(&r.iter().map(String::as_str).collect::<Vec<_>>()));
            out.push('\n');
        }
        out
    }
}
