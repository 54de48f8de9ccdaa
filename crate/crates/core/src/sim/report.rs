//! Summary files: `summary.json`, `cells.csv` and `hist_<method>.csv`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimators::Method;
use crate::stats::normal_pdf;

use super::harness::{MethodSummary, ScenarioSummary};

/// Bins used by [`emit_report`] for histograms.
pub const DEFAULT_BINS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Json,
    Csv,
    HistogramCsv,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::HistogramCsv];
}

/// One `(method, metric, value)` row of `cells.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: Method,
    pub metric: String,
    pub value: f64,
}

fn method_cells(m: &MethodSummary) -> Vec<(&'static str, Option<f64>)> {
    vec![
        ("successes", Some(m.successes as f64)),
        ("failures", Some(m.failures as f64)),
        ("mean", Some(m.mean)),
        ("variance", Some(m.variance)),
        ("bias", Some(m.bias)),
        ("n_variance", Some(m.n_variance)),
        ("n_mse", Some(m.n_mse)),
        ("coverage", m.coverage),
        ("coverage_no_network", m.coverage_no_network),
        ("coverage_conservative", m.coverage_conservative),
        ("mean_v_hat", m.mean_v_hat),
        ("mean_se", m.mean_se),
        ("mean_half_width", m.mean_half_width),
        ("kept_fraction", m.kept_fraction),
    ]
}

/// Every numeric per-method statistic of `summary`, in a fixed order.
pub fn summary_cells(summary: &ScenarioSummary) -> Vec<Cell> {
    summary
        .methods
        .iter()
        .flat_map(|m| {
            method_cells(m).into_iter().filter_map(move |(metric, value)| {
                value.map(|value| Cell {
                    method: m.method,
                    metric: metric.to_string(),
                    value,
                })
            })
        })
        .collect()
}

/// Equal-width histogram of point estimates with the overlay normal
/// `N(normal_mean, normal_sd^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub normal_mean: f64,
    pub normal_sd: f64,
}

impl Histogram {
    pub fn new(draws: &[f64], bins: usize, normal_mean: f64, normal_sd: f64) -> Result<Self> {
        if draws.is_empty() || bins == 0 {
            return Err(invalid("histogram needs draws and at least one bin"));
        }
        let lo = draws.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = draws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0usize; bins];
        for &x in draws {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Ok(Self {
            edges,
            counts,
            normal_mean,
            normal_sd,
        })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = csv::Writer::from_path(path)?;
        out.write_record(["bin_low", "bin_high", "count", "density", "normal_density", "normal_mean", "normal_sd"])?;
        let total = self.total() as f64;
        for (k, &c) in self.counts.iter().enumerate() {
            let (a, b) = (self.edges[k], self.edges[k + 1]);
            let center = 0.5 * (a + b);
            let normal = if self.normal_sd > 0.0 {
                normal_pdf(center, self.normal_mean, self.normal_sd)
            } else {
                0.0
            };
            out.write_record([
                a.to_string(),
                b.to_string(),
                c.to_string(),
                (c as f64 / (total * (b - a))).to_string(),
                normal.to_string(),
                self.normal_mean.to_string(),
                self.normal_sd.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Histogram of a method's estimates overlaid with `N(truth, V / n)`, where
/// `V` is the mean variance estimate or, without one, `n` times the sample
/// variance.
pub fn method_histogram(summary: &ScenarioSummary, method: &MethodSummary, bins: usize) -> Result<Histogram> {
    let taus: Vec<f64> = method.draws.iter().map(|d| d.tau_hat).collect();
    let v = method.mean_v_hat.unwrap_or(method.n_variance);
    Histogram::new(&taus, bins, summary.truth, (v.max(0.0) / summary.n as f64).sqrt())
}

/// Writes the requested files into `dir` (created if missing) and returns
/// their paths.
pub fn emit_report(summary: &ScenarioSummary, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    if summary.methods.is_empty() {
        return Err(invalid("summary has no methods"));
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            ReportFormat::Json => {
                let path = dir.join("summary.json");
                serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), summary)?;
                written.push(path);
            }
            ReportFormat::Csv => {
                let path = dir.join("cells.csv");
                let mut out = csv::Writer::from_path(&path)?;
                out.write_record(["method", "metric", "value"])?;
                for c in summary_cells(summary) {
                    out.write_record([c.method.as_str(), &c.metric, &c.value.to_string()])?;
                }
                out.flush()?;
                written.push(path);
            }
            ReportFormat::HistogramCsv => {
                for m in summary.methods.iter().filter(|m| !m.draws.is_empty()) {
                    let path = dir.join(format!("hist_{}.csv", m.method));
                    method_histogram(summary, m, DEFAULT_BINS)?.write_csv(&path)?;
                    written.push(path);
                }
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run_scenario, RunConfig, Scenario};

    #[test]
    fn histogram_counts_everything() {
        let h = Histogram::new(&[0.0, 0.1, 0.5, 1.0, 1.0], 4, 0.5, 0.2).unwrap();
        assert_eq!(h.total(), 5);
        assert_eq!(h.counts, vec![2, 0, 1, 2]);
        assert_eq!(h.edges.len(), 5);
        let flat = Histogram::new(&[2.0, 2.0], 3, 0.0, 1.0).unwrap();
        assert_eq!(flat.total(), 2);
        assert!(Histogram::new(&[], 3, 0.0, 1.0).is_err());
    }

    #[test]
    fn json_and_csv_agree() {
        let s = Scenario::sec31_validation(0.5).unwrap();
        let summary = run_scenario(
            &s,
            &RunConfig::new(Some(100), vec![crate::estimators::Method::Dim, crate::estimators::Method::Linear], 5, 1),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&summary, dir.path(), &ReportFormat::ALL).unwrap();
        assert_eq!(files.len(), 4);
        let json: ScenarioSummary =
            serde_json::from_reader(File::open(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(json.schema_version, summary.schema_version);
        let mut rows = csv::Reader::from_path(dir.path().join("cells.csv")).unwrap();
        let mut n_rows = 0;
        for row in rows.records() {
            let row = row.unwrap();
            let method: Method = row[0].parse().unwrap();
            let m = json.method(method).unwrap();
            let from_json = method_cells(m).into_iter().find(|(k, _)| *k == &row[1]).unwrap().1.unwrap();
            assert_eq!(from_json, row[2].parse::<f64>().unwrap());
            n_rows += 1;
        }
        assert_eq!(n_rows, summary_cells(&summary).len());
    }
}
