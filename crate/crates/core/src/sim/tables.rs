//! Preset grids for the reference tables and figure, with side-by-side
//! reference and computed values.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::{rule_of_thumb_bandwidth, Method, NpTuning};

use super::contacts::{load_contact_network, ContactPeriod};
use super::harness::{run_scenario, RunConfig, ScenarioSummary, SCHEMA_VERSION};
use super::scenario::Scenario;

/// Replicates per cell at full budget.
pub const FULL_REPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableId {
    /// Coverage of the regression-adjusted intervals on the validation design.
    Table1,
    /// Nonparametric `n MSE` over a `(h, alpha)` grid.
    Table2,
    /// Coverage of the nonparametric intervals.
    Table3,
    /// Nonparametric estimator as the covariate dimension grows.
    Table4,
    /// One experiment on each contact network.
    Table5,
    /// Repeated experiments on each contact network.
    Table6,
    /// Linear versus nonparametric `n MSE` across sample sizes.
    Fig3,
}

impl TableId {
    pub const ALL: [TableId; 7] = [
        TableId::Table1,
        TableId::Table2,
        TableId::Table3,
        TableId::Table4,
        TableId::Table5,
        TableId::Table6,
        TableId::Fig3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TableId::Table1 => "table1",
            TableId::Table2 => "table2",
            TableId::Table3 => "table3",
            TableId::Table4 => "table4",
            TableId::Table5 => "table5",
            TableId::Table6 => "table6",
            TableId::Fig3 => "fig3",
        }
    }

    pub fn needs_contact_data(self) -> bool {
        matches!(self, TableId::Table5 | TableId::Table6)
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TableId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownKey {
                kind: "table",
                key: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceOptions {
    /// Fraction of [`FULL_REPS`] to run.
    pub budget: f64,
    /// Explicit replicate count, overriding `budget`.
    pub reps: Option<usize>,
    pub seed: u64,
    pub workers: usize,
    /// Directory holding `contact_morning.csv` and `contact_midday.csv`.
    pub contact_dir: PathBuf,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            budget: 1.0,
            reps: None,
            seed: 20_240_101,
            workers: std::thread::available_parallelism().map_or(1, |w| w.get()),
            contact_dir: PathBuf::from("data"),
        }
    }
}

impl ReproduceOptions {
    pub fn reps(&self) -> Result<usize> {
        match self.reps {
            Some(0) => Err(invalid("reps must be at least 1")),
            Some(r) => Ok(r),
            None if self.budget > 0.0 && self.budget <= 1.0 => {
                Ok(((FULL_REPS as f64 * self.budget).round() as usize).max(1))
            }
            None => Err(invalid(format!("budget {} outside (0, 1]", self.budget))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub label: String,
    pub reference: Option<f64>,
    pub computed: f64,
    /// Allowed `|computed - reference|`, already widened for scaled runs. Cells
    /// without a tolerance are reported only.
    pub tolerance: Option<f64>,
    pub within: Option<bool>,
}

impl TableCell {
    fn new(label: String, reference: Option<f64>, computed: f64, tolerance: Option<f64>) -> Self {
        let within = reference.zip(tolerance).map(|(p, t)| (computed - p).abs() <= t);
        Self {
            label,
            reference,
            computed,
            tolerance,
            within,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub schema_version: u32,
    pub table: TableId,
    pub reps: usize,
    /// Whether fewer than [`FULL_REPS`] replicates were run.
    pub scaled: bool,
    /// `sqrt(FULL_REPS / reps)` for scaled runs, else 1.
    pub tolerance_factor: f64,
    pub seed: u64,
    pub cells: Vec<TableCell>,
    pub summaries: Vec<ScenarioSummary>,
}

impl TableReport {
    pub fn cell(&self, label: &str) -> Option<&TableCell> {
        self.cells.iter().find(|c| c.label == label)
    }

    /// Cells with a tolerance that fall outside it.
    pub fn misses(&self) -> Vec<&TableCell> {
        self.cells.iter().filter(|c| c.within == Some(false)).collect()
    }
}

struct Ctx<'a> {
    options: &'a ReproduceOptions,
    reps: usize,
    factor: f64,
    cells: Vec<TableCell>,
    summaries: Vec<ScenarioSummary>,
}

impl Ctx<'_> {
    fn run(&mut self, scenario: &Scenario, n: Option<usize>, methods: Vec<Method>, variance: bool) -> Result<usize> {
        let mut config = RunConfig::new(n, methods, self.reps, self.options.seed).with_workers(self.options.workers);
        config.variance = variance;
        self.summaries.push(run_scenario(scenario, &config)?);
        Ok(self.summaries.len() - 1)
    }

    fn cell(&mut self, label: String, reference: Option<f64>, computed: f64, tolerance: Option<f64>) {
        self.cells
            .push(TableCell::new(label, reference, computed, tolerance.map(|t| t * self.factor)));
    }
}

fn stat(summary: &ScenarioSummary, method: Method, pick: impl Fn(&super::MethodSummary) -> Option<f64>) -> f64 {
    summary.method(method).and_then(pick).unwrap_or(f64::NAN)
}

const TABLE1_OURS: [[f64; 3]; 3] = [[0.901, 0.935, 0.964], [0.914, 0.941, 0.960], [0.925, 0.943, 0.963]];
const TABLE1_CONSERVATIVE: [[f64; 3]; 3] = [[0.837, 0.853, 0.880], [0.848, 0.856, 0.892], [0.832, 0.852, 0.897]];
const TABLE2_P1: [(f64, f64, f64); 5] =
    [(0.2, 1.906, 2.165), (0.4, 1.896, 1.845), (0.6, 1.740, 1.826), (0.8, 1.755, 1.974), (1.0, 2.095, 1.875)];
const TABLE2_P5: [(f64, f64, f64); 5] =
    [(1.8, 1.949, 2.207), (2.0, 1.858, 1.973), (2.2, 2.057, 1.907), (2.4, 2.015, 2.204), (2.6, 2.035, 2.009)];
const TABLE3: [(usize, [f64; 3]); 2] = [(1, [0.965, 0.971, 0.971]), (5, [0.921, 0.973, 0.983])];
/// `(p, h, mean, n variance, n MSE)`.
const TABLE4: [(usize, f64, f64, f64, f64); 10] = [
    (1, 0.518, 0.200, 1.735, 1.735),
    (2, 0.745, 0.200, 1.794, 1.794),
    (3, 0.995, 0.200, 1.957, 1.958),
    (4, 1.831, 0.199, 1.922, 1.923),
    (5, 2.173, 0.198, 2.016, 2.019),
    (6, 2.523, 0.199, 2.103, 2.104),
    (7, 2.881, 0.204, 2.248, 2.267),
    (8, 3.652, 0.191, 1.902, 1.982),
    (9, 4.046, 0.192, 2.092, 2.144),
    (10, 4.443, 0.194, 2.120, 2.147),
];
/// `(estimate, SE, CI low, CI high)` for dim, linear, nonparametric.
const TABLE5: [(ContactPeriod, [[f64; 4]; 3]); 2] = [
    (
        ContactPeriod::Morning,
        [[-0.217, 0.0498, -0.315, -0.119], [-0.243, 0.0338, -0.310, -0.177], [-0.255, 0.0334, -0.320, -0.189]],
    ),
    (
        ContactPeriod::Midday,
        [[-0.234, 0.0721, -0.375, -0.092], [-0.256, 0.0536, -0.361, -0.151], [-0.243, 0.0528, -0.347, -0.140]],
    ),
];
/// `(mean, SE, coverage, coverage without network term)` and the
/// reference standard-error reduction of linear over dim.
const TABLE6: [(ContactPeriod, [[f64; 4]; 3], f64); 2] = [
    (
        ContactPeriod::Morning,
        [[-0.231, 0.0584, 0.944, 0.912], [-0.232, 0.0416, 0.923, 0.853], [-0.225, 0.0403, 0.945, 0.862]],
        0.283,
    ),
    (
        ContactPeriod::Midday,
        [[-0.229, 0.0941, 0.962, 0.917], [-0.228, 0.0734, 0.954, 0.839], [-0.216, 0.0718, 0.971, 0.839]],
        0.220,
    ),
];
const CONTACT_METHODS: [Method; 3] = [Method::Dim, Method::Linear, Method::Nonparametric];

/// Tolerance on coverage cells (binomial noise plus design slack).
const COVERAGE_TOL: f64 = 0.03;
/// Tolerance on mean cells.
const MEAN_TOL: f64 = 0.01;
/// Tolerance on `n MSE` and `n variance` cells.
const NMSE_TOL: f64 = 0.5;

/// Runs the preset grid for `table` and pairs each computed value with its
/// reference value.
pub fn reproduce_table(table: TableId, options: &ReproduceOptions) -> Result<TableReport> {
    let reps = options.reps()?;
    let networks = if table.needs_contact_data() {
        ContactPeriod::ALL
            .into_iter()
            .map(|p| Ok((p, load_contact_network(&options.contact_dir, p)?)))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let factor = if reps < FULL_REPS {
        (FULL_REPS as f64 / reps as f64).sqrt()
    } else {
        1.0
    };
    let mut ctx = Ctx {
        options,
        reps,
        factor,
        cells: Vec::new(),
        summaries: Vec::new(),
    };
    match table {
        TableId::Table1 => {
            for (row, n) in [100, 300, 500].into_iter().enumerate() {
                for (col, pi) in [0.5, 0.6, 0.7].into_iter().enumerate() {
                    let k = ctx.run(&Scenario::sec31_validation(pi)?, Some(n), vec![Method::Linear], true)?;
                    let s = &ctx.summaries[k];
                    let ours = stat(s, Method::Linear, |m| m.coverage);
                    let cons = stat(s, Method::Linear, |m| m.coverage_conservative);
                    ctx.cell(format!("n={n} pi={pi} coverage"), Some(TABLE1_OURS[row][col]), ours, Some(COVERAGE_TOL));
                    ctx.cell(
                        format!("n={n} pi={pi} conservative coverage"),
                        Some(TABLE1_CONSERVATIVE[row][col]),
                        cons,
                        None,
                    );
                }
            }
        }
        TableId::Table2 => {
            for (p, grid) in [(1usize, TABLE2_P1), (5, TABLE2_P5)] {
                for (h, reference01, reference05) in grid {
                    for (alpha, reference) in [(0.01, reference01), (0.05, reference05)] {
                        let tuning = NpTuning {
                            h_band: Some(h),
                            ..NpTuning::with_alpha(alpha)
                        };
                        let scenario = Scenario::sec41_main(p, true)?.with_np_tuning(tuning);
                        let k = ctx.run(&scenario, Some(1000), vec![Method::Nonparametric], false)?;
                        let v = stat(&ctx.summaries[k], Method::Nonparametric, |m| Some(m.n_mse));
                        ctx.cell(format!("p={p} h={h} alpha={alpha} n_mse"), Some(reference), v, Some(NMSE_TOL));
                    }
                }
            }
        }
        TableId::Table3 => {
            for (p, references) in TABLE3 {
                for (n, reference) in [100, 300, 500].into_iter().zip(references) {
                    let k = ctx.run(&Scenario::sec41_main(p, true)?, Some(n), vec![Method::Nonparametric], true)?;
                    let v = stat(&ctx.summaries[k], Method::Nonparametric, |m| m.coverage);
                    ctx.cell(format!("p={p} n={n} coverage"), Some(reference), v, Some(COVERAGE_TOL));
                }
            }
        }
        TableId::Table4 => {
            for (p, h, mean, nvar, nmse) in TABLE4 {
                let k = ctx.run(&Scenario::sec41_main(p, true)?, Some(1000), vec![Method::Nonparametric], false)?;
                let s = &ctx.summaries[k];
                let m = s.method(Method::Nonparametric).expect("requested");
                let (m_mean, m_nvar, m_nmse) = (m.mean, m.n_variance, m.n_mse);
                let h_used = rule_of_thumb_bandwidth(1000, p, None)?;
                ctx.cells.push(TableCell::new(format!("p={p} h"), Some(h), h_used, Some(1e-3)));
                ctx.cell(format!("p={p} mean"), Some(mean), m_mean, Some(MEAN_TOL));
                ctx.cell(format!("p={p} n_variance"), Some(nvar), m_nvar, Some(NMSE_TOL));
                ctx.cell(format!("p={p} n_mse"), Some(nmse), m_nmse, Some(NMSE_TOL));
            }
        }
        TableId::Table5 => {
            for ((period, network), (_, reference)) in networks.into_iter().zip(TABLE5) {
                let mut single = ctx.options.clone();
                single.reps = Some(1);
                let scenario = Scenario::contact_vaccine(network)?;
                let config = RunConfig::new(None, CONTACT_METHODS.to_vec(), 1, single.seed).with_workers(single.workers);
                let s = run_scenario(&scenario, &config)?;
                let z = crate::stats::normal_quantile(0.5 + 0.5 * s.level);
                for (method, reference) in CONTACT_METHODS.into_iter().zip(reference) {
                    let Some(d) = s.method(method).and_then(|m| m.draws.first()).copied() else {
                        continue;
                    };
                    let se = d.v_hat.map_or(f64::NAN, |v| (v.max(0.0) / s.n as f64).sqrt());
                    let tag = format!("{} {}", period.as_str(), method);
                    ctx.cells.push(TableCell::new(format!("{tag} estimate"), Some(reference[0]), d.tau_hat, None));
                    ctx.cells.push(TableCell::new(format!("{tag} se"), Some(reference[1]), se, None));
                    ctx.cells.push(TableCell::new(format!("{tag} ci_low"), Some(reference[2]), d.tau_hat - z * se, None));
                    ctx.cells.push(TableCell::new(format!("{tag} ci_high"), Some(reference[3]), d.tau_hat + z * se, None));
                }
                ctx.summaries.push(s);
            }
        }
        TableId::Table6 => {
            for ((period, network), (_, reference, reduction)) in networks.into_iter().zip(TABLE6) {
                let k = ctx.run(&Scenario::contact_vaccine(network)?, None, CONTACT_METHODS.to_vec(), true)?;
                let s = ctx.summaries[k].clone();
                for (method, reference) in CONTACT_METHODS.into_iter().zip(reference) {
                    let tag = format!("{} {}", period.as_str(), method);
                    ctx.cells.push(TableCell::new(format!("{tag} mean"), Some(reference[0]), stat(&s, method, |m| Some(m.mean)), None));
                    ctx.cells.push(TableCell::new(format!("{tag} se"), Some(reference[1]), stat(&s, method, |m| m.mean_se), None));
                    ctx.cells.push(TableCell::new(format!("{tag} coverage"), Some(reference[2]), stat(&s, method, |m| m.coverage), None));
                    ctx.cells.push(TableCell::new(
                        format!("{tag} coverage_no_network"),
                        Some(reference[3]),
                        stat(&s, method, |m| m.coverage_no_network),
                        None,
                    ));
                }
                let se_dim = stat(&s, Method::Dim, |m| m.mean_se);
                let se_lin = stat(&s, Method::Linear, |m| m.mean_se);
                ctx.cells.push(TableCell::new(
                    format!("{} linear se_reduction", period.as_str()),
                    Some(reduction),
                    1.0 - se_lin / se_dim,
                    None,
                ));
                let var_dim = stat(&s, Method::Dim, |m| Some(m.variance));
                let var_lin = stat(&s, Method::Linear, |m| Some(m.variance));
                ctx.cells.push(TableCell::new(
                    format!("{} linear variance_reduction", period.as_str()),
                    None,
                    1.0 - var_lin / var_dim,
                    None,
                ));
            }
        }
        TableId::Fig3 => {
            let scenario = Scenario::sec41_main(5, true)?.with_np_tuning(NpTuning::with_alpha(0.05));
            for n in [200, 500, 1000] {
                let k = ctx.run(&scenario, Some(n), vec![Method::Linear, Method::Nonparametric], false)?;
                let s = &ctx.summaries[k];
                let lin = stat(s, Method::Linear, |m| Some(m.n_mse));
                let np = stat(s, Method::Nonparametric, |m| Some(m.n_mse));
                let reference_lin = (n == 1000).then_some(3.95);
                ctx.cell(format!("n={n} linear n_mse"), reference_lin, lin, reference_lin.map(|_| 0.55));
                ctx.cell(format!("n={n} nonparametric n_mse"), None, np, None);
            }
        }
    }
    Ok(TableReport {
        schema_version: SCHEMA_VERSION,
        table,
        reps,
        scaled: reps < FULL_REPS,
        tolerance_factor: factor,
        seed: options.seed,
        cells: ctx.cells,
        summaries: ctx.summaries,
    })
}

/// Writes `<table>.json` (cells and run summaries) and `<table>.csv`
/// (cells only) into `dir`.
pub fn write_table_report(report: &TableReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let json = dir.join(format!("{}.json", report.table));
    serde_json::to_writer_pretty(BufWriter::new(File::create(&json)?), report)?;
    let csv_path = dir.join(format!("{}.csv", report.table));
    let mut out = csv::Writer::from_path(&csv_path)?;
    out.write_record(["label", "reference", "computed", "tolerance", "within"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in &report.cells {
        out.write_record([
            c.label.clone(),
            opt(c.reference),
            c.computed.to_string(),
            opt(c.tolerance),
            c.within.map(|w| w.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(vec![json, csv_path])
}
