//! Experiment datasets: covariates, treatment assignment, exposures and
//! file ingestion.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::network::Network;

/// An `n x p` covariate matrix stored row-major. `p = 0` is allowed and
/// means intercept-only adjustment.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Covariates {
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * p {
            return Err(invalid(format!(
                "covariate buffer has {} values, expected {n} x {p}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("covariates must be finite"));
        }
        Ok(Self { n, p, data })
    }

    /// `n` units without covariates.
    pub fn none(n: usize) -> Self {
        Self {
            n,
            p: 0,
            data: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(invalid("covariate rows have unequal lengths"));
        }
        Self::new(rows.len(), p, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.p + j]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p];
        for i in 0..self.n {
            for (acc, v) in m.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }

    /// Empirical covariance with denominator `n`, row-major `p x p`.
    pub fn covariance(&self) -> Vec<f64> {
        let p = self.p;
        let m = self.mean();
        let mut c = vec![0.0; p * p];
        for i in 0..self.n {
            let row = self.row(i);
            for a in 0..p {
                let da = row[a] - m[a];
                for b in 0..p {
                    c[a * p + b] += da * (row[b] - m[b]);
                }
            }
        }
        c.iter_mut().for_each(|v| *v /= self.n as f64);
        c
    }

    /// Applies `z -> A z + c` to each row (`A` row-major `p x p`).
    pub fn affine(&self, a: &[f64], c: &[f64]) -> Result<Self> {
        let p = self.p;
        if a.len() != p * p || c.len() != p {
            return Err(invalid("affine map has wrong shape"));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.n {
            let row = self.row(i);
            for r in 0..p {
                data.push(c[r] + (0..p).map(|k| a[r * p + k] * row[k]).sum::<f64>());
            }
        }
        Self::new(self.n, p, data)
    }

    /// Keeps the given rows, in order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.p);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Self {
            n: rows.len(),
            p: self.p,
            data,
        }
    }
}

/// Observed data from one randomized experiment.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub y: Vec<f64>,
    pub w: Vec<bool>,
    pub z: Covariates,
    pub pi: f64,
    pub network: Option<Network>,
}

impl TrialData {
    pub fn new(y: Vec<f64>, w: Vec<bool>, z: Covariates, pi: f64) -> Result<Self> {
        check_pi(pi)?;
        if w.len() != y.len() || z.n() != y.len() {
            return Err(invalid(format!(
                "length mismatch: {} outcomes, {} treatments, {} covariate rows",
                y.len(),
                w.len(),
                z.n()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("outcomes must be finite"));
        }
        Ok(Self {
            y,
            w,
            z,
            pi,
            network: None,
        })
    }

    pub fn with_network(mut self, network: Network) -> Result<Self> {
        if network.n() != self.n() {
            return Err(invalid(format!(
                "network has {} vertices but the dataset has {} units",
                network.n(),
                self.n()
            )));
        }
        self.network = Some(network);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn treated_count(&self) -> usize {
        self.w.iter().filter(|&&w| w).count()
    }

    /// Sample treatment proportion.
    pub fn pi_hat(&self) -> f64 {
        self.treated_count() as f64 / self.n() as f64
    }

    /// Same outcomes and treatments with a different covariate matrix.
    pub fn with_covariates(&self, z: Covariates) -> Result<Self> {
        let mut out = Self::new(self.y.clone(), self.w.clone(), z, self.pi)?;
        out.network = self.network.clone();
        Ok(out)
    }
}

pub fn check_pi(pi: f64) -> Result<()> {
    if pi > 0.0 && pi < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("treatment probability {pi} outside (0, 1)")))
    }
}

/// I.i.d. Bernoulli(`pi`) treatment indicators.
pub fn assign_treatments<R: Rng + ?Sized>(n: usize, pi: f64, rng: &mut R) -> Result<Vec<bool>> {
    check_pi(pi)?;
    Ok((0..n).map(|_| rng.random::<f64>() < pi).collect())
}

/// Treated-neighbor fractions `M_i / N_i`.
pub fn exposure_fractions(network: &Network, w: &[bool]) -> Result<Vec<f64>> {
    if w.len() != network.n() {
        return Err(invalid("treatment vector length does not match the network"));
    }
    network.require_no_isolated()?;
    Ok((0..network.n())
        .map(|i| {
            let nb = network.neighbors(i);
            let m = nb.iter().filter(|&&j| w[j]).count();
            m as f64 / nb.len() as f64
        })
        .collect())
}

/// Treated-neighbor counts `M_i`.
pub fn treated_neighbor_counts(network: &Network, w: &[bool]) -> Vec<usize> {
    (0..network.n())
        .map(|i| network.neighbors(i).iter().filter(|&&j| w[j]).count())
        .collect()
}

/// Result of reading a contact edge list.
#[derive(Debug, Clone)]
pub struct EdgeList {
    pub network: Network,
    /// Original vertex id of each dense vertex index.
    pub labels: Vec<u64>,
    pub self_loops_dropped: usize,
}

/// Reads rows `i,j` or `i,j,count` (optional header line) and keeps an
/// undirected edge wherever the count aggregated over both orientations
/// reaches `min_count`. Every id that appears in the file becomes a vertex,
/// so pairs below the threshold can leave isolated vertices.
pub fn load_edge_list<P: AsRef<Path>>(path: P, min_count: u64) -> Result<EdgeList> {
    let mut text = String::new();
    File::open(path.as_ref())?.read_to_string(&mut text)?;
    parse_edge_list(&text, min_count)
}

pub fn parse_edge_list(text: &str, min_count: u64) -> Result<EdgeList> {
    let mut counts: HashMap<(u64, u64), u64> = HashMap::new();
    let mut ids = BTreeSet::new();
    let mut self_loops_dropped = 0;
    let mut first_row = true;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |s: &str| s.parse::<u64>();
        if std::mem::take(&mut first_row)
            && fields.first().is_some_and(|f| f.parse::<f64>().is_err())
        {
            // a leading non-numeric row is a header
            continue;
        }
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected `i,j` or `i,j,count`, found `{line}`"),
            });
        }
        let bad = |what: &str, s: &str| Error::Parse {
            line: line_no,
            message: format!("{what} `{s}` is not a nonnegative integer"),
        };
        let i = parse(fields[0]).map_err(|_| bad("vertex id", fields[0]))?;
        let j = parse(fields[1]).map_err(|_| bad("vertex id", fields[1]))?;
        let c = match fields.get(2) {
            Some(s) => parse(s).map_err(|_| bad("count", s))?,
            None => 1,
        };
        if i == j {
            self_loops_dropped += 1;
            continue;
        }
        ids.insert(i);
        ids.insert(j);
        *counts.entry((i.min(j), i.max(j))).or_insert(0) += c;
    }
    if self_loops_dropped > 0 {
        log::warn!("dropped {self_loops_dropped} self-loop rows");
    }
    let labels: Vec<u64> = ids.into_iter().collect();
    let index: HashMap<u64, usize> = labels.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let edges = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|((i, j), _)| (index[&i], index[&j]));
    let network = Network::from_edges(labels.len(), edges)?;
    Ok(EdgeList {
        network,
        labels,
        self_loops_dropped,
    })
}

/// Reads a dataset CSV with header `y,w,z1,...,zp`.
pub fn read_dataset<P: AsRef<Path>>(path: P, pi: f64) -> Result<TrialData> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 2 || names[0] != "y" || names[1] != "w" {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `y,w,z1,...`, found `{}`", names.join(",")),
        });
    }
    for (k, name) in names.iter().enumerate().skip(2) {
        if *name != format!("z{}", k - 1) {
            return Err(Error::Parse {
                line: 1,
                message: format!("column {} should be `z{}`, found `{name}`", k + 1, k - 1),
            });
        }
    }
    let p = names.len() - 2;
    let (mut y, mut w, mut z) = (Vec::new(), Vec::new(), Vec::new());
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(k + 2, |pos| pos.line() as usize);
        let num = |s: &str| {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("`{s}` is not a number"),
            })
        };
        y.push(num(&record[0])?);
        w.push(match &record[1] {
            "1" | "1.0" | "true" => true,
            "0" | "0.0" | "false" => false,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("treatment `{other}` must be 0 or 1"),
                })
            }
        });
        for s in record.iter().skip(2) {
            z.push(num(s)?);
        }
    }
    let n = y.len();
    TrialData::new(y, w, Covariates::new(n, p, z)?, pi)
}

pub fn write_dataset<W: Write>(data: &TrialData, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["y".to_string(), "w".to_string()];
    header.extend((1..=data.z.p()).map(|k| format!("z{k}")));
    writer.write_record(&header)?;
    for i in 0..data.n() {
        let mut row = vec![data.y[i].to_string(), u8::from(data.w[i]).to_string()];
        row.extend(data.z.row(i).iter().map(f64::to_string));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
