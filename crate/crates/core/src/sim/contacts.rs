//! Contact networks for the vaccine scenario: loading and a synthetic
//! school-like stand-in.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::rng::seeded;
use crate::trial::load_edge_list;

/// Minimum number of recorded contacts for an edge.
pub const CONTACT_MIN_COUNT: u64 = 3;

/// Classes and teachers of the synthetic school.
pub const SYNTH_CLASSES: usize = 10;
pub const SYNTH_TEACHERS: usize = 10;
pub const SYNTH_STUDENTS: usize = 226;
/// Share of individuals present during the midday period.
pub const MIDDAY_ATTENDANCE: f64 = 0.5;

const EXPECTED_FORMAT: &str =
    "CSV edge list with rows `i,j` or `i,j,count` (optional header); pairs with count >= 3 become edges";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactPeriod {
    Morning,
    Midday,
}

impl ContactPeriod {
    pub const ALL: [ContactPeriod; 2] = [ContactPeriod::Morning, ContactPeriod::Midday];

    pub fn as_str(self) -> &'static str {
        match self {
            ContactPeriod::Morning => "morning",
            ContactPeriod::Midday => "midday",
        }
    }

    pub fn file_name(self) -> String {
        format!("contact_{}.csv", self.as_str())
    }
}

/// Loads `<dir>/contact_<period>.csv`, keeps pairs with at least
/// [`CONTACT_MIN_COUNT`] contacts and drops vertices left without edges.
pub fn load_contact_network(dir: &Path, period: ContactPeriod) -> Result<Network> {
    let path = dir.join(period.file_name());
    load_contact_file(&path)
}

pub fn load_contact_file(path: &Path) -> Result<Network> {
    if !path.is_file() {
        return Err(Error::MissingData {
            path: PathBuf::from(path),
            format: EXPECTED_FORMAT.to_string(),
        });
    }
    let edges = load_edge_list(path, CONTACT_MIN_COUNT)?;
    let (network, kept) = edges.network.drop_isolated();
    let dropped = edges.labels.len() - kept.len();
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} vertices without edges", path.display());
    }
    Ok(network)
}

/// Class of each synthetic individual; teachers get their own class index.
pub fn synthetic_classes() -> Vec<usize> {
    let mut out = Vec::with_capacity(SYNTH_STUDENTS + SYNTH_TEACHERS);
    for s in 0..SYNTH_STUDENTS {
        out.push(s * SYNTH_CLASSES / SYNTH_STUDENTS);
    }
    out.extend(0..SYNTH_TEACHERS);
    out
}

/// Synthetic contact counts `(i, j, count)` with `i < j` for 236
/// individuals in 10 classes plus one teacher per class. Morning contacts
/// are concentrated within classes and everyone is present; at midday only
/// a [`MIDDAY_ATTENDANCE`] share is present and contacts mix classes of the
/// same grade. Every present individual ends up with at least one pair
/// reaching [`CONTACT_MIN_COUNT`]; absent individuals have no contacts.
pub fn synthetic_contacts(period: ContactPeriod, seed: u64) -> Vec<(u64, u64, u64)> {
    let classes = synthetic_classes();
    let n = classes.len();
    let is_teacher = |i: usize| i >= SYNTH_STUDENTS;
    // mean contact counts: (same class, same grade, other, teacher with own class)
    let (same, near, far, teacher) = match period {
        ContactPeriod::Morning => (3.8, 0.3, 0.03, 3.0),
        ContactPeriod::Midday => (4.0, 2.5, 0.4, 0.6),
    };
    let mut rng = seeded(seed ^ (period as u64 + 1).wrapping_mul(0x9e37_79b9));
    let present: Vec<bool> = match period {
        ContactPeriod::Morning => vec![true; n],
        ContactPeriod::Midday => (0..n).map(|_| rng.random::<f64>() < MIDDAY_ATTENDANCE).collect(),
    };
    let mut rows = Vec::new();
    let mut strong = vec![false; n];
    for i in (0..n).filter(|&i| present[i]) {
        for j in (i + 1..n).filter(|&j| present[j]) {
            let (ci, cj) = (classes[i], classes[j]);
            let grade_gap = (ci / 2).abs_diff(cj / 2);
            let rate = match (is_teacher(i) || is_teacher(j), ci == cj) {
                (true, true) => teacher,
                (true, false) => far,
                (false, true) => same,
                (false, false) if grade_gap == 0 => near,
                (false, false) => far,
            };
            // individual sociability varies the rate
            let rate = rate * rng.random_range(0.5..1.5);
            let count = Poisson::new(rate).map_or(0.0, |p| p.sample(&mut rng)) as u64;
            if count > 0 {
                if count >= CONTACT_MIN_COUNT {
                    strong[i] = true;
                    strong[j] = true;
                }
                rows.push((i as u64, j as u64, count));
            }
        }
    }
    for i in 0..n {
        if present[i] && !strong[i] {
            // attach to a present classmate, else to anyone present
            let others = |same_class: bool| {
                (0..n).find(|&j| j != i && present[j] && (!same_class || classes[j] == classes[i]))
            };
            let Some(mate) = others(true).or_else(|| others(false)) else {
                continue;
            };
            let (a, b) = (i.min(mate) as u64, i.max(mate) as u64);
            rows.push((a, b, CONTACT_MIN_COUNT));
            strong[i] = true;
            strong[mate] = true;
        }
    }
    rows
}

/// Writes [`synthetic_contacts`] as `i,j,count` CSV.
pub fn write_synthetic_contacts(path: &Path, period: ContactPeriod, seed: u64) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["i", "j", "count"])?;
    for (i, j, c) in synthetic_contacts(period, seed) {
        out.write_record([i.to_string(), j.to_string(), c.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
