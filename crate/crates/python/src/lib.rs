//! Python bindings for `netate`.
//!
//! Structured results (reports, summaries) are returned as plain `dict`s
//! built from their JSON serialization. Long-running calls release the
//! interpreter lock.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use netate::analysis::{analyze as analyze_data, AnalysisOptions, VarianceMode};
use netate::estimators::{Method, NpTuning};
use netate::graphon::{graphon_b as graphon_b_value, sample_graph as sample_graph_from, sample_latents, GraphonSpec};
use netate::network::Network;
use netate::quadrature::DEFAULT_TOL;
use netate::rng::{Component, StreamKey};
use netate::sim::{
    load_contact_file, reproduce_table, run_scenario, theoretical_variance_oracle, Formula, ReproduceOptions,
    RunConfig, Scenario, ScenarioId, TableId, GRAPHON_SPARSITY,
};
use netate::spectral::leading_eigenpairs;
use netate::trial::{load_edge_list, Covariates, TrialData};
use netate::variance::{estimate_b, PiSource, PolyBasis};

fn to_py_err(e: netate::Error) -> PyErr {
    match e {
        netate::Error::Io(io) => PyIOError::new_err(io.to_string()),
        netate::Error::MissingData { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Converts any serializable value to the equivalent Python object.
fn to_python<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |w| w.get())
}

/// Undirected simple graph on vertices `0..n`.
#[pyclass(name = "Network", module = "netate_py", frozen)]
pub struct PyNetwork {
    inner: Arc<Network>,
}

#[pymethods]
impl PyNetwork {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        let inner = Network::from_edges(n, edges).map_err(to_py_err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    /// Reads an `i,j[,count]` edge list. With `n`, ids are unit indices in
    /// `0..n`; otherwise ids are relabeled densely in sorted order.
    #[staticmethod]
    #[pyo3(signature = (path, n=None, min_count=1))]
    fn from_edge_file(path: PathBuf, n: Option<usize>, min_count: u64) -> PyResult<Self> {
        let list = load_edge_list(&path, min_count).map_err(to_py_err)?;
        let inner = match n {
            Some(n) => netate::analysis::network_for_units(&list, n).map_err(to_py_err)?,
            None => list.network,
        };
        Ok(Self { inner: Arc::new(inner) })
    }

    /// Reads a contact-count file, keeps pairs with at least three contacts
    /// and drops vertices left without edges.
    #[staticmethod]
    fn from_contact_file(path: PathBuf) -> PyResult<Self> {
        let inner = load_contact_file(&path).map_err(to_py_err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn degrees(&self) -> Vec<usize> {
        self.inner.degrees()
    }

    /// Edges `(i, j)` with `i < j`.
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().collect()
    }

    fn isolated_vertices(&self) -> Vec<usize> {
        self.inner.isolated_vertices()
    }

    /// Plug-in estimate of the degree-overlap constant `b`.
    fn estimate_b(&self) -> PyResult<f64> {
        estimate_b(&self.inner).map_err(to_py_err)
    }

    /// The `r` eigenvalues of largest magnitude and their eigenvectors.
    fn leading_eigenpairs(&self, py: Python<'_>, r: usize) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let network = Arc::clone(&self.inner);
        let dec = py.detach(move || leading_eigenpairs(&network, r)).map_err(to_py_err)?;
        Ok((dec.eigenvalues, dec.eigenvectors))
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Network(n={}, edges={})", self.inner.n(), self.inner.edge_count())
    }
}

/// Samples a graph on `n` vertices from a graphon (`quadratic`,
/// `constant:<c>` or `rank1:<expr>`) with sparsity `n^(-gamma)`.
#[pyfunction]
#[pyo3(signature = (n, graphon="quadratic", gamma=GRAPHON_SPARSITY, seed=1))]
fn sample_graph(py: Python<'_>, n: usize, graphon: &str, gamma: f64, seed: u64) -> PyResult<PyNetwork> {
    let spec = GraphonSpec::from_key(graphon, gamma).map_err(to_py_err)?;
    let inner = py
        .detach(move || {
            let key = StreamKey::new(seed);
            let latents = sample_latents(n, &mut key.stream(Component::Latents, 0))?;
            sample_graph_from(&spec, &latents, &mut key.stream(Component::Edges, 0))
        })
        .map_err(to_py_err)?;
    Ok(PyNetwork { inner: Arc::new(inner) })
}

/// Population constant `b` of a graphon.
#[pyfunction]
#[pyo3(signature = (graphon="quadratic", gamma=GRAPHON_SPARSITY))]
fn graphon_b(graphon: &str, gamma: f64) -> PyResult<f64> {
    let spec = GraphonSpec::from_key(graphon, gamma).map_err(to_py_err)?;
    graphon_b_value(&spec, DEFAULT_TOL).map_err(to_py_err)
}

/// Estimates the average treatment effect of a Bernoulli(`pi`) experiment.
///
/// `z` holds one covariate row per unit (may be empty rows for no
/// covariates). Returns the analysis report as a `dict`.
#[pyfunction]
#[pyo3(signature = (
    y, w, pi, z=None, network=None, method="linear", variance=None, rank=None,
    level=0.95, max_degree=5, rel_tol=0.05, legendre=false, sample_pi=false,
    alpha=0.01, h_band=None, b_trim=None, bandwidth_constant=None,
))]
#[allow(clippy::too_many_arguments)]
fn analyze(
    py: Python<'_>,
    y: Vec<f64>,
    w: Vec<bool>,
    pi: f64,
    z: Option<Vec<Vec<f64>>>,
    network: Option<PyRef<'_, PyNetwork>>,
    method: &str,
    variance: Option<&str>,
    rank: Option<usize>,
    level: f64,
    max_degree: usize,
    rel_tol: f64,
    legendre: bool,
    sample_pi: bool,
    alpha: f64,
    h_band: Option<f64>,
    b_trim: Option<f64>,
    bandwidth_constant: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let method: Method = method.parse().map_err(to_py_err)?;
    let variance = variance.map(str::parse::<VarianceMode>).transpose().map_err(to_py_err)?;
    let covariates = match z {
        Some(rows) if rows.iter().any(|r| !r.is_empty()) => Covariates::from_rows(&rows),
        _ => Ok(Covariates::none(y.len())),
    }
    .map_err(to_py_err)?;
    let mut data = TrialData::new(y, w, covariates, pi).map_err(to_py_err)?;
    if let Some(net) = network {
        data = data.with_network((*net.inner).clone()).map_err(to_py_err)?;
    }
    let options = AnalysisOptions {
        variance,
        rank,
        np_tuning: NpTuning {
            alpha,
            h_band,
            b_trim,
            bandwidth_constant,
            ..NpTuning::default()
        },
        max_degree,
        rel_tol,
        basis: if legendre { PolyBasis::Legendre } else { PolyBasis::Monomial },
        level,
        pi_source: if sample_pi { PiSource::Sample } else { PiSource::Design },
        ..AnalysisOptions::new(method)
    };
    let report = py.detach(move || analyze_data(&data, &options)).map_err(to_py_err)?;
    to_python(py, &report)
}

fn build_scenario(
    scenario: &str,
    pi: Option<f64>,
    p: usize,
    interference: bool,
    contact_file: Option<PathBuf>,
) -> netate::Result<Scenario> {
    let id: ScenarioId = scenario.parse()?;
    let built = match id {
        ScenarioId::Sec31Validation => Scenario::sec31_validation(pi.unwrap_or(0.5))?,
        ScenarioId::Sec41Main => Scenario::sec41_main(p, interference)?,
        ScenarioId::ContactVaccine => {
            let path = contact_file.unwrap_or_else(|| PathBuf::from("data/contact_morning.csv"));
            Scenario::contact_vaccine(load_contact_file(&path)?)?
        }
    };
    match pi {
        Some(pi) => built.with_pi(pi),
        None => Ok(built),
    }
}

/// Runs a Monte Carlo study of a registered scenario and returns its
/// summary as a `dict`.
#[pyfunction]
#[pyo3(signature = (
    scenario, reps=100, seed=1, n=None, pi=None, p=1, interference=true,
    methods=None, variance=true, workers=None, contact_file=None,
))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    scenario: &str,
    reps: usize,
    seed: u64,
    n: Option<usize>,
    pi: Option<f64>,
    p: usize,
    interference: bool,
    methods: Option<Vec<String>>,
    variance: bool,
    workers: Option<usize>,
    contact_file: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let scenario = build_scenario(scenario, pi, p, interference, contact_file).map_err(to_py_err)?;
    let methods = methods
        .unwrap_or_else(|| vec!["dim".into(), "linear".into(), "np".into()])
        .iter()
        .map(|m| m.parse())
        .collect::<netate::Result<Vec<Method>>>()
        .map_err(to_py_err)?;
    let mut config = RunConfig::new(n, methods, reps, seed).with_workers(workers.unwrap_or_else(default_workers));
    config.variance = variance;
    let summary = py.detach(move || run_scenario(&scenario, &config)).map_err(to_py_err)?;
    to_python(py, &summary)
}

/// Monte Carlo value of an asymptotic-variance formula (`vreg`, `vdim` or
/// `vnp`). Returns `(value, std_error)`.
#[pyfunction]
#[pyo3(signature = (scenario, formula, mc_reps=200_000, seed=1, pi=None, p=1, interference=true, contact_file=None))]
#[allow(clippy::too_many_arguments)]
fn oracle(
    py: Python<'_>,
    scenario: &str,
    formula: &str,
    mc_reps: usize,
    seed: u64,
    pi: Option<f64>,
    p: usize,
    interference: bool,
    contact_file: Option<PathBuf>,
) -> PyResult<(f64, f64)> {
    let scenario = build_scenario(scenario, pi, p, interference, contact_file).map_err(to_py_err)?;
    let formula = match formula {
        "vreg" => Formula::Vreg,
        "vdim" => Formula::Vdim,
        "vnp" => Formula::Vnp,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown formula `{other}` (expected vreg, vdim or vnp)"
            )))
        }
    };
    let est = py
        .detach(move || theoretical_variance_oracle(&scenario, &formula, mc_reps, seed))
        .map_err(to_py_err)?;
    Ok((est.value, est.std_error))
}

/// Re-runs a reference table (`table1`..`table6`, `fig3`) and returns the
/// comparison report as a `dict`.
#[pyfunction]
#[pyo3(signature = (table, reps=None, budget=1.0, seed=None, workers=None, contact_dir=None))]
fn reproduce(
    py: Python<'_>,
    table: &str,
    reps: Option<usize>,
    budget: f64,
    seed: Option<u64>,
    workers: Option<usize>,
    contact_dir: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let table: TableId = table.parse().map_err(to_py_err)?;
    let defaults = ReproduceOptions::default();
    let options = ReproduceOptions {
        budget,
        reps,
        seed: seed.unwrap_or(defaults.seed),
        workers: workers.unwrap_or_else(default_workers),
        contact_dir: contact_dir.unwrap_or(defaults.contact_dir),
    };
    let report = py.detach(move || reproduce_table(table, &options)).map_err(to_py_err)?;
    to_python(py, &report)
}

#[pymodule]
fn netate_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(sample_graph, m)?)?;
    m.add_function(wrap_pyfunction!(graphon_b, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pyo3::types::{PyDict, PyModule};

    fn module(py: Python<'_>) -> Bound<'_, PyModule> {
        let m = PyModule::new(py, "netate_py").unwrap();
        netate_py(&m).unwrap();
        m
    }

    #[test]
    fn analyze_returns_report_dict() {
        Python::initialize();
        Python::attach(|py| {
            let m = module(py);
            let y = vec![1.0, 2.0, 3.5, 0.5, 1.5, 2.5];
            let w = vec![true, true, true, false, false, false];
            let report = m.getattr("analyze").unwrap().call1((y, w, 0.5)).unwrap();
            let report = report.cast::<PyDict>().unwrap();
            let tau: f64 = report.get_item("tau_hat").unwrap().unwrap().extract().unwrap();
            assert!((tau - (6.5 / 3.0 - 1.5)).abs() < 1e-12);
            let method: String = report.get_item("method").unwrap().unwrap().extract().unwrap();
            assert_eq!(method, "linear");
        });
    }

    #[test]
    fn errors_map_to_python_exceptions() {
        Python::initialize();
        Python::attach(|py| {
            let m = module(py);
            let err = m.getattr("analyze").unwrap().call1((vec![1.0], vec![true], 2.0)).unwrap_err();
            assert!(err.is_instance_of::<PyValueError>(py));
            let err = m
                .getattr("Network")
                .unwrap()
                .call_method1("from_contact_file", ("/nonexistent/contacts.csv",))
                .unwrap_err();
            assert!(err.is_instance_of::<PyIOError>(py));
        });
    }

    #[test]
    fn network_roundtrip() {
        Python::initialize();
        Python::attach(|py| {
            let m = module(py);
            let net = m
                .getattr("Network")
                .unwrap()
                .call1((4usize, vec![(0usize, 1usize), (1, 2), (2, 3), (3, 0)]))
                .unwrap();
            let edges: Vec<(usize, usize)> = net.call_method0("edges").unwrap().extract().unwrap();
            assert_eq!(edges.len(), 4);
            let b: f64 = net.call_method0("estimate_b").unwrap().extract().unwrap();
            assert!((b - 1.0).abs() < 1e-12);
            assert_eq!(net.repr().unwrap().to_string(), "Network(n=4, edges=4)");
        });
    }
}
