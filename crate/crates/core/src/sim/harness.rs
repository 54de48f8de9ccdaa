//! Seeded parallel Monte Carlo driver.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::{difference_in_means, fit_linear, nonparametric_tuned, Diagnostics, Method};
use crate::graphon::{sample_graph, sample_latents};
use crate::network::Network;
use crate::outcome::simulate_outcomes;
use crate::rng::{Component, StreamKey};
use crate::spectral::{leading_eigenpairs, SpectralDecomposition};
use crate::stats::{mean, normal_quantile, sample_variance};
use crate::trial::{assign_treatments, exposure_fractions, Covariates, TrialData};
use crate::variance::{
    conservative_network_term, estimate_b, network_term, variance_np_polyseq, variance_reg, NetworkTerm,
    PolyBasis,
};

use super::scenario::{NetworkSource, Scenario, ScenarioId};

/// Version of the [`ScenarioSummary`] JSON layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Largest tolerated share of failed replicates per method.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Sample size; `None` for fixed-network scenarios, which use the
    /// network's size.
    pub n: Option<usize>,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub seed: u64,
    pub workers: usize,
    pub level: f64,
    /// Whether to estimate variances and confidence intervals.
    pub variance: bool,
}

impl RunConfig {
    pub fn new(n: Option<usize>, methods: Vec<Method>, reps: usize, seed: u64) -> Self {
        Self {
            n,
            methods,
            reps,
            seed,
            workers: std::thread::available_parallelism().map_or(1, |w| w.get()),
            level: 0.95,
            variance: true,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn without_variance(mut self) -> Self {
        self.variance = false;
        self
    }
}

/// One method's output on one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateDraw {
    pub tau_hat: f64,
    pub v_hat: Option<f64>,
    /// Variance estimate with the network term set to zero.
    pub v_no_network: Option<f64>,
    /// Variance estimate with the network term replaced by the `8 tau_hat^2` bound.
    pub v_conservative: Option<f64>,
    /// Share of units kept by the nonparametric trims.
    pub kept_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub successes: usize,
    pub failures: usize,
    pub mean: f64,
    pub variance: f64,
    pub bias: f64,
    pub n_variance: f64,
    pub n_mse: f64,
    pub coverage: Option<f64>,
    pub coverage_no_network: Option<f64>,
    pub coverage_conservative: Option<f64>,
    pub mean_v_hat: Option<f64>,
    /// Mean of `sqrt(v_hat / n)`.
    pub mean_se: Option<f64>,
    pub mean_half_width: Option<f64>,
    pub kept_fraction: Option<f64>,
    /// Successful draws in replicate order.
    #[serde(skip)]
    pub draws: Vec<ReplicateDraw>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub schema_version: u32,
    pub scenario: ScenarioId,
    pub n: usize,
    pub p: usize,
    pub pi: f64,
    pub interference: bool,
    pub rank: usize,
    pub reps: usize,
    pub seed: u64,
    pub level: f64,
    pub truth: f64,
    pub methods: Vec<MethodSummary>,
    /// Message of the first replicate failure, if any.
    pub first_error: Option<String>,
}

impl ScenarioSummary {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Network quantities shared by every replicate of a fixed-network scenario.
struct FixedNetwork {
    network: Arc<Network>,
    b_hat: f64,
    spectral: SpectralDecomposition,
}

fn check_config(scenario: &Scenario, config: &RunConfig) -> Result<usize> {
    scenario.validate()?;
    if config.reps == 0 {
        return Err(invalid("reps must be at least 1"));
    }
    if config.methods.is_empty() {
        return Err(invalid("no methods requested"));
    }
    for m in &config.methods {
        if !matches!(m, Method::Dim | Method::Linear | Method::Nonparametric) {
            return Err(invalid(format!("method {m} is not supported by the simulation harness")));
        }
    }
    if !(config.level > 0.0 && config.level < 1.0) {
        return Err(invalid(format!("confidence level {} outside (0, 1)", config.level)));
    }
    let n = match (scenario.fixed_n(), config.n) {
        (Some(fixed), Some(n)) if n != fixed => {
            return Err(invalid(format!("scenario network has {fixed} vertices, requested n = {n}")))
        }
        (Some(fixed), _) => fixed,
        (None, Some(n)) => n,
        (None, None) => return Err(invalid("sample size n is required for graphon scenarios")),
    };
    if n < 4 {
        return Err(invalid(format!("n = {n} is too small")));
    }
    if scenario.interference && scenario.rank > n {
        return Err(invalid(format!("rank {} exceeds n = {n}", scenario.rank)));
    }
    Ok(n)
}

/// Runs `config.reps` seeded replicates of `scenario`. Replicate `r` draws
/// only from streams keyed by `(config.seed, r)`, and results are aggregated
/// in replicate order, so the summary does not depend on `config.workers`.
pub fn run_scenario(scenario: &Scenario, config: &RunConfig) -> Result<ScenarioSummary> {
    let n = check_config(scenario, config)?;
    let fixed = match &scenario.network {
        NetworkSource::Fixed(g) if scenario.interference => Some(FixedNetwork {
            network: Arc::clone(g),
            b_hat: estimate_b(g)?,
            spectral: if config.variance {
                leading_eigenpairs(g, scenario.rank)?
            } else {
                SpectralDecomposition::empty()
            },
        }),
        _ => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    log::info!(
        "running {} (n = {n}, reps = {}, workers = {})",
        scenario.id,
        config.reps,
        config.workers.max(1)
    );
    let results: Vec<Vec<Result<ReplicateDraw>>> = pool.install(|| {
        (0..config.reps)
            .into_par_iter()
            .map(|r| run_replicate(scenario, config, n, fixed.as_ref(), r as u64))
            .collect()
    });
    aggregate(scenario, config, n, results)
}

fn run_replicate(
    scenario: &Scenario,
    config: &RunConfig,
    n: usize,
    fixed: Option<&FixedNetwork>,
    r: u64,
) -> Vec<Result<ReplicateDraw>> {
    match simulate_replicate(scenario, config, n, fixed, r) {
        Ok((data, term)) => config
            .methods
            .iter()
            .map(|&m| estimate_draw(scenario, config, &data, &term, m))
            .collect(),
        Err(e) => {
            let msg = e.to_string();
            config
                .methods
                .iter()
                .map(|_| Err(invalid(format!("replicate {r}: {msg}"))))
                .collect()
        }
    }
}

/// Draws one replicate's trial data and the network variance inputs.
fn simulate_replicate(
    scenario: &Scenario,
    config: &RunConfig,
    n: usize,
    fixed: Option<&FixedNetwork>,
    r: u64,
) -> Result<(TrialData, NetworkTerm)> {
    let key = StreamKey::new(config.seed);
    let pi = scenario.pi;
    let sampled;
    let (network, b_hat, spectral): (Option<&Network>, f64, Option<SpectralDecomposition>) =
        match (&scenario.network, fixed) {
            _ if !scenario.interference => (None, 0.0, None),
            (_, Some(f)) => (Some(f.network.as_ref()), f.b_hat, Some(f.spectral.clone())),
            (NetworkSource::Graphon(spec), None) => {
                let latents = sample_latents(n, &mut key.stream(Component::Latents, r))?;
                sampled = sample_graph(spec, &latents, &mut key.stream(Component::Edges, r))?;
                (Some(&sampled), 0.0, None)
            }
            (NetworkSource::Fixed(_), None) => unreachable!("fixed networks are prepared up front"),
        };
    let w = assign_treatments(n, pi, &mut key.stream(Component::Treatment, r))?;
    let exposures = match network {
        Some(g) => exposure_fractions(g, &w)?,
        None => vec![pi; n],
    };
    let units = scenario.outcome.draw_units(n, &mut key.stream(Component::Units, r))?;
    let y = simulate_outcomes(&scenario.outcome, &w, &exposures, &units)?;
    let data = TrialData::new(y, w, units.z, pi)?;
    let term = match network {
        Some(g) if config.variance => {
            let (b_hat, spectral) = match spectral {
                Some(s) => (b_hat, s),
                None => (estimate_b(g)?, leading_eigenpairs(g, scenario.rank)?),
            };
            network_term(&data, g, &spectral, b_hat, pi)?
        }
        _ => NetworkTerm::NONE,
    };
    Ok((data, term))
}

fn estimate_draw(
    scenario: &Scenario,
    config: &RunConfig,
    data: &TrialData,
    term: &NetworkTerm,
    method: Method,
) -> Result<ReplicateDraw> {
    let pi = data.pi;
    let (tau_hat, v_hat, kept_fraction) = match method {
        Method::Dim => {
            let tau = difference_in_means(data)?.tau_hat;
            let v = if config.variance {
                let base = data.with_covariates(Covariates::none(data.n()))?;
                Some(variance_reg(&base, &fit_linear(&base)?, term, pi).v_hat)
            } else {
                None
            };
            (tau, v, None)
        }
        Method::Linear => {
            let fit = fit_linear(data)?;
            let v = config.variance.then(|| variance_reg(data, &fit, term, pi).v_hat);
            (fit.tau_hat, v, None)
        }
        Method::Nonparametric => {
            let est = nonparametric_tuned(data, &scenario.np_tuning)?;
            let kept = match est.diagnostics {
                Diagnostics::Nonparametric { kept, .. } => Some(kept as f64 / data.n() as f64),
                _ => None,
            };
            let v = if config.variance {
                Some(
                    variance_np_polyseq(data, term, pi, scenario.max_degree, scenario.rel_tol, PolyBasis::Monomial)?
                        .v_hat,
                )
            } else {
                None
            };
            (est.tau_hat, v, kept)
        }
        other => return Err(invalid(format!("method {other} is not supported by the simulation harness"))),
    };
    let network_part = term.value(pi);
    let v_no_network = v_hat.map(|v| v - network_part);
    let v_conservative = v_no_network.map(|v| v + pi * (1.0 - pi) * conservative_network_term(tau_hat));
    Ok(ReplicateDraw {
        tau_hat,
        v_hat,
        v_no_network,
        v_conservative,
        kept_fraction,
    })
}

fn aggregate(
    scenario: &Scenario,
    config: &RunConfig,
    n: usize,
    results: Vec<Vec<Result<ReplicateDraw>>>,
) -> Result<ScenarioSummary> {
    let truth = scenario.truth();
    let z = normal_quantile(0.5 + 0.5 * config.level);
    let mut first_error: Option<Error> = None;
    let mut per_method: Vec<Vec<ReplicateDraw>> = vec![Vec::with_capacity(config.reps); config.methods.len()];
    let mut failures = vec![0usize; config.methods.len()];
    for replicate in results {
        for (k, res) in replicate.into_iter().enumerate() {
            match res {
                Ok(d) => per_method[k].push(d),
                Err(e) => {
                    failures[k] += 1;
                    first_error.get_or_insert(e);
                }
            }
        }
    }
    let limit = (MAX_FAILURE_RATE * config.reps as f64).floor() as usize;
    if let Some(&worst) = failures.iter().max() {
        if worst > limit {
            return Err(Error::TooManyFailures {
                failed: worst,
                reps: config.reps,
                first: first_error.map(|e| e.to_string()).unwrap_or_default(),
            });
        }
    }
    if let Some(e) = &first_error {
        log::warn!("{} replicate failures; first: {e}", failures.iter().sum::<usize>());
    }
    let methods = config
        .methods
        .iter()
        .zip(per_method)
        .zip(failures)
        .map(|((&method, draws), failed)| summarize(method, draws, failed, n, truth, z))
        .collect();
    Ok(ScenarioSummary {
        schema_version: SCHEMA_VERSION,
        scenario: scenario.id,
        n,
        p: scenario.p(),
        pi: scenario.pi,
        interference: scenario.interference,
        rank: scenario.rank,
        reps: config.reps,
        seed: config.seed,
        level: config.level,
        truth,
        methods,
        first_error: first_error.map(|e| e.to_string()),
    })
}

fn coverage(draws: &[ReplicateDraw], pick: impl Fn(&ReplicateDraw) -> Option<f64>, n: usize, truth: f64, z: f64) -> Option<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for d in draws {
        let v = pick(d)?;
        total += 1;
        let half = z * (v.max(0.0) / n as f64).sqrt();
        if (d.tau_hat - truth).abs() <= half {
            hits += 1;
        }
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

fn summarize(method: Method, draws: Vec<ReplicateDraw>, failures: usize, n: usize, truth: f64, z: f64) -> MethodSummary {
    let taus: Vec<f64> = draws.iter().map(|d| d.tau_hat).collect();
    let nf = n as f64;
    let m = mean(&taus);
    let variance = if taus.len() > 1 { sample_variance(&taus) } else { 0.0 };
    let mse = taus.iter().map(|t| (t - truth).powi(2)).sum::<f64>() / taus.len().max(1) as f64;
    let v_hats: Option<Vec<f64>> = draws.iter().map(|d| d.v_hat).collect();
    let v_hats = v_hats.filter(|v| !v.is_empty());
    let kept: Option<Vec<f64>> = draws.iter().map(|d| d.kept_fraction).collect();
    MethodSummary {
        method,
        successes: draws.len(),
        failures,
        mean: m,
        variance,
        bias: m - truth,
        n_variance: nf * variance,
        n_mse: nf * mse,
        coverage: coverage(&draws, |d| d.v_hat, n, truth, z),
        coverage_no_network: coverage(&draws, |d| d.v_no_network, n, truth, z),
        coverage_conservative: coverage(&draws, |d| d.v_conservative, n, truth, z),
        mean_v_hat: v_hats.as_ref().map(|v| mean(v)),
        mean_se: v_hats
            .as_ref()
            .map(|v| v.iter().map(|x| (x.max(0.0) / nf).sqrt()).sum::<f64>() / v.len() as f64),
        mean_half_width: v_hats
            .as_ref()
            .map(|v| v.iter().map(|x| z * (x.max(0.0) / nf).sqrt()).sum::<f64>() / v.len() as f64),
        kept_fraction: kept.filter(|k| !k.is_empty()).map(|k| mean(&k)),
        draws,
    }
}
