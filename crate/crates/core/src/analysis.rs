//! One-shot analysis of an observed experiment: point estimate, variance
//! estimate and confidence interval.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::{
    difference_in_means, fit_linear, linear_result, nonparametric_tuned, Diagnostics, Method, NpTuning,
};
use crate::network::Network;
use crate::spectral::leading_eigenpairs;
use crate::trial::{Covariates, EdgeList, TrialData};
use crate::variance::{
    confidence_interval, conservative_network_term, estimate_b, network_term, variance_np_polyseq, variance_reg,
    NetworkTerm, PiSource, PolyBasis,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// Regression-variance formula with the spectral network term.
    Spectral,
    /// Network term replaced by the `8 tau_hat^2` bound.
    Conservative,
    /// Polynomial-sequence variance (nonparametric estimator).
    Polyseq,
}

impl VarianceMode {
    /// Polyseq for the nonparametric estimator, spectral otherwise.
    pub fn default_for(method: Method) -> Self {
        if method == Method::Nonparametric {
            VarianceMode::Polyseq
        } else {
            VarianceMode::Spectral
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VarianceMode::Spectral => "spectral",
            VarianceMode::Conservative => "conservative",
            VarianceMode::Polyseq => "polyseq",
        }
    }
}

impl fmt::Display for VarianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(VarianceMode::Spectral),
            "conservative" => Ok(VarianceMode::Conservative),
            "polyseq" => Ok(VarianceMode::Polyseq),
            _ => Err(Error::UnknownKey {
                kind: "variance mode",
                key: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub method: Method,
    /// Defaults to [`VarianceMode::default_for`] the method.
    pub variance: Option<VarianceMode>,
    /// Eigenpairs for the spectral network term; required with a network.
    pub rank: Option<usize>,
    pub np_tuning: NpTuning,
    pub max_degree: usize,
    pub rel_tol: f64,
    pub basis: PolyBasis,
    pub level: f64,
    pub pi_source: PiSource,
}

impl AnalysisOptions {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            variance: None,
            rank: None,
            np_tuning: NpTuning::default(),
            max_degree: 5,
            rel_tol: 0.05,
            basis: PolyBasis::Monomial,
            level: 0.95,
            pi_source: PiSource::Design,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    /// Treated residual term, control residual term and slope-difference
    /// term of the regression formula; absent for polyseq.
    pub regression: Option<[f64; 3]>,
    /// Network contribution actually added.
    pub network: f64,
    pub b_hat: f64,
    pub deriv1: f64,
    pub deriv0: f64,
    /// Polyseq degree and per-degree values.
    pub polyseq_degree: Option<usize>,
    pub polyseq_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tau_hat: f64,
    pub variance_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: Method,
    pub variance_mode: VarianceMode,
    pub n: usize,
    pub pi: f64,
    pub level: f64,
    pub diagnostics: Diagnostics,
    pub components: VarianceComponents,
}

/// Builds the network on the dataset's units `0..n` from an edge list whose
/// vertex ids are row indices of the dataset.
pub fn network_for_units(edges: &EdgeList, n: usize) -> Result<Network> {
    let mut pairs = Vec::with_capacity(edges.network.edge_count());
    for (a, b) in edges.network.edges() {
        let (i, j) = (edges.labels[a], edges.labels[b]);
        if i >= n as u64 || j >= n as u64 {
            return Err(invalid(format!("edge ({i}, {j}) refers to a unit beyond the {n} dataset rows")));
        }
        pairs.push((i as usize, j as usize));
    }
    Network::from_edges(n, pairs)
}

/// Removes units without neighbors from the data and its network. Returns
/// the original row index of every kept unit.
pub fn drop_isolated_units(data: &TrialData) -> Result<(TrialData, Vec<usize>)> {
    let network = data
        .network
        .as_ref()
        .ok_or_else(|| invalid("dataset has no network"))?;
    let (sub, kept) = network.drop_isolated();
    let y = kept.iter().map(|&i| data.y[i]).collect();
    let w = kept.iter().map(|&i| data.w[i]).collect();
    let out = TrialData::new(y, w, data.z.select(&kept), data.pi)?.with_network(sub)?;
    Ok((out, kept))
}

/// Estimate, variance and interval for `data`. Without a network the
/// network term is zero (no interference).
pub fn analyze(data: &TrialData, options: &AnalysisOptions) -> Result<AnalysisReport> {
    let method = options.method;
    let mode = options.variance.unwrap_or(VarianceMode::default_for(method));
    if mode == VarianceMode::Polyseq && method != Method::Nonparametric {
        return Err(invalid("polyseq variance applies to the nonparametric estimator"));
    }
    let pi = options.pi_source.resolve(data);
    let term = match (&data.network, mode) {
        (Some(g), VarianceMode::Spectral | VarianceMode::Polyseq) => {
            let rank = options
                .rank
                .ok_or_else(|| invalid("a rank is required for the spectral network term"))?;
            let spectral = leading_eigenpairs(g, rank)?;
            network_term(data, g, &spectral, estimate_b(g)?, pi)?
        }
        _ => NetworkTerm::NONE,
    };
    let (estimate, mut variance, mut components) = match method {
        Method::Dim => {
            let est = difference_in_means(data)?;
            let base = data.with_covariates(Covariates::none(data.n()))?;
            let rep = variance_reg(&base, &fit_linear(&base)?, &term, pi);
            (est, rep.v_hat, regression_components(&rep.components, &term))
        }
        Method::Linear => {
            let fit = fit_linear(data)?;
            let rep = variance_reg(data, &fit, &term, pi);
            (linear_result(data, &fit), rep.v_hat, regression_components(&rep.components, &term))
        }
        Method::Nonparametric => {
            let est = nonparametric_tuned(data, &options.np_tuning)?;
            if mode == VarianceMode::Spectral {
                let fit = fit_linear(data)?;
                let rep = variance_reg(data, &fit, &term, pi);
                (est, rep.v_hat, regression_components(&rep.components, &term))
            } else {
                let rep = variance_np_polyseq(data, &term, pi, options.max_degree, options.rel_tol, options.basis)?;
                let comps = VarianceComponents {
                    regression: None,
                    network: term.value(pi),
                    b_hat: term.b_hat,
                    deriv1: term.deriv1,
                    deriv0: term.deriv0,
                    polyseq_degree: Some(rep.degree),
                    polyseq_values: Some(rep.values),
                };
                (est, rep.v_hat, comps)
            }
        }
        other => return Err(invalid(format!("method {other} needs caller-supplied adjustments"))),
    };
    if mode == VarianceMode::Conservative {
        let bound = pi * (1.0 - pi) * conservative_network_term(estimate.tau_hat);
        variance += bound;
        components.network = bound;
    }
    let (ci_low, ci_high) = confidence_interval(estimate.tau_hat, variance, data.n(), options.level)?;
    Ok(AnalysisReport {
        tau_hat: estimate.tau_hat,
        variance_hat: variance,
        ci_low,
        ci_high,
        method,
        variance_mode: mode,
        n: data.n(),
        pi,
        level: options.level,
        diagnostics: estimate.diagnostics,
        components,
    })
}

fn regression_components(c: &[f64; 4], term: &NetworkTerm) -> VarianceComponents {
    VarianceComponents {
        regression: Some([c[0], c[1], c[2]]),
        network: c[3],
        b_hat: term.b_hat,
        deriv1: term.deriv1,
        deriv0: term.deriv0,
        polyseq_degree: None,
        polyseq_values: None,
    }
}
