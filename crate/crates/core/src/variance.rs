//! Asymptotic-variance estimation and confidence intervals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::{fit_linear, LinearFit};
use crate::network::Network;
use crate::spectral::{leading_eigenpairs, SpectralDecomposition};
use crate::stats::normal_quantile;
use crate::trial::{treated_neighbor_counts, Covariates, TrialData};

/// Which treatment probability enters the variance formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiSource {
    /// The design probability `pi`.
    #[default]
    Design,
    /// The sample proportion of treated units.
    Sample,
}

impl PiSource {
    pub fn resolve(self, data: &TrialData) -> f64 {
        match self {
            PiSource::Design => data.pi,
            PiSource::Sample => data.pi_hat(),
        }
    }
}

/// `b_hat = (1/n) sum_i (sum_j E_ij / N_j)^2`.
pub fn estimate_b(network: &Network) -> Result<f64> {
    network.require_no_isolated()?;
    let n = network.n();
    let inv_degree: Vec<f64> = network.degrees().iter().map(|&d| 1.0 / d as f64).collect();
    let total: f64 = (0..n)
        .map(|i| network.neighbors(i).iter().map(|&j| inv_degree[j]).sum::<f64>().powi(2))
        .sum();
    Ok(total / n as f64)
}

/// Exposure-contrast weights `w = v + Psi a` with
/// `v_i = M_i / pi - (N_i - M_i) / (1 - pi)` and `a` chosen so that
/// `Psi' w = 0`.
pub fn pc_balancing_weights(
    network: &Network,
    spectral: &SpectralDecomposition,
    w: &[bool],
    pi: f64,
) -> Result<Vec<f64>> {
    let n = network.n();
    if w.len() != n {
        return Err(invalid("treatment vector length does not match the network"));
    }
    if !(pi > 0.0 && pi < 1.0) {
        return Err(invalid(format!("pi {pi} outside (0, 1)")));
    }
    if spectral.eigenvectors.iter().any(|v| v.len() != n) {
        return Err(invalid("eigenvectors do not match the network size"));
    }
    network.require_no_isolated()?;
    let m = treated_neighbor_counts(network, w);
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let (mi, ni) = (m[i] as f64, network.degree(i) as f64);
            mi / pi - (ni - mi) / (1.0 - pi)
        })
        .collect();
    let r = spectral.rank();
    if r == 0 {
        return Ok(out);
    }
    let psi = &spectral.eigenvectors;
    let gram = DMatrix::from_fn(r, r, |k, l| dot(&psi[k], &psi[l]));
    let rhs = DVector::from_fn(r, |k, _| -dot(&psi[k], &out));
    let a = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.lu().solve(&rhs))
        .ok_or_else(|| invalid("eigenvectors are linearly dependent"))?;
    for (k, v) in psi.iter().enumerate() {
        out.iter_mut().zip(v).for_each(|(o, x)| *o += a[k] * x);
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weighted estimates of `E f'(1, pi)` and `E f'(0, pi)`.
pub fn estimate_derivative_means(data: &TrialData, weights: &[f64], pi: f64) -> Result<(f64, f64)> {
    if weights.len() != data.n() {
        return Err(invalid("weight vector length does not match the data"));
    }
    let n = data.n() as f64;
    let (mut s1, mut s0) = (0.0, 0.0);
    for i in 0..data.n() {
        if data.w[i] {
            s1 += data.y[i] * weights[i];
        } else {
            s0 += data.y[i] * weights[i];
        }
    }
    Ok((s1 / (n * pi), s0 / (n * (1.0 - pi))))
}

/// Network inputs to the variance formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkTerm {
    pub b_hat: f64,
    pub deriv1: f64,
    pub deriv0: f64,
}

impl NetworkTerm {
    pub const NONE: NetworkTerm = NetworkTerm {
        b_hat: 0.0,
        deriv1: 0.0,
        deriv0: 0.0,
    };

    /// `b_hat pi (1 - pi) (deriv1 - deriv0)^2`.
    pub fn value(&self, pi: f64) -> f64 {
        self.b_hat * pi * (1.0 - pi) * (self.deriv1 - self.deriv0).powi(2)
    }
}

/// Spectral estimate of the network inputs from precomputed `b_hat` and
/// eigenpairs (both depend only on the network).
pub fn network_term(
    data: &TrialData,
    network: &Network,
    spectral: &SpectralDecomposition,
    b_hat: f64,
    pi: f64,
) -> Result<NetworkTerm> {
    let weights = pc_balancing_weights(network, spectral, &data.w, pi)?;
    let (deriv1, deriv0) = estimate_derivative_means(data, &weights, pi)?;
    Ok(NetworkTerm {
        b_hat,
        deriv1,
        deriv0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub v_hat: f64,
    /// Treated residual term, control residual term, slope-difference
    /// quadratic form and network term.
    pub components: [f64; 4],
    pub b_hat: f64,
    pub deriv1: f64,
    pub deriv0: f64,
}

/// Assembles the four-term variance estimate for the regression-adjusted
/// estimator.
pub fn variance_reg(data: &TrialData, fit: &LinearFit, term: &NetworkTerm, pi: f64) -> VarianceReport {
    let c1 = fit.treated_mse / pi;
    let c2 = fit.control_mse / (1.0 - pi);
    let (s1, s0) = fit.slopes();
    let d: Vec<f64> = s1.iter().zip(s0).map(|(a, b)| a - b).collect();
    let p = d.len();
    let cov = data.z.covariance();
    let mut c3 = 0.0;
    for a in 0..p {
        for b in 0..p {
            c3 += d[a] * cov[a * p + b] * d[b];
        }
    }
    let c4 = term.value(pi);
    VarianceReport {
        v_hat: c1 + c2 + c3 + c4,
        components: [c1, c2, c3.max(0.0), c4],
        b_hat: term.b_hat,
        deriv1: term.deriv1,
        deriv0: term.deriv0,
    }
}

/// Full spectral pipeline: `b_hat`, `r` eigenpairs, balancing weights and
/// the assembled estimate for the regression-adjusted estimator.
pub fn spectral_variance(data: &TrialData, rank: usize, pi_source: PiSource) -> Result<VarianceReport> {
    let network = data
        .network
        .as_ref()
        .ok_or_else(|| invalid("variance estimation under interference needs the network"))?;
    let pi = pi_source.resolve(data);
    let b_hat = estimate_b(network)?;
    let spectral = leading_eigenpairs(network, rank)?;
    let term = network_term(data, network, &spectral, b_hat, pi)?;
    let fit = fit_linear(data)?;
    Ok(variance_reg(data, &fit, &term, pi))
}

/// Symmetric normal interval `tau_hat -/+ z sqrt(v_hat / n)`.
pub fn confidence_interval(tau_hat: f64, v_hat: f64, n: usize, level: f64) -> Result<(f64, f64)> {
    if !(v_hat >= 0.0) {
        return Err(Error::InvalidVariance(v_hat));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("confidence level {level} outside (0, 1)")));
    }
    if n == 0 {
        return Err(invalid("confidence interval needs n >= 1"));
    }
    let half = normal_quantile(0.5 + 0.5 * level) * (v_hat / n as f64).sqrt();
    Ok((tau_hat - half, tau_hat + half))
}

/// `8 tau_hat^2`, a bound on `b (E f'(1, pi) - E f'(0, pi))^2` used by the
/// conservative interval.
pub fn conservative_network_term(tau_hat: f64) -> f64 {
    8.0 * tau_hat * tau_hat
}

/// Variance with the network term replaced by `pi (1 - pi) 8 tau_hat^2`.
pub fn conservative_variance(report: &VarianceReport, tau_hat: f64, pi: f64) -> f64 {
    let [c1, c2, c3, _] = report.components;
    c1 + c2 + c3 + pi * (1.0 - pi) * conservative_network_term(tau_hat)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolyBasis {
    /// `z_j^k` per coordinate.
    #[default]
    Monomial,
    /// Legendre `P_k` of each coordinate rescaled to `[-1, 1]`.
    Legendre,
}

/// Per-coordinate polynomial expansion of degree `degree` (no cross terms).
pub fn polynomial_features(z: &Covariates, degree: usize, basis: PolyBasis) -> Result<Covariates> {
    let (n, p) = (z.n(), z.p());
    let ranges: Vec<(f64, f64)> = (0..p)
        .map(|j| {
            let col = z.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    let mut data = Vec::with_capacity(n * p * degree);
    for i in 0..n {
        let row = z.row(i);
        for (j, &x) in row.iter().enumerate() {
            match basis {
                PolyBasis::Monomial => {
                    let mut power = 1.0;
                    for _ in 0..degree {
                        power *= x;
                        data.push(power);
                    }
                }
                PolyBasis::Legendre => {
                    let (lo, hi) = ranges[j];
                    let t = if hi > lo { 2.0 * (x - lo) / (hi - lo) - 1.0 } else { 0.0 };
                    let (mut prev, mut cur) = (1.0, t);
                    for k in 1..=degree {
                        data.push(cur);
                        let next = ((2 * k + 1) as f64 * t * cur - k as f64 * prev) / (k + 1) as f64;
                        prev = cur;
                        cur = next;
                    }
                }
            }
        }
    }
    Covariates::new(n, p * degree, data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolySeqReport {
    pub v_hat: f64,
    /// Degree whose estimate was returned.
    pub degree: usize,
    /// Estimates for degrees `0, 1, ...` in the order computed.
    pub values: Vec<f64>,
}

/// Variance of the nonparametric estimator by regression adjustment on
/// polynomial expansions of increasing degree. Stops when the relative
/// change from degree `d - 1` to `d` is below `rel_tol` (returning the
/// degree `d - 1` value), when the estimate increases (richer bases cannot
/// raise the population variance, so a rise signals overfitting; the
/// degree `d - 1` value is returned), when the expanded design is
/// ill-conditioned (returning the last good value) or at `max_degree`.
pub fn variance_np_polyseq(
    data: &TrialData,
    term: &NetworkTerm,
    pi: f64,
    max_degree: usize,
    rel_tol: f64,
    basis: PolyBasis,
) -> Result<PolySeqReport> {
    if max_degree < 1 {
        return Err(invalid("max_degree must be at least 1"));
    }
    if !(rel_tol >= 0.0) {
        return Err(invalid(format!("rel_tol {rel_tol} must be nonnegative")));
    }
    let base = data.with_covariates(Covariates::none(data.n()))?;
    let v0 = variance_reg(&base, &fit_linear(&base)?, term, pi).v_hat;
    let mut values = vec![v0];
    for degree in 1..=max_degree {
        let expanded = data.with_covariates(polynomial_features(&data.z, degree, basis)?)?;
        let fit = match fit_linear(&expanded) {
            Ok(fit) => fit,
            Err(Error::SingularDesign { .. }) => break,
            Err(e) => return Err(e),
        };
        let v = variance_reg(&expanded, &fit, term, pi).v_hat;
        let prev = *values.last().expect("degree 0 computed");
        values.push(v);
        if !(v <= prev) || (v - prev).abs() < rel_tol * prev.abs() {
            return Ok(PolySeqReport {
                v_hat: prev,
                degree: degree - 1,
                values,
            });
        }
    }
    let degree = values.len() - 1;
    Ok(PolySeqReport {
        v_hat: values[degree],
        degree,
        values,
    })
}
