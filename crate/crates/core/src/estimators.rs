//! Average-treatment-effect point estimators.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{Group, KernelConfig, KernelOrder, KernelSmoother, KernelSums, DEFAULT_TRIM_FACTOR};
use crate::linalg::least_squares;
use crate::stats::quantile;
use crate::trial::{Covariates, TrialData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dim,
    Linear,
    FixedAlpha,
    FunctionAdjusted,
    Nonparametric,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dim => "dim",
            Method::Linear => "linear",
            Method::FixedAlpha => "fixed_alpha",
            Method::FunctionAdjusted => "function_adjusted",
            Method::Nonparametric => "nonparametric",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dim" => Ok(Method::Dim),
            "linear" | "reg" => Ok(Method::Linear),
            "fixed_alpha" => Ok(Method::FixedAlpha),
            "function_adjusted" => Ok(Method::FunctionAdjusted),
            "np" | "nonparametric" => Ok(Method::Nonparametric),
            _ => Err(Error::UnknownKey {
                kind: "method",
                key: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Diagnostics {
    GroupSizes {
        treated: usize,
        control: usize,
    },
    Linear {
        beta1: Vec<f64>,
        beta0: Vec<f64>,
        rcond1: f64,
        rcond0: f64,
    },
    Fixed {
        alpha1: Vec<f64>,
        alpha0: Vec<f64>,
    },
    Nonparametric {
        kept: usize,
        trimmed: usize,
        /// Points that passed the density trims but had a zero or
        /// non-finite group window.
        reclassified: usize,
        q: usize,
        h_band: f64,
        b_trim: f64,
        trim_factor: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub tau_hat: f64,
    pub method: Method,
    /// Sample treated proportion.
    pub pi_hat: f64,
    /// Design treatment probability.
    pub pi: f64,
    pub diagnostics: Diagnostics,
}

fn group_sizes(data: &TrialData) -> Result<(usize, usize)> {
    let treated = data.treated_count();
    let control = data.n() - treated;
    if treated == 0 {
        return Err(Error::EmptyGroup { group: Group::Treated });
    }
    if control == 0 {
        return Err(Error::EmptyGroup { group: Group::Control });
    }
    Ok((treated, control))
}

fn group_mean(values: &[f64], w: &[bool], group: Group) -> f64 {
    let want = group == Group::Treated;
    let (sum, count) = values
        .iter()
        .zip(w)
        .filter(|(_, &wi)| wi == want)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
    sum / count as f64
}

fn result(data: &TrialData, tau_hat: f64, method: Method, diagnostics: Diagnostics) -> EstimateResult {
    EstimateResult {
        tau_hat,
        method,
        pi_hat: data.pi_hat(),
        pi: data.pi,
        diagnostics,
    }
}

/// `mean(Y | W = 1) - mean(Y | W = 0)`.
pub fn difference_in_means(data: &TrialData) -> Result<EstimateResult> {
    let (treated, control) = group_sizes(data)?;
    let tau = group_mean(&data.y, &data.w, Group::Treated) - group_mean(&data.y, &data.w, Group::Control);
    Ok(result(data, tau, Method::Dim, Diagnostics::GroupSizes { treated, control }))
}

/// Group-wise least-squares fits of `Y` on `x = (1, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub beta1: Vec<f64>,
    pub beta0: Vec<f64>,
    pub tau_hat: f64,
    /// `sum W (Y - x'beta1)^2 / sum W`.
    pub treated_mse: f64,
    /// `sum (1 - W)(Y - x'beta0)^2 / sum (1 - W)`.
    pub control_mse: f64,
    pub rcond1: f64,
    pub rcond0: f64,
}

impl LinearFit {
    /// Slope parts `beta^(-1)` (intercepts dropped).
    pub fn slopes(&self) -> (&[f64], &[f64]) {
        (&self.beta1[1..], &self.beta0[1..])
    }
}

fn fit_group(z: &Covariates, y: &[f64], w: &[bool], group: Group) -> Result<(Vec<f64>, f64, f64)> {
    let want = group == Group::Treated;
    let rows: Vec<usize> = (0..z.n()).filter(|&i| w[i] == want).collect();
    if rows.is_empty() {
        return Err(Error::EmptyGroup { group });
    }
    let p = z.p();
    let (beta, rcond) = if p == 0 {
        (vec![group_mean(y, w, group)], 1.0)
    } else {
        let x = DMatrix::from_fn(rows.len(), p + 1, |r, c| if c == 0 { 1.0 } else { z.row(rows[r])[c - 1] });
        let yg: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
        let fit = least_squares(&x, &yg)?;
        (fit.coef, fit.rcond)
    };
    let mse = rows
        .iter()
        .map(|&i| (y[i] - predict(&beta, z.row(i))).powi(2))
        .sum::<f64>()
        / rows.len() as f64;
    Ok((beta, mse, rcond))
}

fn predict(beta: &[f64], z: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(z).map(|(b, v)| b * v).sum::<f64>()
}

pub fn fit_linear(data: &TrialData) -> Result<LinearFit> {
    group_sizes(data)?;
    let (beta1, treated_mse, rcond1) = fit_group(&data.z, &data.y, &data.w, Group::Treated)?;
    let (beta0, control_mse, rcond0) = fit_group(&data.z, &data.y, &data.w, Group::Control)?;
    let diff: Vec<f64> = beta1.iter().zip(&beta0).map(|(a, b)| a - b).collect();
    // (1/n) 1' X (beta1 - beta0) = d_0 + zbar' d_(-1)
    let tau_hat = predict(&diff, &data.z.mean());
    Ok(LinearFit {
        beta1,
        beta0,
        tau_hat,
        treated_mse,
        control_mse,
        rcond1,
        rcond0,
    })
}

/// Regression-adjusted estimator with treatment-by-covariate interactions.
pub fn linear_adjusted(data: &TrialData) -> Result<EstimateResult> {
    let fit = fit_linear(data)?;
    Ok(linear_result(data, &fit))
}

pub(crate) fn linear_result(data: &TrialData, fit: &LinearFit) -> EstimateResult {
    result(
        data,
        fit.tau_hat,
        Method::Linear,
        Diagnostics::Linear {
            beta1: fit.beta1.clone(),
            beta0: fit.beta0.clone(),
            rcond1: fit.rcond1,
            rcond0: fit.rcond0,
        },
    )
}

/// Adjusted difference in means with fixed slopes on centered covariates.
pub fn fixed_adjusted(data: &TrialData, alpha1: &[f64], alpha0: &[f64]) -> Result<EstimateResult> {
    let p = data.z.p();
    if alpha1.len() != p || alpha0.len() != p {
        return Err(invalid(format!("adjustment vectors must have length {p}")));
    }
    group_sizes(data)?;
    let zbar = data.z.mean();
    let adjusted = |alpha: &[f64]| -> Vec<f64> {
        (0..data.n())
            .map(|i| {
                let shift: f64 = alpha.iter().zip(data.z.row(i)).zip(&zbar).map(|((a, z), m)| a * (z - m)).sum();
                data.y[i] - shift
            })
            .collect()
    };
    let tau = group_mean(&adjusted(alpha1), &data.w, Group::Treated)
        - group_mean(&adjusted(alpha0), &data.w, Group::Control);
    Ok(result(
        data,
        tau,
        Method::FixedAlpha,
        Diagnostics::Fixed {
            alpha1: alpha1.to_vec(),
            alpha0: alpha0.to_vec(),
        },
    ))
}

/// Adjusted difference in means with arbitrary working functions, each
/// recentered by its sample mean.
pub fn function_adjusted<G1, G0>(data: &TrialData, g1: G1, g0: G0) -> Result<EstimateResult>
where
    G1: Fn(&[f64]) -> f64,
    G0: Fn(&[f64]) -> f64,
{
    let (treated, control) = group_sizes(data)?;
    let eval = |g: &dyn Fn(&[f64]) -> f64| -> Result<Vec<f64>> {
        (0..data.n())
            .map(|i| {
                let v = g(data.z.row(i));
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::InvalidAdjustment { unit: i })
                }
            })
            .collect()
    };
    let v1 = eval(&g1)?;
    let v0 = eval(&g0)?;
    let gbar1 = v1.iter().sum::<f64>() / data.n() as f64;
    let gbar0 = v0.iter().sum::<f64>() / data.n() as f64;
    let a1: Vec<f64> = (0..data.n()).map(|i| data.y[i] - v1[i] + gbar1).collect();
    let a0: Vec<f64> = (0..data.n()).map(|i| data.y[i] - v0[i] + gbar0).collect();
    let tau = group_mean(&a1, &data.w, Group::Treated) - group_mean(&a0, &data.w, Group::Control);
    Ok(result(data, tau, Method::FunctionAdjusted, Diagnostics::GroupSizes { treated, control }))
}

/// `a_1 = 0.5p + 3q` and `a_2 = (3p + 18q) / (q - 0.5p)`.
pub fn rate_exponents(p: usize, q: usize) -> (f64, f64) {
    let (p, q) = (p as f64, q as f64);
    (0.5 * p + 3.0 * q, (3.0 * p + 18.0 * q) / (q - 0.5 * p))
}

/// Tuning inputs of the nonparametric estimator. Unset fields follow the
/// rule of thumb: `h = C_1 n^(-1/a_1)` with `C_1 = 1 + 0.5p`, and
/// `b = C_2 n^(-1/a_2)` with `C_2` the `alpha`-quantile of `p_hat(z_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NpTuning {
    pub alpha: f64,
    pub bandwidth_constant: Option<f64>,
    pub h_band: Option<f64>,
    pub b_trim: Option<f64>,
    pub trim_factor: f64,
}

impl Default for NpTuning {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            bandwidth_constant: None,
            h_band: None,
            b_trim: None,
            trim_factor: DEFAULT_TRIM_FACTOR,
        }
    }
}

impl NpTuning {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }
}

/// Rule-of-thumb bandwidth for `n` points in dimension `p`.
pub fn rule_of_thumb_bandwidth(n: usize, p: usize, constant: Option<f64>) -> Result<f64> {
    let q = KernelOrder::for_dimension(p)?.q();
    let (a1, _) = rate_exponents(p, q);
    let c1 = constant.unwrap_or(1.0 + 0.5 * p as f64);
    Ok(c1 * (n as f64).powf(-1.0 / a1))
}

/// Rule-of-thumb `(q, h, b)` for the covariates `z`.
pub fn rule_of_thumb(z: &Covariates, alpha: f64) -> Result<KernelConfig> {
    resolve_tuning(z, &NpTuning::with_alpha(alpha)).map(|(config, _)| config)
}

fn kernel_sums_at_samples(
    smoother: &KernelSmoother<'_>,
    z: &Covariates,
    y: &[f64],
    w: &[bool],
) -> Vec<KernelSums> {
    (0..z.n())
        .into_par_iter()
        .map(|i| smoother.sums(z.row(i), Some(y), Some(w)))
        .collect()
}

fn resolve_tuning(z: &Covariates, tuning: &NpTuning) -> Result<(KernelConfig, Option<Vec<f64>>)> {
    let p = z.p();
    let n = z.n();
    if n == 0 {
        return Err(invalid("no units"));
    }
    let order = KernelOrder::for_dimension(p)?;
    let h_band = match tuning.h_band {
        Some(h) => h,
        None => rule_of_thumb_bandwidth(n, p, tuning.bandwidth_constant)?,
    };
    let mut config = KernelConfig {
        order,
        dim: p,
        h_band,
        b_trim: 1.0,
        trim_factor: tuning.trim_factor,
        alpha: tuning.alpha,
    };
    config.validate()?;
    let mut densities = None;
    config.b_trim = match tuning.b_trim {
        Some(b) => b,
        None => {
            let smoother = KernelSmoother::new(z, config)?;
            let norm = smoother.normalizer();
            let dens: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| smoother.sums(z.row(i), None, None).mass / norm)
                .collect();
            let c2 = quantile(&dens, tuning.alpha)?;
            densities = Some(dens);
            let (_, a2) = rate_exponents(p, order.q());
            c2 * (n as f64).powf(-1.0 / a2)
        }
    };
    config.validate()?;
    Ok((config, densities))
}

/// Nonparametric estimate with tuning resolved from `tuning`.
pub fn nonparametric_tuned(data: &TrialData, tuning: &NpTuning) -> Result<EstimateResult> {
    group_sizes(data)?;
    let (config, _) = resolve_tuning(&data.z, tuning)?;
    nonparametric(data, &config)
}

/// Trimmed average of local-constant contrasts `m1_hat(z_i) - m0_hat(z_i)`.
pub fn nonparametric(data: &TrialData, config: &KernelConfig) -> Result<EstimateResult> {
    let (_, _) = group_sizes(data)?;
    let smoother = KernelSmoother::new(&data.z, *config)?;
    let sums = kernel_sums_at_samples(&smoother, &data.z, &data.y, &data.w);
    let n = data.n();
    let norm = smoother.normalizer();
    let pi_hat = data.pi_hat();
    let b = config.b_trim;
    let mut total = 0.0;
    let (mut kept, mut trimmed, mut reclassified) = (0usize, 0usize, 0usize);
    for s in &sums {
        let p_hat = s.mass / norm;
        let p1 = s.treated_mass / (norm * pi_hat);
        let p2 = s.control_mass / (norm * (1.0 - pi_hat));
        if !(p1 > b && p2 > b && p_hat > config.trim_factor * b) {
            trimmed += 1;
            continue;
        }
        let contrast = s.treated_y / s.treated_mass - s.control_y / s.control_mass;
        if s.treated_mass == 0.0 || s.control_mass == 0.0 || !contrast.is_finite() {
            reclassified += 1;
            trimmed += 1;
            continue;
        }
        kept += 1;
        total += contrast;
    }
    if kept == 0 {
        return Err(Error::AllTrimmed { n });
    }
    Ok(result(
        data,
        total / n as f64,
        Method::Nonparametric,
        Diagnostics::Nonparametric {
            kept,
            trimmed,
            reclassified,
            q: config.order.q(),
            h_band: config.h_band,
            b_trim: config.b_trim,
            trim_factor: config.trim_factor,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn data(y: &[f64], w: &[bool], z: Covariates) -> TrialData {
        TrialData::new(y.to_vec(), w.to_vec(), z, 0.5).unwrap()
    }

    fn random_data(n: usize, p: usize, seed: u64) -> TrialData {
        let mut rng = seeded(seed);
        let zs: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        let z = Covariates::new(n, p, zs).unwrap();
        let w: Vec<bool> = (0..n).map(|i| i % 3 != 0).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let s: f64 = z.row(i).iter().enumerate().map(|(k, v)| (k as f64 + 1.0) * v).sum();
                s + if w[i] { 1.0 + 0.5 * s } else { 0.0 } + rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        TrialData::new(y, w, z, 0.6).unwrap()
    }

    #[test]
    fn dim_hand_values() {
        let d = data(&[1.0, 2.0, 3.0, 4.0], &[true, true, false, false], Covariates::none(4));
        assert_eq!(difference_in_means(&d).unwrap().tau_hat, -2.0);
        let c = data(&[3.0; 4], &[true, false, true, false], Covariates::none(4));
        assert_eq!(difference_in_means(&c).unwrap().tau_hat, 0.0);
        let one = data(&[5.0], &[true], Covariates::none(1));
        assert!(matches!(difference_in_means(&one), Err(Error::EmptyGroup { group: Group::Control })));
    }

    #[test]
    fn intercept_only_linear_is_dim() {
        let d = random_data(50, 2, 1);
        let bare = d.with_covariates(Covariates::none(50)).unwrap();
        assert_eq!(linear_adjusted(&bare).unwrap().tau_hat, difference_in_means(&bare).unwrap().tau_hat);
    }

    #[test]
    fn noiseless_linear_recovery() {
        let z = Covariates::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0], vec![-1.0], vec![4.0]]).unwrap();
        let w = [true, true, true, false, false, false];
        let y: Vec<f64> = (0..6)
            .map(|i| {
                let v = z.row(i)[0];
                if w[i] { 2.0 + 3.0 * v } else { -1.0 + 0.5 * v }
            })
            .collect();
        let d = data(&y, &w, z);
        let zbar = 9.0 / 6.0;
        assert!((linear_adjusted(&d).unwrap().tau_hat - (3.0 + 2.5 * zbar)).abs() < 1e-12);
    }

    #[test]
    fn duplicated_covariate_is_singular() {
        let base = random_data(30, 1, 2);
        let dup = Covariates::from_rows(&(0..30).map(|i| vec![base.z.row(i)[0]; 2]).collect::<Vec<_>>()).unwrap();
        let d = base.with_covariates(dup).unwrap();
        assert!(matches!(linear_adjusted(&d), Err(Error::SingularDesign { .. })));
    }

    #[test]
    fn fixed_adjustment_identities() {
        let d = random_data(80, 3, 3);
        let zero = vec![0.0; 3];
        let a = fixed_adjusted(&d, &zero, &zero).unwrap().tau_hat;
        assert!((a - difference_in_means(&d).unwrap().tau_hat).abs() < 1e-12);
        let fit = fit_linear(&d).unwrap();
        let (s1, s0) = fit.slopes();
        let b = fixed_adjusted(&d, s1, s0).unwrap().tau_hat;
        assert!((b - fit.tau_hat).abs() < 1e-10);
        let shifted = d.z.affine(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], &[5.0, -2.0, 7.0]).unwrap();
        let c = fixed_adjusted(&d.with_covariates(shifted).unwrap(), &[0.3, 1.0, -2.0], &[1.0, 0.0, 0.5]).unwrap();
        let c0 = fixed_adjusted(&d, &[0.3, 1.0, -2.0], &[1.0, 0.0, 0.5]).unwrap();
        assert!((c.tau_hat - c0.tau_hat).abs() < 1e-12);
    }

    #[test]
    fn function_adjustment_identities() {
        let d = random_data(60, 2, 4);
        let constant = function_adjusted(&d, |_| 4.0, |_| -1.0).unwrap().tau_hat;
        assert!((constant - difference_in_means(&d).unwrap().tau_hat).abs() < 1e-12);
        let (a1, a0) = ([0.4, -1.2], [2.0, 0.1]);
        let g1 = |z: &[f64]| a1[0] * z[0] + a1[1] * z[1];
        let g0 = |z: &[f64]| a0[0] * z[0] + a0[1] * z[1];
        let f = function_adjusted(&d, g1, g0).unwrap().tau_hat;
        let x = fixed_adjusted(&d, &a1, &a0).unwrap().tau_hat;
        assert!((f - x).abs() < 1e-12);
        assert!(matches!(
            function_adjusted(&d, |z| if z[0] > 0.0 { f64::NAN } else { 0.0 }, |_| 0.0),
            Err(Error::InvalidAdjustment { .. })
        ));
    }

    #[test]
    fn rule_of_thumb_bandwidths() {
        // reference values are truncated to three decimals
        for (p, h) in [(1, 0.518), (2, 0.745), (3, 0.995), (4, 1.831), (5, 2.173), (8, 3.652), (10, 4.443)] {
            let got = rule_of_thumb_bandwidth(1000, p, None).unwrap();
            assert!((got - h).abs() < 1e-3, "p = {p}: {got}");
        }
        for p in 1..=10 {
            let q = KernelOrder::for_dimension(p).unwrap().q();
            let (_, a2) = rate_exponents(p, q);
            assert!(a2.is_finite() && a2 > 0.0);
        }
        assert!(matches!(rule_of_thumb_bandwidth(10, 11, None), Err(Error::UnsupportedDimension { p: 11 })));
    }

    #[test]
    fn huge_bandwidth_reduces_to_dim() {
        let d = random_data(40, 2, 5);
        let config = KernelConfig::new(2, 1e9, 1e-40).unwrap();
        let np = nonparametric(&d, &config).unwrap().tau_hat;
        assert!((np - difference_in_means(&d).unwrap().tau_hat).abs() < 1e-12);
    }

    #[test]
    fn large_threshold_trims_everything() {
        let d = random_data(40, 1, 6);
        let config = KernelConfig::new(1, 0.5, 1e6).unwrap();
        assert!(matches!(nonparametric(&d, &config), Err(Error::AllTrimmed { n: 40 })));
    }

    #[test]
    fn rule_of_thumb_threshold_is_scaled_quantile() {
        let d = random_data(200, 1, 7);
        let config = rule_of_thumb(&d.z, 0.05).unwrap();
        let dens: Vec<f64> = (0..200)
            .map(|i| crate::kernels::density_estimate(&d.z, d.z.row(i), &config).unwrap())
            .collect();
        let (_, a2) = rate_exponents(1, 2);
        let expected = quantile(&dens, 0.05).unwrap() * 200f64.powf(-1.0 / a2);
        assert!((config.b_trim - expected).abs() < 1e-14);
        assert!(nonparametric(&d, &config).is_ok());
    }

    fn kept(result: &EstimateResult) -> usize {
        match result.diagnostics {
            Diagnostics::Nonparametric { kept, .. } => kept,
            _ => unreachable!(),
        }
    }

    proptest! {
        #[test]
        fn lin_single_regression_equivalence(seed in 0u64..1000, p in 1usize..4) {
            let d = random_data(40, p, seed);
            let zbar = d.z.mean();
            let x = DMatrix::from_fn(d.n(), 2 + 2 * p, |i, c| {
                let w = f64::from(u8::from(d.w[i]));
                match c {
                    0 => 1.0,
                    1 => w,
                    c if c < 2 + p => d.z.row(i)[c - 2] - zbar[c - 2],
                    c => w * (d.z.row(i)[c - 2 - p] - zbar[c - 2 - p]),
                }
            });
            let single = least_squares(&x, &d.y).unwrap().coef[1];
            prop_assert!((single - linear_adjusted(&d).unwrap().tau_hat).abs() < 1e-9);
        }

        #[test]
        fn affine_covariate_invariance(seed in 0u64..1000, a in 0.5f64..3.0, b in -2.0f64..2.0, c in -5.0f64..5.0) {
            let d = random_data(40, 2, seed);
            let moved = d.z.affine(&[a, b, 0.3, -a], &[c, 1.0]).unwrap();
            let t0 = linear_adjusted(&d).unwrap().tau_hat;
            let t1 = linear_adjusted(&d.with_covariates(moved).unwrap()).unwrap().tau_hat;
            prop_assert!((t0 - t1).abs() < 1e-9);
        }

        #[test]
        fn trim_monotonicity(seed in 0u64..1000, b1 in 0.001f64..0.3, factor in 1.0f64..3.0) {
            let d = random_data(60, 1, seed);
            let lo = KernelConfig::new(1, 0.6, b1).unwrap();
            let hi = KernelConfig::new(1, 0.6, b1 * factor).unwrap();
            let k_lo = nonparametric(&d, &lo).map(|r| kept(&r)).unwrap_or(0);
            let k_hi = nonparametric(&d, &hi).map(|r| kept(&r)).unwrap_or(0);
            prop_assert!(k_hi <= k_lo);
        }
    }
}
