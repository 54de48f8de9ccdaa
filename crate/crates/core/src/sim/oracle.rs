//! Monte Carlo evaluation of the asymptotic-variance formulas.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::graphon::graphon_b;
use crate::linalg::least_squares;
use crate::outcome::UnitDraws;
use crate::quadrature::DEFAULT_TOL;
use crate::rng::{Component, StreamKey};
use crate::stats::{mean, mean_and_se, McEstimate};
use crate::trial::Covariates;
use crate::variance::estimate_b;

use super::scenario::{NetworkSource, Scenario};

/// Working function `g(z)` of a function-adjusted estimator.
pub type CovariateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Independent batches the Monte Carlo draws are split into; the reported
/// standard error is the spread of the batch values.
pub const ORACLE_BATCHES: usize = 20;

#[derive(Clone)]
pub enum Formula {
    /// Regression-adjusted estimator.
    Vreg,
    /// Difference in means.
    Vdim,
    /// Nonparametric estimator (adjustment by the true conditional means).
    Vnp,
    /// Fixed-slope estimator with slopes `alpha1`, `alpha0`.
    Valpha { alpha1: Vec<f64>, alpha0: Vec<f64> },
    /// Function-adjusted estimator with working functions `g1`, `g0`.
    Vg { g1: CovariateFn, g0: CovariateFn },
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Vreg => f.write_str("Vreg"),
            Formula::Vdim => f.write_str("Vdim"),
            Formula::Vnp => f.write_str("Vnp"),
            Formula::Valpha { alpha1, alpha0 } => f
                .debug_struct("Valpha")
                .field("alpha1", alpha1)
                .field("alpha0", alpha0)
                .finish(),
            Formula::Vg { .. } => f.write_str("Vg { .. }"),
        }
    }
}

/// The limit `b` of `b_hat` for the scenario's network, or 0 without
/// interference.
pub fn network_b(scenario: &Scenario) -> Result<f64> {
    if !scenario.interference {
        return Ok(0.0);
    }
    match &scenario.network {
        NetworkSource::Graphon(spec) => graphon_b(spec, DEFAULT_TOL),
        NetworkSource::Fixed(g) => estimate_b(g),
    }
}

/// Evaluates `formula` for `scenario` by Monte Carlo over the covariate and
/// noise laws with `mc_reps` draws split into [`ORACLE_BATCHES`] batches.
/// Population regression coefficients are fitted within each batch and `b`
/// comes from [`network_b`].
pub fn theoretical_variance_oracle(
    scenario: &Scenario,
    formula: &Formula,
    mc_reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    scenario.validate()?;
    if mc_reps < ORACLE_BATCHES * 100 {
        return Err(invalid(format!(
            "variance oracle needs at least {} draws, got {mc_reps}",
            ORACLE_BATCHES * 100
        )));
    }
    let p = scenario.p();
    if let Formula::Valpha { alpha1, alpha0 } = formula {
        if alpha1.len() != p || alpha0.len() != p {
            return Err(invalid(format!("slope vectors must have length {p}")));
        }
    }
    let b = network_b(scenario)?;
    let key = StreamKey::new(seed);
    let per_batch = mc_reps / ORACLE_BATCHES;
    let values: Vec<f64> = (0..ORACLE_BATCHES)
        .into_par_iter()
        .map(|k| {
            let mut rng = key.stream(Component::Oracle, k as u64);
            let units = scenario.outcome.draw_units(per_batch, &mut rng)?;
            batch_value(scenario, formula, &units, b)
        })
        .collect::<Result<_>>()?;
    Ok(mean_and_se(&values))
}

struct Potential {
    f1: Vec<f64>,
    f0: Vec<f64>,
    network: f64,
}

fn potential_outcomes(scenario: &Scenario, units: &UnitDraws, b: f64) -> Potential {
    let pi = scenario.pi;
    let model = &scenario.outcome;
    let m = units.noise.len();
    let (mut f1, mut f0) = (Vec::with_capacity(m), Vec::with_capacity(m));
    let (mut s1, mut s0) = (0.0, 0.0);
    for i in 0..m {
        let (z, e) = (units.z.row(i), units.noise[i]);
        f1.push(model.response(true, pi, z, e));
        f0.push(model.response(false, pi, z, e));
        if b != 0.0 {
            s1 += model.exposure_slope(true, pi, z, e);
            s0 += model.exposure_slope(false, pi, z, e);
        }
    }
    let mf = m as f64;
    Potential {
        f1,
        f0,
        network: b * pi * (1.0 - pi) * ((s1 - s0) / mf).powi(2),
    }
}

fn batch_value(scenario: &Scenario, formula: &Formula, units: &UnitDraws, b: f64) -> Result<f64> {
    let pot = potential_outcomes(scenario, units, b);
    match formula {
        Formula::Vreg => regression_value(scenario.pi, &pot, &units.z),
        Formula::Vdim => regression_value(scenario.pi, &pot, &Covariates::none(units.z.n())),
        Formula::Vnp => Ok(np_value(scenario, &pot, units)?.0),
        Formula::Valpha { alpha1, alpha0 } => {
            let (a1, a0) = (alpha1.clone(), alpha0.clone());
            let g1 = move |z: &[f64]| a1.iter().zip(z).map(|(a, v)| a * v).sum::<f64>();
            let g0 = move |z: &[f64]| a0.iter().zip(z).map(|(a, v)| a * v).sum::<f64>();
            g_value(scenario, &pot, units, &g1, &g0)
        }
        Formula::Vg { g1, g0 } => g_value(scenario, &pot, units, g1.as_ref(), g0.as_ref()),
    }
}

/// `(1/pi) E(f1 - x'b1)^2 + (1/(1-pi)) E(f0 - x'b0)^2 + d' cov(z) d + net`.
fn regression_value(pi: f64, pot: &Potential, z: &Covariates) -> Result<f64> {
    let (m, p) = (z.n(), z.p());
    let x = DMatrix::from_fn(m, p + 1, |r, c| if c == 0 { 1.0 } else { z.row(r)[c - 1] });
    let fit1 = least_squares(&x, &pot.f1)?;
    let fit0 = least_squares(&x, &pot.f0)?;
    let resid_ms = |f: &[f64], beta: &[f64]| {
        (0..m)
            .map(|i| {
                let pred = beta[0] + beta[1..].iter().zip(z.row(i)).map(|(b, v)| b * v).sum::<f64>();
                (f[i] - pred).powi(2)
            })
            .sum::<f64>()
            / m as f64
    };
    let d: Vec<f64> = fit1.coef[1..].iter().zip(&fit0.coef[1..]).map(|(a, b)| a - b).collect();
    let cov = z.covariance();
    let mut quad = 0.0;
    for a in 0..p {
        for c in 0..p {
            quad += d[a] * cov[a * p + c] * d[c];
        }
    }
    Ok(resid_ms(&pot.f1, &fit1.coef) / pi + resid_ms(&pot.f0, &fit0.coef) / (1.0 - pi) + quad + pot.network)
}

/// Returns `V_np` and the conditional means `(m1, m0)`.
fn np_value(scenario: &Scenario, pot: &Potential, units: &UnitDraws) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let pi = scenario.pi;
    let model = &scenario.outcome;
    let m = pot.f1.len();
    let mut m1 = Vec::with_capacity(m);
    let mut m0 = Vec::with_capacity(m);
    for i in 0..m {
        m1.push(model.conditional_mean(true, pi, units.z.row(i))?);
        m0.push(model.conditional_mean(false, pi, units.z.row(i))?);
    }
    let diff: Vec<f64> = pot.f1.iter().zip(&pot.f0).map(|(a, b)| a - b).collect();
    let dm = mean(&diff);
    let var_diff = diff.iter().map(|d| (d - dm).powi(2)).sum::<f64>() / m as f64;
    let resid = (0..m)
        .map(|i| ((1.0 - pi) * (pot.f1[i] - m1[i]) + pi * (pot.f0[i] - m0[i])).powi(2))
        .sum::<f64>()
        / m as f64;
    Ok((var_diff + resid / (pi * (1.0 - pi)) + pot.network, m1, m0))
}

/// `V_np + (1/(pi(1-pi))) E{(1-pi)(g1 - m1)_c + pi (g0 - m0)_c}^2` with
/// `_c` denoting centering.
fn g_value(
    scenario: &Scenario,
    pot: &Potential,
    units: &UnitDraws,
    g1: &dyn Fn(&[f64]) -> f64,
    g0: &dyn Fn(&[f64]) -> f64,
) -> Result<f64> {
    let pi = scenario.pi;
    let (v_np, m1, m0) = np_value(scenario, pot, units)?;
    let m = m1.len();
    let d1: Vec<f64> = (0..m).map(|i| g1(units.z.row(i)) - m1[i]).collect();
    let d0: Vec<f64> = (0..m).map(|i| g0(units.z.row(i)) - m0[i]).collect();
    let (c1, c0) = (mean(&d1), mean(&d0));
    let extra = (0..m)
        .map(|i| ((1.0 - pi) * (d1[i] - c1) + pi * (d0[i] - c0)).powi(2))
        .sum::<f64>()
        / m as f64;
    Ok(v_np + extra / (pi * (1.0 - pi)))
}

/// Population slopes `(beta1^(-1), beta0^(-1))` by least squares on
/// `mc_reps` draws.
pub fn population_slopes(scenario: &Scenario, mc_reps: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = StreamKey::new(seed).stream(Component::Oracle, u64::MAX);
    let units = scenario.outcome.draw_units(mc_reps, &mut rng)?;
    let pot = potential_outcomes(scenario, &units, 0.0);
    let z = &units.z;
    let x = DMatrix::from_fn(z.n(), z.p() + 1, |r, c| if c == 0 { 1.0 } else { z.row(r)[c - 1] });
    let b1 = least_squares(&x, &pot.f1)?.coef;
    let b0 = least_squares(&x, &pot.f0)?.coef;
    Ok((b1[1..].to_vec(), b0[1..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vnp_without_interference_matches_closed_form() {
        // 1 + 1/4 + (1 - pi) / (4 pi) = 1 + 1 / (4 pi)
        let s = Scenario::sec41_main(1, false).unwrap();
        let v = theoretical_variance_oracle(&s, &Formula::Vnp, 200_000, 1).unwrap();
        assert!((v.value - (1.0 + 0.25 / 0.7)).abs() < 4.0 * v.std_error + 1e-3, "{v:?}");
    }

    #[test]
    fn dim_dominates_reg() {
        for s in [Scenario::sec31_validation(0.5).unwrap(), Scenario::sec41_main(3, true).unwrap()] {
            let reg = theoretical_variance_oracle(&s, &Formula::Vreg, 40_000, 2).unwrap();
            let dim = theoretical_variance_oracle(&s, &Formula::Vdim, 40_000, 2).unwrap();
            assert!(dim.value >= reg.value, "{dim:?} {reg:?}");
        }
    }

    #[test]
    fn too_few_draws_rejected() {
        let s = Scenario::sec41_main(1, false).unwrap();
        assert!(theoretical_variance_oracle(&s, &Formula::Vnp, 100, 1).is_err());
        let bad = Formula::Valpha {
            alpha1: vec![1.0, 2.0],
            alpha0: vec![0.0],
        };
        assert!(theoretical_variance_oracle(&s, &bad, 10_000, 1).is_err());
    }

    #[test]
    fn vg_at_conditional_means_is_vnp() {
        // for the smooth additive model, m1 - m0 is linear and m0 is the exp sum
        let s = Scenario::sec41_main(2, false).unwrap();
        let model = s.outcome;
        let pi = s.pi;
        let g1: CovariateFn = Arc::new(move |z: &[f64]| model.response(true, pi, z, 0.0));
        let g0: CovariateFn = Arc::new(move |z: &[f64]| model.response(false, pi, z, 0.0));
        let vg = theoretical_variance_oracle(&s, &Formula::Vg { g1, g0 }, 20_000, 4).unwrap();
        let vnp = theoretical_variance_oracle(&s, &Formula::Vnp, 20_000, 4).unwrap();
        assert!((vg.value - vnp.value).abs() < 1e-12);
    }
}
