//! Registered outcome models `f_i(w, e; z, noise)` and their covariate and
//! noise laws.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::integrate;
use crate::stats::{mean_and_se, McEstimate};
use crate::trial::Covariates;

/// An outcome model. Each model owns the law of its covariates `z` and of a
/// per-unit scalar `noise` that the response depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OutcomeModel {
    /// `W(-2(1-e)^2 - 2 z e^2 + xi/2) + z^2`, `z ~ U(-2, 1)`, `xi ~ N(0, 1)`.
    ExposureQuadratic,
    /// `W(e - 1/2 + sum_j z_j / s_p + xi/2) + sum_j exp(z_j) / (2 sqrt p)`
    /// with `s_p^2 = 3p - 4 + 2^(2-p)`, `z ~ N(0, Sigma)`,
    /// `Sigma_jk = 0.5^|j-k|`, `xi ~ N(0, 1)`.
    SmoothAdditive { p: usize },
    /// `2 / (1 + exp(-z*)) (1 - 0.4 W) (1 - sqrt(e))` with `z* ~ N(0, 2)`;
    /// the observed covariate is `z = z* v`, `v ~ U(0.9, 1.1)`. The noise
    /// slot carries `z*`.
    Vaccine,
    /// `f = c` with no covariates.
    Constant { c: f64 },
}

/// Covariates and per-unit noise for `n` units.
#[derive(Debug, Clone)]
pub struct UnitDraws {
    pub z: Covariates,
    pub noise: Vec<f64>,
}

impl OutcomeModel {
    /// Resolves `exposure-quadratic`, `smooth-additive:<p>`, `vaccine` or
    /// `constant:<c>`.
    pub fn from_key(key: &str) -> Result<Self> {
        let unknown = || Error::UnknownKey {
            kind: "outcome model",
            key: key.to_string(),
        };
        match key {
            "exposure-quadratic" => Ok(OutcomeModel::ExposureQuadratic),
            "vaccine" => Ok(OutcomeModel::Vaccine),
            _ => {
                if let Some(p) = key.strip_prefix("smooth-additive:") {
                    let p: usize = p.parse().map_err(|_| unknown())?;
                    Self::smooth_additive(p)
                } else if let Some(c) = key.strip_prefix("constant:") {
                    let c: f64 = c.parse().map_err(|_| unknown())?;
                    Ok(OutcomeModel::Constant { c })
                } else {
                    Err(unknown())
                }
            }
        }
    }

    pub fn smooth_additive(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(invalid("smooth-additive model needs p >= 1"));
        }
        Ok(OutcomeModel::SmoothAdditive { p })
    }

    pub fn covariate_dim(&self) -> usize {
        match self {
            OutcomeModel::ExposureQuadratic | OutcomeModel::Vaccine => 1,
            OutcomeModel::SmoothAdditive { p } => *p,
            OutcomeModel::Constant { .. } => 0,
        }
    }

    pub fn draw_units<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<UnitDraws> {
        let p = self.covariate_dim();
        let mut z = Vec::with_capacity(n * p);
        let mut noise = Vec::with_capacity(n);
        match self {
            OutcomeModel::ExposureQuadratic => {
                let law = Uniform::new(-2.0, 1.0).expect("valid bounds");
                for _ in 0..n {
                    z.push(law.sample(rng));
                    noise.push(rng.sample(StandardNormal));
                }
            }
            OutcomeModel::SmoothAdditive { p } => {
                let rho = 0.5f64;
                let innovation = (1.0 - rho * rho).sqrt();
                for _ in 0..n {
                    let mut prev: f64 = rng.sample(StandardNormal);
                    z.push(prev);
                    for _ in 1..*p {
                        let e: f64 = rng.sample(StandardNormal);
                        prev = rho * prev + innovation * e;
                        z.push(prev);
                    }
                    noise.push(rng.sample(StandardNormal));
                }
            }
            OutcomeModel::Vaccine => {
                let latent = Normal::new(0.0, 2f64.sqrt()).expect("valid sd");
                let perturb = Uniform::new(0.9, 1.1).expect("valid bounds");
                for _ in 0..n {
                    let z_star = latent.sample(rng);
                    z.push(z_star * perturb.sample(rng));
                    noise.push(z_star);
                }
            }
            OutcomeModel::Constant { .. } => noise.resize(n, 0.0),
        }
        Ok(UnitDraws {
            z: Covariates::new(n, p, z)?,
            noise,
        })
    }

    /// `f(w, e; z, noise)`.
    pub fn response(&self, w: bool, e: f64, z: &[f64], noise: f64) -> f64 {
        let w = f64::from(u8::from(w));
        match self {
            OutcomeModel::ExposureQuadratic => {
                let z = z[0];
                w * (-2.0 * (1.0 - e).powi(2) - 2.0 * z * e * e + 0.5 * noise) + z * z
            }
            OutcomeModel::SmoothAdditive { p } => {
                let pf = *p as f64;
                let s = (3.0 * pf - 4.0 + 2f64.powf(2.0 - pf)).sqrt();
                let sum: f64 = z.iter().sum();
                let base: f64 = z.iter().map(|v| v.exp()).sum::<f64>() / (2.0 * pf.sqrt());
                w * (e - 0.5 + sum / s + 0.5 * noise) + base
            }
            OutcomeModel::Vaccine => logistic2(noise) * (1.0 - 0.4 * w) * (1.0 - e.sqrt()),
            OutcomeModel::Constant { c } => *c,
        }
    }

    /// `d f / d e` at `(w, e)`.
    pub fn exposure_slope(&self, w: bool, e: f64, z: &[f64], noise: f64) -> f64 {
        let w = f64::from(u8::from(w));
        match self {
            OutcomeModel::ExposureQuadratic => w * (4.0 * (1.0 - e) - 4.0 * z[0] * e),
            OutcomeModel::SmoothAdditive { .. } => w,
            OutcomeModel::Vaccine => -logistic2(noise) * (1.0 - 0.4 * w) / (2.0 * e.sqrt()),
            OutcomeModel::Constant { .. } => 0.0,
        }
    }

    /// `E[f(w, e) | z]`, integrating out the noise.
    pub fn conditional_mean(&self, w: bool, e: f64, z: &[f64]) -> Result<f64> {
        match self {
            OutcomeModel::Vaccine => {
                let wf = f64::from(u8::from(w));
                Ok((1.0 - 0.4 * wf) * (1.0 - e.sqrt()) * vaccine_posterior_mean(z[0])?)
            }
            // the noise enters the other models additively with mean zero
            _ => Ok(self.response(w, e, z, 0.0)),
        }
    }

    /// Closed-form `E[f(1, pi) - f(0, pi)]`.
    pub fn population_ate(&self, pi: f64) -> f64 {
        match self {
            // E z = -1/2
            OutcomeModel::ExposureQuadratic => -2.0 * (1.0 - pi).powi(2) + pi * pi,
            OutcomeModel::SmoothAdditive { .. } => pi - 0.5,
            // E[2 / (1 + exp(-z*))] = 1 by symmetry of z*
            OutcomeModel::Vaccine => -0.4 * (1.0 - pi.sqrt()),
            OutcomeModel::Constant { .. } => 0.0,
        }
    }
}

fn logistic2(x: f64) -> f64 {
    2.0 / (1.0 + (-x).exp())
}

/// `E[2 / (1 + exp(-z*)) | z]` where `z = z* v`. Given `z`, `z*` ranges over
/// `[z / 1.1, z / 0.9]` with density proportional to `phi(t) / |t|`.
fn vaccine_posterior_mean(z: f64) -> Result<f64> {
    if z == 0.0 {
        return Ok(1.0);
    }
    let (a, b) = if z > 0.0 { (z / 1.1, z / 0.9) } else { (z / 0.9, z / 1.1) };
    let weight = |t: f64| (-t * t / 4.0).exp() / t.abs();
    let scale = weight(z);
    let den = integrate(|t| weight(t) / scale, a, b, 1e-12)?.value;
    let num = integrate(|t| logistic2(t) * weight(t) / scale, a, b, 1e-12)?.value;
    Ok(num / den)
}

/// Outcomes for treatments `w` at exposures `exposures`.
pub fn simulate_outcomes(
    model: &OutcomeModel,
    w: &[bool],
    exposures: &[f64],
    units: &UnitDraws,
) -> Result<Vec<f64>> {
    let n = w.len();
    if exposures.len() != n || units.z.n() != n || units.noise.len() != n {
        return Err(invalid("treatment, exposure and unit draws differ in length"));
    }
    Ok((0..n)
        .map(|i| model.response(w[i], exposures[i], units.z.row(i), units.noise[i]))
        .collect())
}

/// Monte Carlo `E[f(1, pi) - f(0, pi)]` over the model's unit law.
pub fn ate_oracle<R: Rng + ?Sized>(
    model: &OutcomeModel,
    pi: f64,
    mc_reps: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if mc_reps < 10_000 {
        return Err(invalid(format!("ate oracle needs at least 10^4 draws, got {mc_reps}")));
    }
    let units = model.draw_units(mc_reps, rng)?;
    let diffs: Vec<f64> = (0..mc_reps)
        .map(|i| {
            let z = units.z.row(i);
            model.response(true, pi, z, units.noise[i]) - model.response(false, pi, z, units.noise[i])
        })
        .collect();
    Ok(mean_and_se(&diffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::stats::{mean, sample_variance};

    #[test]
    fn formula_substitutions() {
        let m = OutcomeModel::ExposureQuadratic;
        for e in [0.0, 0.3, 1.0] {
            assert_eq!(m.response(false, e, &[1.0], 5.0), 1.0);
        }
        assert_eq!(OutcomeModel::Vaccine.response(true, 1.0, &[0.4], 0.3), 0.0);
        let s = OutcomeModel::SmoothAdditive { p: 1 };
        assert!((s.response(true, 0.7, &[0.0], 0.0) - (0.2 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn oracles_match_closed_forms() {
        for (model, pi) in [
            (OutcomeModel::SmoothAdditive { p: 1 }, 0.7),
            (OutcomeModel::SmoothAdditive { p: 5 }, 0.7),
            (OutcomeModel::ExposureQuadratic, 0.6),
            (OutcomeModel::Vaccine, 0.2),
        ] {
            let est = ate_oracle(&model, pi, 200_000, &mut seeded(11)).unwrap();
            assert!(est.within(model.population_ate(pi), 4.0), "{model:?}: {est:?}");
        }
        assert!((OutcomeModel::SmoothAdditive { p: 3 }.population_ate(0.7) - 0.2).abs() < 1e-15);
        assert!((OutcomeModel::Vaccine.population_ate(0.2) + 0.221).abs() < 5e-4);
        let c = ate_oracle(&OutcomeModel::Constant { c: 3.0 }, 0.5, 10_000, &mut seeded(1)).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(ate_oracle(&OutcomeModel::Vaccine, 0.5, 10, &mut seeded(1)).is_err());
    }

    #[test]
    fn ar_covariates_have_target_correlation() {
        let model = OutcomeModel::SmoothAdditive { p: 3 };
        let u = model.draw_units(100_000, &mut seeded(5)).unwrap();
        let cov = u.z.covariance();
        for (k, target) in [(0, 1.0), (1, 0.5), (2, 0.25), (4, 1.0), (8, 1.0)] {
            assert!((cov[k] - target).abs() < 0.02, "entry {k}: {}", cov[k]);
        }
        let sums: Vec<f64> = (0..u.z.n()).map(|i| u.z.row(i).iter().sum()).collect();
        assert!((sample_variance(&sums) - (9.0 - 4.0 + 0.5)).abs() < 0.15);
    }

    #[test]
    fn conditional_mean_integrates_noise() {
        let model = OutcomeModel::Vaccine;
        let mut rng = seeded(8);
        let u = model.draw_units(200_000, &mut rng).unwrap();
        // E[E(f | z)] = E f
        let direct: Vec<f64> = (0..u.z.n()).map(|i| model.response(false, 0.2, u.z.row(i), u.noise[i])).collect();
        let smoothed: Vec<f64> = (0..20_000).map(|i| model.conditional_mean(false, 0.2, u.z.row(i)).unwrap()).collect();
        assert!((mean(&direct) - mean(&smoothed)).abs() < 0.01);
        assert!((vaccine_posterior_mean(0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(vaccine_posterior_mean(3.0).unwrap() > vaccine_posterior_mean(1.0).unwrap());
    }

    #[test]
    fn slopes_match_finite_differences() {
        for model in [OutcomeModel::ExposureQuadratic, OutcomeModel::SmoothAdditive { p: 2 }, OutcomeModel::Vaccine] {
            for w in [false, true] {
                let (z, noise, e, h) = ([0.3, -0.2], 0.7, 0.4, 1e-6);
                let fd = (model.response(w, e + h, &z, noise) - model.response(w, e - h, &z, noise)) / (2.0 * h);
                assert!((fd - model.exposure_slope(w, e, &z, noise)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn simulation_is_pure() {
        let model = OutcomeModel::ExposureQuadratic;
        let u = model.draw_units(6, &mut seeded(2)).unwrap();
        let w = [true, false, true, true, false, false];
        let e = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let a = simulate_outcomes(&model, &w, &e, &u).unwrap();
        assert_eq!(a, simulate_outcomes(&model, &w, &e, &u).unwrap());
        assert!(simulate_outcomes(&model, &w[..5], &e, &u).is_err());
        assert!(OutcomeModel::from_key("smooth-additive:5").is_ok());
        assert!(OutcomeModel::from_key("nope").is_err());
    }
}
