//! Registered simulation scenarios.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::NpTuning;
use crate::graphon::GraphonSpec;
use crate::network::Network;
use crate::outcome::OutcomeModel;
use crate::trial::check_pi;

/// Sparsity exponent `gamma` in `rho_n = n^(-gamma)` for the graphon scenarios.
pub const GRAPHON_SPARSITY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    /// Quadratic graphon, exposure-quadratic outcome, scalar uniform covariate.
    Sec31Validation,
    /// Quadratic graphon, smooth additive outcome in `p` Gaussian covariates.
    Sec41Main,
    /// Fixed contact network with the vaccine outcome.
    ContactVaccine,
}

impl ScenarioId {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::Sec31Validation => "sec31-validation",
            ScenarioId::Sec41Main => "sec41-main",
            ScenarioId::ContactVaccine => "contact-vaccine",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sec31-validation" => Ok(ScenarioId::Sec31Validation),
            "sec41-main" => Ok(ScenarioId::Sec41Main),
            "contact-vaccine" => Ok(ScenarioId::ContactVaccine),
            _ => Err(Error::UnknownKey {
                kind: "scenario",
                key: s.to_string(),
            }),
        }
    }
}

/// Where each replicate's network comes from.
#[derive(Debug, Clone)]
pub enum NetworkSource {
    /// A fresh graph per replicate.
    Graphon(GraphonSpec),
    /// The same network in every replicate.
    Fixed(Arc<Network>),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: ScenarioId,
    pub network: NetworkSource,
    pub outcome: OutcomeModel,
    pub pi: f64,
    /// When false the outcome's exposure argument is `pi` and no network is
    /// sampled.
    pub interference: bool,
    /// Number of eigenpairs used by the variance estimator.
    pub rank: usize,
    pub np_tuning: NpTuning,
    /// Per-coordinate polynomial degree cap of the nonparametric variance.
    pub max_degree: usize,
    pub rel_tol: f64,
}

impl Scenario {
    pub fn sec31_validation(pi: f64) -> Result<Self> {
        check_pi(pi)?;
        Ok(Self {
            id: ScenarioId::Sec31Validation,
            network: NetworkSource::Graphon(GraphonSpec::quadratic(GRAPHON_SPARSITY)),
            outcome: OutcomeModel::ExposureQuadratic,
            pi,
            interference: true,
            rank: 3,
            np_tuning: NpTuning::default(),
            max_degree: 5,
            rel_tol: 0.05,
        })
    }

    /// `pi = 0.7`, covariate dimension `p`.
    pub fn sec41_main(p: usize, interference: bool) -> Result<Self> {
        Ok(Self {
            id: ScenarioId::Sec41Main,
            network: NetworkSource::Graphon(GraphonSpec::quadratic(GRAPHON_SPARSITY)),
            outcome: OutcomeModel::smooth_additive(p)?,
            pi: 0.7,
            interference,
            rank: 3,
            np_tuning: NpTuning::default(),
            max_degree: 5,
            rel_tol: 0.05,
        })
    }

    /// `pi = 0.2`, `r = 10`, bandwidth constant 1 on the given network.
    pub fn contact_vaccine(network: Network) -> Result<Self> {
        network.require_no_isolated()?;
        let rank = 10.min(network.n());
        Ok(Self {
            id: ScenarioId::ContactVaccine,
            network: NetworkSource::Fixed(Arc::new(network)),
            outcome: OutcomeModel::Vaccine,
            pi: 0.2,
            interference: true,
            rank,
            np_tuning: NpTuning {
                bandwidth_constant: Some(1.0),
                ..NpTuning::default()
            },
            max_degree: 5,
            rel_tol: 0.05,
        })
    }

    pub fn with_pi(mut self, pi: f64) -> Result<Self> {
        check_pi(pi)?;
        self.pi = pi;
        Ok(self)
    }

    pub fn with_np_tuning(mut self, tuning: NpTuning) -> Self {
        self.np_tuning = tuning;
        self
    }

    pub fn p(&self) -> usize {
        self.outcome.covariate_dim()
    }

    /// Population ATE `E[f(1, pi) - f(0, pi)]`.
    pub fn truth(&self) -> f64 {
        self.outcome.population_ate(self.pi)
    }

    /// Fixed networks pin the sample size.
    pub fn fixed_n(&self) -> Option<usize> {
        match &self.network {
            NetworkSource::Fixed(g) => Some(g.n()),
            NetworkSource::Graphon(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_pi(self.pi)?;
        if let NetworkSource::Fixed(g) = &self.network {
            if self.rank > g.n() {
                return Err(invalid(format!("rank {} exceeds network size {}", self.rank, g.n())));
            }
        }
        if self.max_degree < 1 {
            return Err(invalid("max_degree must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in [ScenarioId::Sec31Validation, ScenarioId::Sec41Main, ScenarioId::ContactVaccine] {
            assert_eq!(id.as_str().parse::<ScenarioId>().unwrap(), id);
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{id}\""));
        }
        assert!("sec99".parse::<ScenarioId>().is_err());
    }

    #[test]
    fn truths() {
        assert!((Scenario::sec41_main(3, true).unwrap().truth() - 0.2).abs() < 1e-15);
        let s = Scenario::sec31_validation(0.5).unwrap();
        assert!((s.truth() - (-0.25)).abs() < 1e-15);
        assert!(Scenario::sec31_validation(1.0).is_err());
        let c = Scenario::contact_vaccine(Network::complete(12)).unwrap();
        assert_eq!(c.rank, 10);
        assert_eq!(c.fixed_n(), Some(12));
        assert!(Scenario::contact_vaccine(Network::empty(3)).is_err());
    }
}
