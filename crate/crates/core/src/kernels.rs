//! Higher-order Epanechnikov product kernels, kernel density estimates and
//! local constant (Nadaraya–Watson) regression.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::integrate;
use crate::trial::Covariates;

/// Default multiplier on `b_trim` in the `p_hat` trimming condition.
pub const DEFAULT_TRIM_FACTOR: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Treated,
    Control,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Treated => "treated",
            Group::Control => "control",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelOrder {
    Second,
    Fourth,
    Sixth,
}

impl KernelOrder {
    /// Order used for covariate dimension `p`: 1–3 → 2, 4–7 → 4, 8–10 → 6.
    pub fn for_dimension(p: usize) -> Result<Self> {
        match p {
            1..=3 => Ok(KernelOrder::Second),
            4..=7 => Ok(KernelOrder::Fourth),
            8..=10 => Ok(KernelOrder::Sixth),
            _ => Err(Error::UnsupportedDimension { p }),
        }
    }

    pub fn from_q(q: usize) -> Result<Self> {
        match q {
            2 => Ok(KernelOrder::Second),
            4 => Ok(KernelOrder::Fourth),
            6 => Ok(KernelOrder::Sixth),
            _ => Err(invalid(format!("kernel order {q} not in {{2, 4, 6}}"))),
        }
    }

    pub fn q(self) -> usize {
        match self {
            KernelOrder::Second => 2,
            KernelOrder::Fourth => 4,
            KernelOrder::Sixth => 6,
        }
    }

    /// The one-dimensional kernel at `t`, zero for `|t| >= 1`.
    #[inline]
    pub fn eval_1d(self, t: f64) -> f64 {
        if !(t.abs() < 1.0) {
            return 0.0;
        }
        let t2 = t * t;
        match self {
            KernelOrder::Second => 0.75 * (1.0 - t2),
            KernelOrder::Fourth => 45.0 / 32.0 * (1.0 - t2) * (1.0 - 7.0 / 3.0 * t2),
            KernelOrder::Sixth => {
                525.0 / 256.0 * (1.0 - t2) * (1.0 - 6.0 * t2 + 33.0 / 5.0 * t2 * t2)
            }
        }
    }
}

/// Tuning state of the nonparametric estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub order: KernelOrder,
    pub dim: usize,
    pub h_band: f64,
    pub b_trim: f64,
    pub trim_factor: f64,
    pub alpha: f64,
}

impl KernelConfig {
    /// Config with the order chosen from `dim`, the default trim factor and
    /// `alpha = 0.01`.
    pub fn new(dim: usize, h_band: f64, b_trim: f64) -> Result<Self> {
        let config = Self {
            order: KernelOrder::for_dimension(dim)?,
            dim,
            h_band,
            b_trim,
            trim_factor: DEFAULT_TRIM_FACTOR,
            alpha: 0.01,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_order(mut self, order: KernelOrder) -> Self {
        self.order = order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("kernel dimension must be at least 1"));
        }
        if !(self.h_band > 0.0) {
            return Err(invalid(format!("bandwidth {} must be positive", self.h_band)));
        }
        if !(self.b_trim > 0.0) || !self.b_trim.is_finite() {
            return Err(invalid(format!("trim threshold {} must be positive", self.b_trim)));
        }
        if !(self.trim_factor > 1.0) {
            return Err(invalid(format!("trim factor {} must exceed 1", self.trim_factor)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        Ok(())
    }

    /// Non-fatal issues with the tuning (the asymptotics want `h << b`).
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.h_band >= self.b_trim {
            out.push(format!(
                "bandwidth {:.4} is not below trim threshold {:.4}",
                self.h_band, self.b_trim
            ));
        }
        out
    }
}

/// Product kernel at `u`; zero outside the open unit cube.
pub fn kernel_eval(config: &KernelConfig, u: &[f64]) -> f64 {
    u.iter().map(|&t| config.order.eval_1d(t)).product()
}

/// `\int u^l K(u) du` for the exponent vector `l` (length `dim`).
pub fn kernel_moment(config: &KernelConfig, multi_index: &[u32]) -> Result<f64> {
    if multi_index.len() != config.dim {
        return Err(invalid(format!(
            "multi-index has {} entries, kernel dimension is {}",
            multi_index.len(),
            config.dim
        )));
    }
    let mut product = 1.0;
    for &l in multi_index {
        let order = config.order;
        let factor = integrate(|t| t.powi(l as i32) * order.eval_1d(t), -1.0, 1.0, 1e-13)?.value;
        product *= factor;
    }
    Ok(product)
}

/// Kernel-weighted sums at one query point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KernelSums {
    /// `sum_j K_j`.
    pub mass: f64,
    /// `sum_j K_j W_j`.
    pub treated_mass: f64,
    /// `sum_j K_j (1 - W_j)`.
    pub control_mass: f64,
    /// `sum_j K_j W_j Y_j`.
    pub treated_y: f64,
    /// `sum_j K_j (1 - W_j) Y_j`.
    pub control_y: f64,
}

/// Sample points sorted by their first coordinate, so that a window query
/// only scans points whose first coordinate is within one bandwidth.
#[derive(Debug, Clone)]
pub struct KernelSmoother<'a> {
    z: &'a Covariates,
    config: KernelConfig,
    sorted: Vec<usize>,
    keys: Vec<f64>,
}

impl<'a> KernelSmoother<'a> {
    pub fn new(z: &'a Covariates, config: KernelConfig) -> Result<Self> {
        config.validate()?;
        if z.p() != config.dim {
            return Err(invalid(format!(
                "covariates have dimension {}, kernel expects {}",
                z.p(),
                config.dim
            )));
        }
        let mut sorted: Vec<usize> = (0..z.n()).collect();
        sorted.sort_by(|&a, &b| z.row(a)[0].total_cmp(&z.row(b)[0]).then(a.cmp(&b)));
        let keys = sorted.iter().map(|&i| z.row(i)[0]).collect();
        Ok(Self {
            z,
            config,
            sorted,
            keys,
        })
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    /// `n h^p`, the density normalizer.
    pub fn normalizer(&self) -> f64 {
        self.z.n() as f64 * self.config.h_band.powi(self.config.dim as i32)
    }

    /// Calls `visit(j, K((z_j - query) / h))` for every sample point with a
    /// nonzero kernel weight, in a fixed order.
    pub fn for_each_in_window<F: FnMut(usize, f64)>(&self, query: &[f64], mut visit: F) {
        let h = self.config.h_band;
        let order = self.config.order;
        let lo = self.keys.partition_point(|&k| k <= query[0] - h);
        let hi = self.keys.partition_point(|&k| k < query[0] + h);
        'points: for &j in &self.sorted[lo..hi] {
            let row = self.z.row(j);
            let mut weight = 1.0;
            for (a, b) in row.iter().zip(query) {
                let k = order.eval_1d((a - b) / h);
                if k == 0.0 {
                    continue 'points;
                }
                weight *= k;
            }
            visit(j, weight);
        }
    }

    pub fn sums(&self, query: &[f64], y: Option<&[f64]>, w: Option<&[bool]>) -> KernelSums {
        let mut s = KernelSums::default();
        self.for_each_in_window(query, |j, k| {
            s.mass += k;
            if let Some(w) = w {
                let yj = y.map_or(0.0, |y| y[j]);
                if w[j] {
                    s.treated_mass += k;
                    s.treated_y += k * yj;
                } else {
                    s.control_mass += k;
                    s.control_y += k * yj;
                }
            }
        });
        s
    }
}

/// `p_hat(z) = (1 / (n h^p)) sum_j K((z_j - z) / h)`; may be negative for
/// higher-order kernels.
pub fn density_estimate(z: &Covariates, query: &[f64], config: &KernelConfig) -> Result<f64> {
    if z.n() == 0 {
        return Err(invalid("density estimate needs at least one sample point"));
    }
    let smoother = KernelSmoother::new(z, *config)?;
    Ok(smoother.sums(query, None, None).mass / smoother.normalizer())
}

/// Group-weighted density estimates `(p1_tilde, p2_tilde)`, normalized by
/// `pi_hat` and `1 - pi_hat`.
pub fn group_density_estimates(
    z: &Covariates,
    w: &[bool],
    query: &[f64],
    config: &KernelConfig,
    pi_hat: f64,
) -> Result<(f64, f64)> {
    if !(pi_hat > 0.0 && pi_hat < 1.0) {
        return Err(invalid(format!("pi_hat {pi_hat} outside (0, 1)")));
    }
    if w.len() != z.n() {
        return Err(invalid("treatment vector length does not match covariates"));
    }
    let smoother = KernelSmoother::new(z, *config)?;
    let s = smoother.sums(query, None, Some(w));
    let norm = smoother.normalizer();
    Ok((s.treated_mass / (norm * pi_hat), s.control_mass / (norm * (1.0 - pi_hat))))
}

/// Nadaraya–Watson estimate of `E[Y | z, group]` at `query`.
pub fn local_constant(
    z: &Covariates,
    y: &[f64],
    w: &[bool],
    query: &[f64],
    config: &KernelConfig,
    group: Group,
) -> Result<f64> {
    if y.len() != z.n() || w.len() != z.n() {
        return Err(invalid("outcome/treatment length does not match covariates"));
    }
    let smoother = KernelSmoother::new(z, *config)?;
    let s = smoother.sums(query, Some(y), Some(w));
    let (num, den) = match group {
        Group::Treated => (s.treated_y, s.treated_mass),
        Group::Control => (s.control_y, s.control_mass),
    };
    if den == 0.0 {
        return Err(Error::EmptyWindow { group });
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(xs: &[f64]) -> Covariates {
        Covariates::new(xs.len(), 1, xs.to_vec()).unwrap()
    }

    #[test]
    fn kernel_values_at_origin() {
        let c2 = KernelConfig::new(1, 1.0, 1.0).unwrap();
        assert_eq!(kernel_eval(&c2, &[0.0]), 0.75);
        let c4 = c2.with_order(KernelOrder::Fourth);
        assert_eq!(kernel_eval(&c4, &[0.0]), 45.0 / 32.0);
        for q in [2, 4, 6] {
            let c = KernelConfig::new(3, 1.0, 1.0).unwrap().with_order(KernelOrder::from_q(q).unwrap());
            assert_eq!(kernel_eval(&c, &[0.2, 1.0, 0.0]), 0.0);
            assert_eq!(kernel_eval(&c, &[-1.5, 0.0, 0.0]), 0.0);
        }
    }

    #[test]
    fn order_map() {
        let qs: Vec<usize> = (1..=10).map(|p| KernelOrder::for_dimension(p).unwrap().q()).collect();
        assert_eq!(qs, vec![2, 2, 2, 4, 4, 4, 4, 6, 6, 6]);
        assert!(matches!(KernelOrder::for_dimension(11), Err(Error::UnsupportedDimension { p: 11 })));
        assert!(KernelOrder::for_dimension(0).is_err());
    }

    #[test]
    fn one_dimensional_moments() {
        for order in [KernelOrder::Second, KernelOrder::Fourth, KernelOrder::Sixth] {
            let c = KernelConfig::new(1, 1.0, 1.0).unwrap().with_order(order);
            assert!((kernel_moment(&c, &[0]).unwrap() - 1.0).abs() < 1e-12);
            for l in 1..order.q() as u32 {
                assert!(kernel_moment(&c, &[l]).unwrap().abs() < 1e-12, "q={} l={l}", order.q());
            }
            assert!(kernel_moment(&c, &[order.q() as u32]).unwrap().abs() > 1e-3);
        }
    }

    #[test]
    fn density_hand_value() {
        let z = scalar(&[0.0, 0.5, 2.0]);
        let c = KernelConfig::new(1, 1.0, 0.1).unwrap();
        let d = density_estimate(&z, &[0.0], &c).unwrap();
        assert!((d - (0.75 + 0.75 * 0.75) / 3.0).abs() < 1e-15);
        assert_eq!(density_estimate(&z, &[10.0], &c).unwrap(), 0.0);
        let single = scalar(&[0.3]);
        let c2 = KernelConfig::new(1, 0.5, 0.1).unwrap();
        assert!((density_estimate(&single, &[0.3], &c2).unwrap() - 0.75 / 0.5).abs() < 1e-15);
    }

    #[test]
    fn group_densities_hand_value() {
        let z = scalar(&[0.0, 0.5, 2.0]);
        let c = KernelConfig::new(1, 1.0, 0.1).unwrap();
        let w = [true, false, true];
        let (p1, p2) = group_density_estimates(&z, &w, &[0.0], &c, 2.0 / 3.0).unwrap();
        assert!((p1 - 0.75 / (3.0 * 2.0 / 3.0)).abs() < 1e-15);
        assert!((p2 - 0.5625 / (3.0 / 3.0)).abs() < 1e-15);
        assert!(group_density_estimates(&z, &[true; 3], &[0.0], &c, 1.0).is_err());
        let same = scalar(&[0.1, 0.1]);
        let (a, b) = group_density_estimates(&same, &[true, false], &[0.0], &c, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn local_constant_cases() {
        let c = KernelConfig::new(1, 1.0, 0.1).unwrap();
        let z = scalar(&[0.2, -0.2, 5.0, 0.0]);
        let y = [1.0, 3.0, 100.0, 7.0];
        let w = [true, true, true, false];
        assert!((local_constant(&z, &y, &w, &[0.0], &c, Group::Treated).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(local_constant(&z, &y, &w, &[0.0], &c, Group::Control).unwrap(), 7.0);
        assert!(matches!(
            local_constant(&z, &y, &w, &[5.0], &c, Group::Control),
            Err(Error::EmptyWindow { group: Group::Control })
        ));
    }

    proptest! {
        #[test]
        fn second_order_density_nonnegative(
            xs in prop::collection::vec(-3.0f64..3.0, 1..40),
            q in -4.0f64..4.0,
            h in 0.05f64..3.0,
        ) {
            let z = scalar(&xs);
            let c = KernelConfig::new(1, h, 0.1).unwrap();
            prop_assert!(density_estimate(&z, &[q], &c).unwrap() >= 0.0);
        }

        #[test]
        fn local_constant_ignores_out_of_window_outcomes(
            xs in prop::collection::vec(-3.0f64..3.0, 2..30),
            shift in -50.0f64..50.0,
        ) {
            let z = scalar(&xs);
            let c = KernelConfig::new(1, 0.7, 0.1).unwrap();
            let n = xs.len();
            let y: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let w = vec![true; n];
            let query = [xs[0]];
            let shifted: Vec<f64> = (0..n)
                .map(|i| if (xs[i] - xs[0]).abs() >= 0.7 { y[i] + shift } else { y[i] })
                .collect();
            let a = local_constant(&z, &y, &w, &query, &c, Group::Treated).unwrap();
            let b = local_constant(&z, &shifted, &w, &query, &c, Group::Treated).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
