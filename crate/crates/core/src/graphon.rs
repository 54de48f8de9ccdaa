//! Graphon specifications, sparse random-graph sampling and graphon-level
//! oracle quantities.
//!
//! A graph on `n` vertices is drawn by giving each vertex a latent
//! `U_i ~ U(0, 1)` and connecting `i < j` independently with probability
//! `min(rho_n * h(U_i, U_j), 1)`, where `rho_n = scale * n^(-gamma)`.

use std::fmt;
use std::sync::Arc;

use evalexpr::{ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use rand::distr::Open01;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::network::Network;
use crate::quadrature::{integrate, try_integrate};

/// A real function on `[0, 1]`, used for graphon eigenfunctions.
pub type UnitFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Registry key of the quadratic graphon `x^2 + y^2 + xy + 0.1`.
pub const QUADRATIC_KEY: &str = "quadratic";
/// Accepted alias of [`QUADRATIC_KEY`].
pub const QUADRATIC_ALIAS: &str = "paper-sec3";

#[derive(Clone)]
pub enum GraphonForm {
    /// `h(x, y) = x^2 + y^2 + xy + 0.1`; rank 3, since
    /// `h = 10(x^2 + 0.1)(y^2 + 0.1) - 10 x^2 y^2 + xy`.
    Quadratic,
    Constant(f64),
    /// `h(x, y) = sum_k lambda_k psi_k(x) psi_k(y)`.
    LowRank {
        eigenvalues: Vec<f64>,
        eigenfunctions: Vec<UnitFn>,
    },
}

impl fmt::Debug for GraphonForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphonForm::Quadratic => write!(f, "Quadratic"),
            GraphonForm::Constant(c) => write!(f, "Constant({c})"),
            GraphonForm::LowRank { eigenvalues, .. } => {
                write!(f, "LowRank {{ eigenvalues: {eigenvalues:?} }}")
            }
        }
    }
}

/// Declared bounds `inf_x \int h(x, y) dy >= row_integral_min` and
/// `sup h <= sup`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphonBounds {
    pub row_integral_min: f64,
    pub sup: f64,
}

#[derive(Debug, Clone)]
pub struct GraphonSpec {
    key: String,
    form: GraphonForm,
    sparsity_exponent: f64,
    sparsity_scale: f64,
    rank_hint: Option<usize>,
    bounds: Option<GraphonBounds>,
}

impl GraphonSpec {
    pub fn quadratic(sparsity_exponent: f64) -> Self {
        Self {
            key: QUADRATIC_KEY.to_string(),
            form: GraphonForm::Quadratic,
            sparsity_exponent,
            sparsity_scale: 1.0,
            rank_hint: Some(3),
            bounds: Some(GraphonBounds {
                row_integral_min: 13.0 / 30.0,
                sup: 3.1,
            }),
        }
    }

    pub fn constant(c: f64, sparsity_exponent: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(invalid(format!("constant graphon value {c} must be finite and >= 0")));
        }
        Ok(Self {
            key: format!("constant:{c}"),
            form: GraphonForm::Constant(c),
            sparsity_exponent,
            sparsity_scale: 1.0,
            rank_hint: Some(1),
            bounds: Some(GraphonBounds {
                row_integral_min: c,
                sup: c,
            }),
        })
    }

    /// A finite eigen-expansion. Eigenvalues must be ordered by
    /// non-increasing magnitude and nonzero.
    pub fn low_rank(
        eigenvalues: Vec<f64>,
        eigenfunctions: Vec<UnitFn>,
        sparsity_exponent: f64,
    ) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.len() != eigenfunctions.len() {
            return Err(invalid("low-rank graphon needs matching, nonempty eigenpairs"));
        }
        if eigenvalues.iter().any(|l| *l == 0.0 || !l.is_finite()) {
            return Err(invalid("low-rank eigenvalues must be finite and nonzero"));
        }
        if eigenvalues.windows(2).any(|w| w[0].abs() < w[1].abs()) {
            return Err(invalid("low-rank eigenvalues must be ordered by decreasing magnitude"));
        }
        let r = eigenvalues.len();
        Ok(Self {
            key: format!("rank{r}"),
            form: GraphonForm::LowRank {
                eigenvalues,
                eigenfunctions,
            },
            sparsity_exponent,
            sparsity_scale: 1.0,
            rank_hint: Some(r),
            bounds: None,
        })
    }

    /// `h(x, y) = psi(x) psi(y)` for a user expression `psi` in the variable
    /// `x` (e.g. `1 + x`). Stored normalized: `lambda = \int psi^2`.
    pub fn rank_one_expr(expr: &str, sparsity_exponent: f64) -> Result<Self> {
        let psi = parse_unit_fn(expr)?;
        let norm2 = integrate(|x| psi(x).powi(2), 0.0, 1.0, 1e-12)?.value;
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(invalid(format!("rank-1 expression `{expr}` has zero or infinite norm")));
        }
        let scale = norm2.sqrt();
        let unit: UnitFn = Arc::new(move |x| psi(x) / scale);
        let mut spec = Self::low_rank(vec![norm2], vec![unit], sparsity_exponent)?;
        spec.key = format!("rank1:{expr}");
        Ok(spec)
    }

    /// Resolves a registry key: `quadratic` (alias `paper-sec3`),
    /// `constant:<c>` or `rank1:<expr>`.
    pub fn from_key(key: &str, sparsity_exponent: f64) -> Result<Self> {
        if key == QUADRATIC_KEY || key == QUADRATIC_ALIAS {
            return Ok(Self::quadratic(sparsity_exponent));
        }
        if let Some(c) = key.strip_prefix("constant:") {
            let c: f64 = c
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad constant in graphon key `{key}`")))?;
            return Self::constant(c, sparsity_exponent);
        }
        if let Some(expr) = key.strip_prefix("rank1:") {
            return Self::rank_one_expr(expr, sparsity_exponent);
        }
        Err(Error::UnknownKey {
            kind: "graphon",
            key: key.to_string(),
        })
    }

    /// Overrides the constant in `rho_n = scale * n^(-gamma)`.
    pub fn with_sparsity_scale(mut self, scale: f64) -> Self {
        self.sparsity_scale = scale;
        self
    }

    pub fn with_rank_hint(mut self, r: usize) -> Self {
        self.rank_hint = Some(r);
        self
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn form(&self) -> &GraphonForm {
        &self.form
    }

    pub fn sparsity_exponent(&self) -> f64 {
        self.sparsity_exponent
    }

    pub fn rank_hint(&self) -> Option<usize> {
        self.rank_hint
    }

    pub fn bounds(&self) -> Option<GraphonBounds> {
        self.bounds
    }

    pub fn sparsity(&self, n: usize) -> f64 {
        self.sparsity_scale * (n as f64).powf(-self.sparsity_exponent)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match &self.form {
            GraphonForm::Quadratic => x * x + y * y + x * y + 0.1,
            GraphonForm::Constant(c) => *c,
            GraphonForm::LowRank {
                eigenvalues,
                eigenfunctions,
            } => eigenvalues
                .iter()
                .zip(eigenfunctions)
                .map(|(l, psi)| l * psi(x) * psi(y))
                .sum(),
        }
    }

    /// `min(rho_n h(x, y), 1)`, floored at zero for expansions that dip
    /// below it.
    pub fn edge_probability(&self, n: usize, x: f64, y: f64) -> f64 {
        (self.sparsity(n) * self.eval(x, y)).clamp(0.0, 1.0)
    }

    /// Checks symmetry, the declared bounds and (for expansions)
    /// orthonormality of the eigenfunctions on a 2-D Sobol probe set.
    pub fn probe_check(&self, probes: usize) -> Result<ProbeReport> {
        let points = sobol_2d(probes);
        let mut max_asymmetry: f64 = 0.0;
        let mut sup = f64::NEG_INFINITY;
        let mut min_value = f64::INFINITY;
        for &(x, y) in &points {
            let hxy = self.eval(x, y);
            max_asymmetry = max_asymmetry.max((hxy - self.eval(y, x)).abs());
            sup = sup.max(hxy);
            min_value = min_value.min(hxy);
        }
        let row_probes = probes.clamp(1, 1000);
        let mut min_row_integral = f64::INFINITY;
        for i in 0..=row_probes {
            let x = i as f64 / row_probes as f64;
            min_row_integral = min_row_integral.min(graphon_degree_profile(self, x)?);
        }
        let orthonormality_error = match &self.form {
            GraphonForm::LowRank { eigenfunctions, .. } => {
                let mut worst: f64 = 0.0;
                for (k, a) in eigenfunctions.iter().enumerate() {
                    for (l, b) in eigenfunctions.iter().enumerate().skip(k) {
                        let ip = integrate(|x| a(x) * b(x), 0.0, 1.0, 1e-10)?.value;
                        let target = if k == l { 1.0 } else { 0.0 };
                        worst = worst.max((ip - target).abs());
                    }
                }
                Some(worst)
            }
            _ => None,
        };
        let report = ProbeReport {
            max_asymmetry,
            sup,
            min_value,
            min_row_integral,
            orthonormality_error,
        };
        if max_asymmetry > 1e-12 {
            return Err(invalid(format!("graphon is not symmetric (max |h(x,y)-h(y,x)| = {max_asymmetry:.3e})")));
        }
        if min_value < 0.0 {
            return Err(invalid(format!("graphon takes negative value {min_value}")));
        }
        if let Some(b) = self.bounds {
            if sup > b.sup + 1e-12 {
                return Err(invalid(format!("probe sup {sup} exceeds declared bound {}", b.sup)));
            }
            if min_row_integral < b.row_integral_min - 1e-9 {
                return Err(invalid(format!(
                    "probe row integral {min_row_integral} below declared bound {}",
                    b.row_integral_min
                )));
            }
        }
        if orthonormality_error.is_some_and(|e| e > 1e-6) {
            return Err(invalid("graphon eigenfunctions are not orthonormal"));
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeReport {
    pub max_asymmetry: f64,
    pub sup: f64,
    pub min_value: f64,
    pub min_row_integral: f64,
    pub orthonormality_error: Option<f64>,
}

fn parse_unit_fn(expr: &str) -> Result<Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
    let node: Node<DefaultNumericTypes> = evalexpr::build_operator_tree(expr)
        .map_err(|e| invalid(format!("cannot parse expression `{expr}`: {e}")))?;
    let eval = move |x: f64| -> std::result::Result<f64, String> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        ctx.set_value("x".into(), Value::Float(x))
            .map_err(|e| e.to_string())?;
        node.eval_number_with_context(&ctx).map_err(|e| e.to_string())
    };
    for i in 0..=16 {
        let x = i as f64 / 16.0;
        match eval(x) {
            Ok(v) if v.is_finite() => {}
            Ok(v) => return Err(invalid(format!("expression `{expr}` is {v} at x = {x}"))),
            Err(e) => return Err(invalid(format!("cannot evaluate `{expr}`: {e}"))),
        }
    }
    Ok(Arc::new(move |x| eval(x).unwrap_or(f64::NAN)))
}

/// First `count` points of the 2-D Sobol sequence (gray-code order).
pub(crate) fn sobol_2d(count: usize) -> Vec<(f64, f64)> {
    let mut v1 = [0u32; 32];
    let mut v2 = [0u32; 32];
    for k in 0..32 {
        v1[k] = 1u32 << (31 - k);
        v2[k] = if k == 0 { 1u32 << 31 } else { v2[k - 1] ^ (v2[k - 1] >> 1) };
    }
    let scale = 1.0 / 4_294_967_296.0;
    let (mut x1, mut x2) = (0u32, 0u32);
    let mut points = Vec::with_capacity(count);
    for i in 0..count {
        points.push((x1 as f64 * scale, x2 as f64 * scale));
        let c = (!(i as u32)).trailing_zeros() as usize;
        x1 ^= v1[c.min(31)];
        x2 ^= v2[c.min(31)];
    }
    points
}

/// `n` i.i.d. latents from the open unit interval.
pub fn sample_latents<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("number of latents must be positive"));
    }
    Ok((0..n).map(|_| rng.sample::<f64, _>(Open01)).collect())
}

/// Draws each pair `i < j` independently with probability
/// `min(rho_n h(U_i, U_j), 1)`, where `n = latents.len()`.
pub fn sample_graph<R: Rng + ?Sized>(spec: &GraphonSpec, latents: &[f64], rng: &mut R) -> Result<Network> {
    if latents.iter().any(|u| !(*u > 0.0 && *u < 1.0)) {
        return Err(invalid("latents must lie in the open unit interval"));
    }
    let n = latents.len();
    let rho = spec.sparsity(n);
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut connect = |i: usize, j: usize, p: f64, adjacency: &mut Vec<Vec<usize>>| {
        let u: f64 = rng.random();
        if u < p {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    };
    match spec.form() {
        GraphonForm::LowRank {
            eigenvalues,
            eigenfunctions,
        } => {
            let features: Vec<Vec<f64>> = latents
                .iter()
                .map(|&u| eigenfunctions.iter().map(|psi| psi(u)).collect())
                .collect();
            for i in 0..n {
                for j in i + 1..n {
                    let h: f64 = eigenvalues
                        .iter()
                        .zip(features[i].iter().zip(&features[j]))
                        .map(|(l, (a, b))| l * a * b)
                        .sum();
                    connect(i, j, (rho * h).clamp(0.0, 1.0), &mut adjacency);
                }
            }
        }
        _ => {
            for i in 0..n {
                for j in i + 1..n {
                    let p = (rho * spec.eval(latents[i], latents[j])).clamp(0.0, 1.0);
                    connect(i, j, p, &mut adjacency);
                }
            }
        }
    }
    Ok(Network::from_sorted_adjacency(adjacency))
}

/// `\int_0^1 h(x, y) dy`, the limit of `N_i / (n rho_n)` for a vertex with
/// latent `x`.
pub fn graphon_degree_profile(spec: &GraphonSpec, latent: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&latent) {
        return Err(invalid(format!("latent {latent} outside [0, 1]")));
    }
    Ok(integrate(|y| spec.eval(latent, y), 0.0, 1.0, 1e-12)?.value)
}

/// `b = \int_0^1 g(y)^2 dy` with `g(y) = \int_0^1 h(x, y) / s(x) dx` and
/// `s(x) = \int_0^1 h(x, z) dz`, by nested adaptive quadrature.
pub fn graphon_b(spec: &GraphonSpec, tol: f64) -> Result<f64> {
    let inner_tol = tol * 1e-2;
    let middle_tol = tol * 1e-1;
    let row = |x: f64| -> Result<f64> {
        let s = integrate(|z| spec.eval(x, z), 0.0, 1.0, inner_tol)?.value;
        if !(s > 0.0) {
            return Err(invalid(format!("graphon row integral vanishes at x = {x}")));
        }
        Ok(s)
    };
    let g = |y: f64| -> Result<f64> {
        Ok(try_integrate(|x| Ok(spec.eval(x, y) / row(x)?), 0.0, 1.0, middle_tol)?.value)
    };
    Ok(try_integrate(|y| Ok(g(y)?.powi(2)), 0.0, 1.0, tol)?.value)
}
