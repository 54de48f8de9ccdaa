//! Least squares by Householder QR with column equilibration.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Designs whose equilibrated reciprocal condition number falls below this
/// are rejected as singular.
pub const RCOND_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coef: Vec<f64>,
    /// Reciprocal 2-norm condition number of the column-equilibrated design.
    pub rcond: f64,
}

/// Minimizes `|y - X b|` for a full-column-rank `X`.
pub fn least_squares(x: &DMatrix<f64>, y: &[f64]) -> Result<LeastSquares> {
    let (rows, cols) = x.shape();
    if y.len() != rows {
        return Err(invalid(format!("design has {rows} rows but {} responses", y.len())));
    }
    if cols == 0 {
        return Ok(LeastSquares {
            coef: Vec::new(),
            rcond: 1.0,
        });
    }
    if rows < cols {
        return Err(Error::SingularDesign { rcond: 0.0 });
    }
    let scales: Vec<f64> = (0..cols).map(|j| x.column(j).norm()).collect();
    if scales.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return Err(Error::SingularDesign { rcond: 0.0 });
    }
    let mut scaled = x.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / s);
    }
    let qr = scaled.qr();
    let r = qr.r();
    let sv = r.singular_values();
    let (smax, smin) = sv.iter().fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
    if !(rcond >= RCOND_THRESHOLD) {
        return Err(Error::SingularDesign { rcond });
    }
    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, cols).into_owned();
    let sol = r
        .solve_upper_triangular(&rhs)
        .ok_or(Error::SingularDesign { rcond })?;
    let coef = sol.iter().zip(&scales).map(|(b, s)| b / s).collect();
    Ok(LeastSquares { coef, rcond })
}
