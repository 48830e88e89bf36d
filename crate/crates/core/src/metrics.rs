//! Accuracy metrics for comparing a computed covariance or Hessian against
//! a reference matrix.

use nalgebra::DMatrix;

use crate::error::{CovError, Result};

/// Mean absolute elementwise difference, sum |C_ij - V_ij| / n^2.
///
/// Note this is an elementwise average, not the usual root-sum-of-squares
/// Frobenius norm; the name follows the report column it feeds.
pub fn frobenius_distance(reference: &DMatrix<f64>, computed: &DMatrix<f64>) -> Result<f64> {
    if reference.shape() != computed.shape() || !reference.is_square() {
        return Err(CovError::DimensionMismatch {
            left: reference.nrows(),
            right: computed.nrows(),
        });
    }
    let n = reference.nrows();
    let total: f64 = reference
        .iter()
        .zip(computed.iter())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / (n * n) as f64)
}

/// Correlation matrix R_ij = V_ij / sqrt(V_ii V_jj), with an exactly unit
/// diagonal.
pub fn correlation_from_covariance(v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = v.nrows();
    if !v.is_square() {
        return Err(CovError::DimensionMismatch {
            left: n,
            right: v.ncols(),
        });
    }
    for i in 0..n {
        if v[(i, i)] <= 0.0 {
            return Err(CovError::NonPositiveDiagonal { index: i });
        }
    }
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = 1.0;
        for j in 0..i {
            let rij = v[(i, j)] / (v[(i, i)] * v[(j, j)]).sqrt();
            r[(i, j)] = rij;
            r[(j, i)] = rij;
        }
    }
    Ok(r)
}

/// Average percentage discrepancy between the standard errors implied by
/// two covariance matrices: 100 * sum_i |(sqrt(V_ii) - sqrt(C_ii)) / (n sqrt(C_ii))|.
/// The reference C supplies the normalization, so the metric is directed.
pub fn stderr_pct_error(reference: &DMatrix<f64>, computed: &DMatrix<f64>) -> Result<f64> {
    if reference.shape() != computed.shape() || !reference.is_square() {
        return Err(CovError::DimensionMismatch {
            left: reference.nrows(),
            right: computed.nrows(),
        });
    }
    let n = reference.nrows();
    let mut total = 0.0;
    for i in 0..n {
        if reference[(i, i)] <= 0.0 {
            return Err(CovError::NonPositiveDiagonal { index: i });
        }
        if computed[(i, i)] <= 0.0 {
            return Err(CovError::NonPositiveDiagonal { index: i });
        }
        let sc = reference[(i, i)].sqrt();
        let sv = computed[(i, i)].sqrt();
        total += ((sv - sc) / (n as f64 * sc)).abs();
    }
    Ok(100.0 * total)
}

/// One row of an accuracy/cost comparison across methods.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub method: String,
    pub frobenius_hessian: f64,
    pub frobenius_corr: f64,
    pub g_pct: f64,
    pub time_seconds: f64,
    pub evaluations: usize,
}
