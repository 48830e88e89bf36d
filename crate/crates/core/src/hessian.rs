//! Hessian assembly at a fitted minimum.
//!
//! Diagonal entries come from the one-dimensional curvature machinery, one
//! coordinate at a time, reusing a single center evaluation. Off-diagonal
//! entries use the four-point cross difference at steps the diagonal phase
//! found, either raw (`Quick`) or with one Richardson extrapolation
//! (`Standard`) that cancels the leading quadratic error term.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::curvature1d::{curvature_along_line, CurvatureEstimate};
use crate::error::{CovError, Result};
use crate::objective::ObjectiveFunction;

/// Off-diagonal strategy.
///
/// `Standard` spends 8 evaluations per element on an extrapolated cross
/// difference; `Quick` spends 4 on the raw one and accepts the quadratic
/// error term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianMethod {
    Standard,
    Quick,
}

/// An assembled Hessian with the step sizes and error bounds of its
/// diagonal entries, plus exact evaluation accounting per phase.
#[derive(Debug, Clone)]
pub struct HessianResult {
    pub hessian: DMatrix<f64>,
    /// Winning step size per coordinate, reused by the off-diagonal phase.
    pub steps: DVector<f64>,
    /// Error bound reported for each diagonal curvature.
    pub diag_errors: DVector<f64>,
    pub method: HessianMethod,
    /// Objective calls in the diagonal phase, including the shared center.
    pub diag_evaluations: usize,
    /// Objective calls in the off-diagonal phase.
    pub offdiag_evaluations: usize,
    /// Total objective calls.
    pub evaluations: usize,
}

/// Runs `f` over `0..count`, in parallel when allowed, and propagates the
/// lowest-index error so failures do not depend on thread scheduling.
fn try_map<T: Send>(
    parallel: bool,
    count: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = if parallel {
        (0..count).into_par_iter().map(&f).collect()
    } else {
        (0..count).map(&f).collect()
    };
    results.into_iter().collect()
}

/// Estimates all n diagonal curvatures of the objective at `theta_hat`.
///
/// The center value is evaluated once and shared by every coordinate, so
/// the returned per-coordinate evaluation counts exclude it; the total
/// spent is `1 + sum(estimate.evaluations)`.
pub fn diagonal_curvatures(
    objective: &dyn ObjectiveFunction,
    theta_hat: &DVector<f64>,
) -> Result<Vec<CurvatureEstimate>> {
    check_dims(objective, theta_hat)?;
    let f0 = objective.eval(theta_hat);
    if !f0.is_finite() {
        return Err(CovError::NonFiniteValue {
            context: "hessian center",
        });
    }
    diagonal_from_center(objective, theta_hat, f0)
}

fn diagonal_from_center(
    objective: &dyn ObjectiveFunction,
    theta_hat: &DVector<f64>,
    f0: f64,
) -> Result<Vec<CurvatureEstimate>> {
    let n = theta_hat.len();
    try_map(objective.concurrent_safe(), n, |i| {
        let g = |t: f64| {
            let mut theta = theta_hat.clone();
            theta[i] += t;
            objective.eval(&theta)
        };
        curvature_along_line(&g, f0).map_err(|e| e.at_coordinate(i))
    })
}

/// Four-point cross difference approximating the (i, j) mixed second
/// partial at `theta_hat` with steps `h_i`, `h_j`. Costs 4 evaluations.
pub fn cross_difference(
    objective: &dyn ObjectiveFunction,
    theta_hat: &DVector<f64>,
    i: usize,
    j: usize,
    h_i: f64,
    h_j: f64,
) -> Result<f64> {
    let n = check_dims(objective, theta_hat)?;
    check_pair(n, i, j, h_i, h_j)?;
    let corner = |si: f64, sj: f64| {
        let mut theta = theta_hat.clone();
        theta[i] += si * h_i;
        theta[j] += sj * h_j;
        objective.eval(&theta)
    };
    let fpp = corner(1.0, 1.0);
    let fmm = corner(-1.0, -1.0);
    let fpm = corner(1.0, -1.0);
    let fmp = corner(-1.0, 1.0);
    if !(fpp.is_finite() && fmm.is_finite() && fpm.is_finite() && fmp.is_finite()) {
        return Err(CovError::NonFiniteValue {
            context: "cross difference",
        });
    }
    Ok(((fpp - fpm) + (fmm - fmp)) / (4.0 * h_i * h_j))
}

/// One off-diagonal Hessian element.
///
/// `Quick` returns the raw cross difference (4 evaluations). `Standard`
/// also evaluates it at half steps and extrapolates, `(4 D_half - D) / 3`,
/// removing the quadratic error term (8 evaluations).
pub fn offdiag_element(
    objective: &dyn ObjectiveFunction,
    theta_hat: &DVector<f64>,
    i: usize,
    j: usize,
    h_i: f64,
    h_j: f64,
    method: HessianMethod,
) -> Result<f64> {
    let d = cross_difference(objective, theta_hat, i, j, h_i, h_j)?;
    match method {
        HessianMethod::Quick => Ok(d),
        HessianMethod::Standard => {
            let d_half =
                cross_difference(objective, theta_hat, i, j, 0.5 * h_i, 0.5 * h_j)?;
            Ok((4.0 * d_half - d) / 3.0)
        }
    }
}

/// Assembles the full symmetric Hessian at `theta_hat`.
///
/// `theta_hat` is assumed to be a converged minimizer; the diagonal phase
/// relies on the objective rising on both sides of it along every
/// coordinate. Per-coordinate failures are tagged with the coordinate.
pub fn assemble_hessian(
    objective: &dyn ObjectiveFunction,
    theta_hat: &DVector<f64>,
    method: HessianMethod,
) -> Result<HessianResult> {
    let n = check_dims(objective, theta_hat)?;
    let f0 = objective.eval(theta_hat);
    if !f0.is_finite() {
        return Err(CovError::NonFiniteValue {
            context: "hessian center",
        });
    }

    let diag = diagonal_from_center(objective, theta_hat, f0)?;
    let diag_evaluations = 1 + diag.iter().map(|e| e.evaluations).sum::<usize>();

    let mut hessian = DMatrix::zeros(n, n);
    let mut steps = DVector::zeros(n);
    let mut diag_errors = DVector::zeros(n);
    for (i, est) in diag.iter().enumerate() {
        hessian[(i, i)] = est.value;
        steps[i] = est.step;
        diag_errors[i] = est.error_estimate;
    }

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let values = try_map(objective.concurrent_safe(), pairs.len(), |k| {
        let (i, j) = pairs[k];
        offdiag_element(objective, theta_hat, i, j, steps[i], steps[j], method)
    })?;
    for (&(i, j), &v) in pairs.iter().zip(values.iter()) {
        hessian[(i, j)] = v;
        hessian[(j, i)] = v;
    }

    let per_element = match method {
        HessianMethod::Standard => 8,
        HessianMethod::Quick => 4,
    };
    let offdiag_evaluations = per_element * pairs.len();

    Ok(HessianResult {
        hessian,
        steps,
        diag_errors,
        method,
        diag_evaluations,
        offdiag_evaluations,
        evaluations: diag_evaluations + offdiag_evaluations,
    })
}

fn check_dims(objective: &dyn ObjectiveFunction, theta_hat: &DVector<f64>) -> Result<usize> {
    if objective.dim() != theta_hat.len() {
        return Err(CovError::DimensionMismatch {
            left: objective.dim(),
            right: theta_hat.len(),
        });
    }
    Ok(theta_hat.len())
}

fn check_pair(n: usize, i: usize, j: usize, h_i: f64, h_j: f64) -> Result<()> {
    if i >= n || j >= n || i == j {
        return Err(CovError::InvalidOptions(format!(
            "off-diagonal indices must be distinct and below {n}, got ({i}, {j})"
        )));
    }
    if !(h_i.is_finite() && h_i > 0.0 && h_j.is_finite() && h_j > 0.0) {
        return Err(CovError::InvalidOptions(format!(
            "steps must be positive and finite, got ({h_i}, {h_j})"
        )));
    }
    Ok(())
}
