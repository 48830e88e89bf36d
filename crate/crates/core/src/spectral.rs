//! Spectral inversion of an assembled Hessian.
//!
//! The Hessian is factored as H = Q diag(xi) Q^T with a cyclic Jacobi
//! eigensolver, the eigenvalues can optionally be re-estimated by direct
//! curvature measurements along the eigenvectors (which costs O(n) extra
//! objective calls and sidesteps the accumulated off-diagonal error), any
//! non-positive eigenvalue is floored, and the covariance is rebuilt as
//! Q diag(1/xi) Q^T.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::curvature1d::{curvature_along_line, line_function};
use crate::error::{CovError, Result};
use crate::hessian::{assemble_hessian, HessianMethod, HessianResult};
use crate::objective::ObjectiveFunction;

/// Convergence threshold for the eigensolver, relative to the Frobenius
/// norm: iteration stops once the summed absolute off-diagonal mass drops
/// below this fraction of it.
const JACOBI_TOL: f64 = 1e-14;
/// Jacobi sweeps allowed before giving up.
const JACOBI_SWEEP_CAP: usize = 100;

/// Eigendecomposition of a symmetric matrix, eigenvalues descending,
/// eigenvectors in the matching columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn eigen_sym(matrix: &DMatrix<f64>) -> Result<Eigen> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(CovError::DimensionMismatch {
            left: n,
            right: matrix.ncols(),
        });
    }
    if n == 0 {
        return Err(CovError::InvalidOptions("empty matrix".into()));
    }

    let mut a = matrix.clone();
    let mut q = DMatrix::identity(n, n);
    let frob = matrix.norm();
    if frob == 0.0 {
        // The zero matrix: already diagonal.
        return Ok(sorted_descending(DVector::zeros(n), q));
    }

    for sweep in 0..JACOBI_SWEEP_CAP {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[(i, j)].abs();
            }
        }
        if off < JACOBI_TOL * frob {
            let values = DVector::from_fn(n, |i, _| a[(i, i)]);
            return Ok(sorted_descending(values, q));
        }
        let _ = sweep;

        for p in 0..n {
            for r in p + 1..n {
                let apr = a[(p, r)];
                if apr == 0.0 {
                    continue;
                }
                // Stable rotation angle choice (the smaller of the two
                // angles that annihilate a[p][r]).
                let tau = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    a[(k, p)] = c * akp - s * akr;
                    a[(k, r)] = s * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let ark = a[(r, k)];
                    a[(p, k)] = c * apk - s * ark;
                    a[(r, k)] = s * apk + c * ark;
                }
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = c * qkp - s * qkr;
                    q[(k, r)] = s * qkp + c * qkr;
                }
            }
        }
    }

    let mut off = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            off += a[(i, j)].abs();
        }
    }
    Err(CovError::NoConvergence {
        what: "eigensolver",
        iterations: JACOBI_SWEEP_CAP,
        residual: off / frob,
    })
}

fn sorted_descending(values: DVector<f64>, vectors: DMatrix<f64>) -> Eigen {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap());
    let sorted_values = DVector::from_fn(n, |i, _| values[order[i]]);
    let mut sorted_vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vectors.set_column(dst, &vectors.column(src));
    }
    Eigen {
        values: sorted_values,
        vectors: sorted_vectors,
    }
}

/// Outcome of re-measuring eigenvalues along eigenvector directions.
#[derive(Debug, Clone)]
pub struct PolishOutcome {
    /// Eigenvalues, re-measured where possible.
    pub values: DVector<f64>,
    /// Objective calls spent, including one center evaluation.
    pub evaluations: usize,
    /// Directions where the curvature measurement failed (flat or noisy);
    /// those eigenvalues keep their unpolished values.
    pub skipped: Vec<usize>,
}

/// Replaces each eigenvalue with a direct curvature measurement along its
/// eigenvector. Directions where the measurement fails keep the original
/// eigenvalue and are recorded in `skipped`.
pub fn polish_eigenvalues(
    objective: &dyn ObjectiveFunction,
    theta_hat: &DVector<f64>,
    eigen: &Eigen,
) -> Result<PolishOutcome> {
    let n = eigen.values.len();
    let f0 = objective.eval(theta_hat);
    if !f0.is_finite() {
        return Err(CovError::NonFiniteValue {
            context: "polish center",
        });
    }

    let per_direction: Vec<Result<(f64, usize)>> = {
        let runner = |k: usize| -> Result<(f64, usize)> {
            let dir = DVector::from_column_slice(eigen.vectors.column(k).as_slice());
            let g = line_function(objective, theta_hat, &dir)?;
            match curvature_along_line(&g, f0) {
                Ok(est) => Ok((est.value, est.evaluations)),
                Err(CovError::FlatDirection { .. }) | Err(CovError::LostPrecision { .. }) => {
                    Ok((f64::NAN, 0))
                }
                Err(e) => Err(e.at_coordinate(k)),
            }
        };
        if objective.concurrent_safe() {
            (0..n).into_par_iter().map(runner).collect()
        } else {
            (0..n).map(runner).collect()
        }
    };

    let mut values = eigen.values.clone();
    let mut evaluations = 1usize;
    let mut skipped = Vec::new();
    for (k, r) in per_direction.into_iter().enumerate() {
        let (value, evals) = r?;
        evaluations += evals;
        if value.is_nan() {
            skipped.push(k);
        } else {
            values[k] = value;
        }
    }
    Ok(PolishOutcome {
        values,
        evaluations,
        skipped,
    })
}

/// Covariance obtained by inverting a Hessian through its spectrum.
#[derive(Debug, Clone)]
pub struct CovarianceResult {
    pub covariance: DMatrix<f64>,
    /// Final eigenvalues used in the inversion (polished and floored).
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// Whether eigenvalues were re-measured along eigenvectors.
    pub polished: bool,
    /// Objective calls spent polishing (zero when `polished` is false).
    pub polish_evaluations: usize,
    /// Directions where polishing failed and the unpolished value stayed.
    pub polish_skipped: Vec<usize>,
    /// Eigenvalue indices that were non-positive and got floored.
    pub clamped_indices: Vec<usize>,
}

/// Full covariance pipeline: assemble the Hessian, eigendecompose,
/// optionally polish the eigenvalues, floor non-positive ones, and invert.
pub fn covariance_from_hessian(
    objective: &dyn ObjectiveFunction,
    theta_hat: &DVector<f64>,
    method: HessianMethod,
    polish: bool,
) -> Result<(HessianResult, CovarianceResult)> {
    let hessian = assemble_hessian(objective, theta_hat, method)?;
    let covariance = invert_spectral(objective, theta_hat, &hessian.hessian, polish)?;
    Ok((hessian, covariance))
}

/// Spectral inversion of an already-assembled Hessian.
pub fn invert_spectral(
    objective: &dyn ObjectiveFunction,
    theta_hat: &DVector<f64>,
    hessian: &DMatrix<f64>,
    polish: bool,
) -> Result<CovarianceResult> {
    let eigen = eigen_sym(hessian)?;
    let n = eigen.values.len();

    let (mut values, polish_evaluations, polish_skipped) = if polish {
        let outcome = polish_eigenvalues(objective, theta_hat, &eigen)?;
        (outcome.values, outcome.evaluations, outcome.skipped)
    } else {
        (eigen.values.clone(), 0, Vec::new())
    };

    let largest = values.max();
    if largest <= 0.0 {
        return Err(CovError::DegenerateHessian);
    }
    // Floor for directions the data does not constrain: small enough not
    // to distort real curvature, large enough to keep the inverse finite.
    let floor = f64::EPSILON.sqrt() * largest.max(1.0);
    let mut clamped_indices = Vec::new();
    for k in 0..n {
        if values[k] <= 0.0 {
            values[k] = floor;
            clamped_indices.push(k);
        }
    }

    let mut covariance = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut sum = 0.0;
            for k in 0..n {
                sum += eigen.vectors[(i, k)] * eigen.vectors[(j, k)] / values[k];
            }
            covariance[(i, j)] = sum;
            covariance[(j, i)] = sum;
        }
    }

    Ok(CovarianceResult {
        covariance,
        eigenvalues: values,
        eigenvectors: eigen.vectors,
        polished: polish,
        polish_evaluations,
        polish_skipped,
        clamped_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::FnObjective;

    fn quadratic(a: DMatrix<f64>) -> impl ObjectiveFunction {
        let n = a.nrows();
        FnObjective::new(n, move |t: &DVector<f64>| 0.5 * (t.transpose() * &a * t)[(0, 0)])
    }

    #[test]
    fn eigen_of_diagonal_matrix() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 1.0]);
        let e = eigen_sym(&m).unwrap();
        assert_eq!(e.values.as_slice(), &[5.0, 2.0, 1.0]);
    }

    #[test]
    fn eigen_reconstructs_symmetric_matrix() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[
                4.0, 1.0, 0.5, -0.3, 1.0, 3.0, 0.2, 0.4, 0.5, 0.2, 2.5, -0.1, -0.3, 0.4,
                -0.1, 1.5,
            ],
        );
        let e = eigen_sym(&m).unwrap();
        let rebuilt =
            &e.vectors * DMatrix::from_diagonal(&e.values) * e.vectors.transpose();
        assert!((&rebuilt - &m).amax() < 1e-12);
        // Orthonormal vectors and descending values.
        let qtq = e.vectors.transpose() * &e.vectors;
        assert!((&qtq - DMatrix::identity(4, 4)).amax() < 1e-12);
        for i in 1..4 {
            assert!(e.values[i - 1] >= e.values[i]);
        }
    }

    #[test]
    fn known_two_by_two_spectrum() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = eigen_sym(&m).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn covariance_inverts_quadratic_hessian() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let obj = quadratic(a.clone());
        let theta = DVector::zeros(2);
        let (_, cov) =
            covariance_from_hessian(&obj, &theta, HessianMethod::Standard, false).unwrap();
        // Inverse of [[2,1],[1,3]] is [[0.6,-0.2],[-0.2,0.4]].
        let expected = DMatrix::from_row_slice(2, 2, &[0.6, -0.2, -0.2, 0.4]);
        assert!((&cov.covariance - &expected).amax() < 1e-9);
        assert!(cov.clamped_indices.is_empty());
    }

    #[test]
    fn reconstruction_matches_spectral_factors() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0]);
        let obj = quadratic(a);
        let (_, cov) =
            covariance_from_hessian(&obj, &DVector::zeros(3), HessianMethod::Standard, false)
                .unwrap();
        let inv_vals = DVector::from_fn(3, |i, _| 1.0 / cov.eigenvalues[i]);
        let rebuilt = &cov.eigenvectors
            * DMatrix::from_diagonal(&inv_vals)
            * cov.eigenvectors.transpose();
        assert!((&rebuilt - &cov.covariance).amax() < 1e-10);
    }

    #[test]
    fn polish_restores_sign_of_perturbed_eigenvalue() {
        // True curvature [[1, 0.9], [0.9, 1]]; hand the inverter a version
        // whose off-diagonal was botched to 1.05, dragging one eigenvalue
        // to -0.05. Re-measuring along the eigenvectors recovers the true
        // positive pair (1.9, 0.1).
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
        let obj = quadratic(a);
        let theta = DVector::zeros(2);
        let perturbed = DMatrix::from_row_slice(2, 2, &[1.0, 1.05, 1.05, 1.0]);
        let eigen = eigen_sym(&perturbed).unwrap();
        assert!(eigen.values[1] < 0.0);

        let outcome = polish_eigenvalues(&obj, &theta, &eigen).unwrap();
        assert!(outcome.skipped.is_empty());
        assert!((outcome.values[0] - 1.9).abs() < 1e-8);
        assert!((outcome.values[1] - 0.1).abs() < 1e-8);
    }

    #[test]
    fn degenerate_hessian_is_rejected() {
        let obj = quadratic(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        let negative = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        match invert_spectral(&obj, &DVector::zeros(2), &negative, false) {
            Err(CovError::DegenerateHessian) => {}
            other => panic!("expected DegenerateHessian, got {other:?}"),
        }
    }

    #[test]
    fn non_positive_eigenvalues_are_floored_and_reported() {
        let obj = quadratic(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        let indefinite = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -0.5]);
        let cov = invert_spectral(&obj, &DVector::zeros(2), &indefinite, false).unwrap();
        assert_eq!(cov.clamped_indices, vec![1]);
        let floor = f64::EPSILON.sqrt() * 2.0;
        assert_eq!(cov.eigenvalues[1], floor);
        // The floored direction dominates the covariance.
        assert!(cov.covariance[(1, 1)] > 1e6);
    }
}
