//! Shared fixtures for the criterion benchmarks.

use covkit_core::models::{fit_mle, random_spd_pair, PoModel, QuadraticModel, PO_PARAMS};
use covkit_core::sampler::{cholesky, RngStream};
use covkit_core::{DMatrix, DVector};

/// A synthetic ordinal-regression problem of moderate size together with
/// its fitted maximum-likelihood point, so benchmarks differentiate at a
/// realistic optimum rather than at an arbitrary parameter vector.
pub fn po_fixture() -> (PoModel, DVector<f64>) {
    let truth = PoModel::default_true_theta();
    let mut rng = RngStream::new(9, 0);
    let model = PoModel::synthesize(&truth, 256, &mut rng);
    let fit = fit_mle(&model, &DVector::zeros(PO_PARAMS)).expect("fixture fit");
    (model, fit.theta)
}

/// A random positive-definite quadratic objective of the given dimension,
/// minimized at the origin.
pub fn quadratic_fixture(n: usize) -> (QuadraticModel, DVector<f64>) {
    let mut rng = RngStream::new(17, 0);
    let (a, _) = random_spd_pair(n, &mut rng);
    let model = QuadraticModel::new(a, DVector::zeros(n), 0.0).expect("fixture quadratic");
    (model, DVector::zeros(n))
}

/// A 2x2 Gaussian objective with known covariance, plus the precision
/// matrix and Cholesky factor the posterior stage consumes.
pub fn gaussian_fixture() -> (QuadraticModel, DMatrix<f64>, DMatrix<f64>) {
    let v = DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8]);
    let h = DMatrix::from_row_slice(2, 2, &[0.8, -0.4, -0.4, 1.5]).map(|x| x / 1.04);
    let model = QuadraticModel::new(h.clone(), DVector::zeros(2), 0.0).expect("fixture gaussian");
    let chol = cholesky(&v).expect("fixture cholesky");
    (model, h, chol)
}
