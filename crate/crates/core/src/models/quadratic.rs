//! Exact quadratic objective: the one case where every stage of the
//! pipeline has a closed-form answer.

use nalgebra::{DMatrix, DVector};

use crate::error::{CovError, Result};
use crate::objective::ObjectiveFunction;
use crate::sampler::RngStream;

/// f(theta) = 1/2 theta^T A theta + b^T theta + c with symmetric A.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
}

impl QuadraticModel {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() != b.len() {
            return Err(CovError::DimensionMismatch {
                left: a.nrows(),
                right: b.len(),
            });
        }
        Ok(QuadraticModel { a, b, c })
    }

    /// The Hessian is the matrix A itself, everywhere.
    pub fn analytic_hessian(&self) -> DMatrix<f64> {
        self.a.clone()
    }
}

impl ObjectiveFunction for QuadraticModel {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn eval(&self, theta: &DVector<f64>) -> f64 {
        0.5 * theta.dot(&(&self.a * theta)) + self.b.dot(theta) + self.c
    }
}

/// Builds a random symmetric positive definite matrix together with its
/// exact inverse, via an orthogonal similarity Q diag(d) Q^T with known d.
/// Eigenvalues are drawn uniformly from [0.5, 8].
pub fn random_spd_pair(n: usize, rng: &mut RngStream) -> (DMatrix<f64>, DMatrix<f64>) {
    let gaussian = DMatrix::from_fn(n, n, |_, _| rng.normal());
    let q = gaussian.qr().q();
    let eigenvalues: Vec<f64> = (0..n).map(|_| 0.5 + 7.5 * rng.uniform()).collect();
    let mut a = DMatrix::zeros(n, n);
    let mut a_inv = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            let mut s_inv = 0.0;
            for k in 0..n {
                let qq = q[(i, k)] * q[(j, k)];
                s += qq * eigenvalues[k];
                s_inv += qq / eigenvalues[k];
            }
            a[(i, j)] = s;
            a[(j, i)] = s;
            a_inv[(i, j)] = s_inv;
            a_inv[(j, i)] = s_inv;
        }
    }
    (a, a_inv)
}
