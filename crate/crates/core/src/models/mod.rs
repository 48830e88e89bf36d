//! Built-in likelihood models with analytic Hessians and synthetic data
//! generators, plus a small quasi-Newton fitter so the pipeline can start
//! from raw data rather than a pre-computed optimum.

pub mod basketball;
pub mod normal;
pub mod po;
pub mod quadratic;

pub use basketball::{BasketballModel, Game};
pub use normal::NormalModel;
pub use po::{PoModel, PO_COVARIATES, PO_PARAMS};
pub use quadratic::{random_spd_pair, QuadraticModel};

use nalgebra::{DMatrix, DVector};

use crate::error::{CovError, Result};
use crate::objective::ObjectiveFunction;

/// Result of a maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct MleFit {
    pub theta: DVector<f64>,
    pub value: f64,
    /// Euclidean norm of the central-difference gradient at `theta`.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Gradient norm at which iteration stops early, relative to 1 + |f|.
const GRAD_TARGET: f64 = 1e-9;
/// Gradient norm the final point must reach for the fit to count, relative
/// to 1 + |f|.
const GRAD_ACCEPT: f64 = 1e-6;
const MAX_ITERATIONS: usize = 500;
const MAX_BACKTRACKS: u32 = 60;
const ARMIJO_C1: f64 = 1e-4;

fn fd_gradient(
    objective: &dyn ObjectiveFunction,
    x: &DVector<f64>,
    evaluations: &mut usize,
) -> DVector<f64> {
    let n = x.len();
    let h_base = f64::EPSILON.cbrt();
    let mut g = DVector::zeros(n);
    let mut point = x.clone();
    for i in 0..n {
        let h = h_base * (1.0 + x[i].abs());
        // Use the exactly representable step (x+h)-x to cancel rounding in
        // the divisor.
        let up = x[i] + h;
        let down = x[i] - h;
        point[i] = up;
        let fp = objective.eval(&point);
        point[i] = down;
        let fm = objective.eval(&point);
        point[i] = x[i];
        *evaluations += 2;
        g[i] = (fp - fm) / (up - down);
    }
    g
}

/// Minimizes the objective by BFGS with central-difference gradients and
/// Armijo backtracking. Succeeds when the gradient norm at the final point
/// is below 1e-6 * (1 + |f|).
pub fn fit_mle(objective: &dyn ObjectiveFunction, start: &DVector<f64>) -> Result<MleFit> {
    let n = objective.dim();
    if start.len() != n {
        return Err(CovError::DimensionMismatch {
            left: start.len(),
            right: n,
        });
    }
    let mut evaluations = 0usize;
    let mut x = start.clone();
    let mut fx = objective.eval(&x);
    evaluations += 1;
    if !fx.is_finite() {
        return Err(CovError::NonFiniteValue {
            context: "objective at the starting point",
        });
    }
    let mut g = fd_gradient(objective, &x, &mut evaluations);
    let mut inv_hess = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0usize;

    while iterations < MAX_ITERATIONS {
        if g.norm() <= GRAD_TARGET * (1.0 + fx.abs()) {
            break;
        }
        let mut direction = -(&inv_hess * &g);
        let mut slope = g.dot(&direction);
        if !(slope < 0.0) {
            // The approximation went bad; restart from steepest descent.
            inv_hess = DMatrix::identity(n, n);
            direction = -g.clone();
            slope = g.dot(&direction);
        }

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let candidate = &x + &direction * step;
            let f_candidate = objective.eval(&candidate);
            evaluations += 1;
            if f_candidate.is_finite() && f_candidate <= fx + ARMIJO_C1 * step * slope {
                let g_candidate = fd_gradient(objective, &candidate, &mut evaluations);
                let s = &candidate - &x;
                let y = &g_candidate - &g;
                let sy = s.dot(&y);
                if sy > 1e-10 * s.norm() * y.norm() {
                    // Standard BFGS update of the inverse Hessian:
                    // B' = B - rho(s (By)^T + (By) s^T) + (rho^2 y^T B y + rho) s s^T
                    let rho = 1.0 / sy;
                    let by = &inv_hess * &y;
                    let yby = y.dot(&by);
                    inv_hess.ger(-rho, &s, &by, 1.0);
                    inv_hess.ger(-rho, &by, &s, 1.0);
                    inv_hess.ger(rho * rho * yby + rho, &s, &s, 1.0);
                }
                x = candidate;
                fx = f_candidate;
                g = g_candidate;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break; // no further decrease available at this precision
        }
    }

    let gradient_norm = g.norm();
    if gradient_norm <= GRAD_ACCEPT * (1.0 + fx.abs()) {
        Ok(MleFit {
            theta: x,
            value: fx,
            gradient_norm,
            iterations,
            evaluations,
        })
    } else {
        Err(CovError::NoConvergence {
            what: "quasi-Newton fit",
            iterations,
            residual: gradient_norm / (1.0 + fx.abs()),
        })
    }
}
