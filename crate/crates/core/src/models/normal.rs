//! Two-parameter normal model in the (mu, log sigma) parametrization. Small
//! enough that the posterior can be cross-checked by direct quadrature.

use nalgebra::{DMatrix, DVector};

use crate::error::{CovError, Result};
use crate::objective::ObjectiveFunction;
use crate::sampler::RngStream;

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

/// Normal likelihood for m observations, reduced to sufficient statistics.
#[derive(Debug, Clone)]
pub struct NormalModel {
    m: usize,
    mean: f64,
    /// Sum of squared deviations from the sample mean.
    sum_sq_dev: f64,
}

impl NormalModel {
    pub fn new(data: &[f64]) -> Result<Self> {
        let m = data.len();
        if m < 2 {
            return Err(CovError::InvalidOptions(format!(
                "normal model needs at least 2 observations, got {m}"
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(CovError::NonFiniteValue {
                context: "normal model data",
            });
        }
        let mean = data.iter().sum::<f64>() / m as f64;
        let sum_sq_dev = data.iter().map(|x| (x - mean) * (x - mean)).sum();
        if sum_sq_dev <= 0.0 {
            return Err(CovError::InvalidOptions(
                "normal model data has zero variance".into(),
            ));
        }
        Ok(NormalModel {
            m,
            mean,
            sum_sq_dev,
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn sample_mean(&self) -> f64 {
        self.mean
    }

    pub fn sum_sq_dev(&self) -> f64 {
        self.sum_sq_dev
    }

    /// Closed-form maximizer: (sample mean, 1/2 log(mean squared deviation)).
    pub fn mle(&self) -> DVector<f64> {
        DVector::from_vec(vec![
            self.mean,
            0.5 * (self.sum_sq_dev / self.m as f64).ln(),
        ])
    }

    /// Exact second derivatives of the negative log-likelihood at any theta.
    pub fn analytic_hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let m = self.m as f64;
        let (mu, t) = (theta[0], theta[1]);
        let inv_var = (-2.0 * t).exp();
        let quad = self.sum_sq_dev + m * (mu - self.mean) * (mu - self.mean);
        let h_mu_mu = m * inv_var;
        let h_mu_t = -2.0 * m * (mu - self.mean) * inv_var;
        let h_t_t = 2.0 * inv_var * quad;
        DMatrix::from_row_slice(2, 2, &[h_mu_mu, h_mu_t, h_mu_t, h_t_t])
    }

    /// Draws m iid observations from N(mu, sigma^2).
    pub fn synthesize(mu: f64, sigma: f64, m: usize, rng: &mut RngStream) -> Vec<f64> {
        (0..m).map(|_| mu + sigma * rng.normal()).collect()
    }
}

impl ObjectiveFunction for NormalModel {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, theta: &DVector<f64>) -> f64 {
        let m = self.m as f64;
        let (mu, t) = (theta[0], theta[1]);
        let quad = self.sum_sq_dev + m * (mu - self.mean) * (mu - self.mean);
        m * t + m * HALF_LN_TWO_PI + 0.5 * (-2.0 * t).exp() * quad
    }
}
