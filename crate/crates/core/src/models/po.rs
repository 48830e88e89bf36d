//! Proportional-odds model for three ordered outcome groups with 13
//! covariates and two intercepts, 15 parameters total.
//!
//! The intercepts are stored as (gamma1, w) where the second cut sits at
//! gamma1 + exp(w); the log-gap keeps the cuts ordered for every real w,
//! so the three group probabilities are always a valid distribution.

use nalgebra::{DMatrix, DVector};

use crate::error::{CovError, Result};
use crate::objective::ObjectiveFunction;
use crate::sampler::RngStream;

/// Number of covariate columns the model expects.
pub const PO_COVARIATES: usize = 13;
/// Covariates plus (gamma1, w).
pub const PO_PARAMS: usize = PO_COVARIATES + 2;

/// Bernoulli rates for the binary covariate columns; the remaining columns
/// are standard normal draws.
const BINARY_RATES: [f64; 6] = [0.45, 0.25, 0.10, 0.50, 0.15, 0.30];

#[derive(Debug, Clone)]
pub struct PoModel {
    covariates: DMatrix<f64>,
    groups: Vec<u8>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// log(exp(d) - 1) for d > 0 without overflow.
fn ln_expm1(d: f64) -> f64 {
    if d > 33.0 {
        d
    } else {
        d.exp_m1().ln()
    }
}

impl PoModel {
    pub fn new(covariates: DMatrix<f64>, groups: Vec<u8>) -> Result<Self> {
        if covariates.ncols() != PO_COVARIATES {
            return Err(CovError::DimensionMismatch {
                left: covariates.ncols(),
                right: PO_COVARIATES,
            });
        }
        if covariates.nrows() != groups.len() {
            return Err(CovError::DimensionMismatch {
                left: covariates.nrows(),
                right: groups.len(),
            });
        }
        if groups.iter().any(|&g| !(1..=3).contains(&g)) {
            return Err(CovError::InvalidOptions(
                "outcome groups must be 1, 2, or 3".into(),
            ));
        }
        Ok(PoModel { covariates, groups })
    }

    pub fn n_rows(&self) -> usize {
        self.groups.len()
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn groups(&self) -> &[u8] {
        &self.groups
    }

    /// Probabilities of the three groups given the covariate effect z and
    /// the intercept parameters. Each probability is computed in its own
    /// stable form, so none of them collapses to 0 or 1 by cancellation
    /// when a cut argument is large.
    pub fn group_probabilities(z: f64, gamma1: f64, w: f64) -> (f64, f64, f64) {
        let gap = w.exp();
        let a = z + gamma1;
        let b = a + gap;
        let p1 = sigmoid(a);
        let p3 = sigmoid(-b);
        let p2 = (-softplus(-a) - softplus(b) + ln_expm1(gap)).exp();
        (p1, p2, p3)
    }

    fn linear_effect(&self, theta: &DVector<f64>, row: usize) -> f64 {
        let mut z = 0.0;
        for k in 0..PO_COVARIATES {
            z += self.covariates[(row, k)] * theta[k];
        }
        z
    }

    /// Exact second derivatives of the negative log-likelihood.
    ///
    /// Each observation contributes through the two logistic arguments
    /// a = z + gamma1 and b = a + exp(w); the chain rule back to theta adds
    /// an exp(w) column for b and a curvature term on the (w, w) entry.
    pub fn analytic_hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let n = PO_PARAMS;
        let gamma1 = theta[PO_COVARIATES];
        let w = theta[PO_COVARIATES + 1];
        let gap = w.exp();
        let mut h = DMatrix::zeros(n, n);
        let mut u = DVector::zeros(n);
        let mut v = DVector::zeros(n);
        for row in 0..self.n_rows() {
            let a = self.linear_effect(theta, row) + gamma1;
            let b = a + gap;
            let sa = sigmoid(a);
            let sb = sigmoid(b);
            // Second partials in (a, b) per group, and the first partial
            // in b that multiplies the curvature of b itself.
            let (laa, lab, lbb, lb) = match self.groups[row] {
                1 => (sa * (1.0 - sa), 0.0, 0.0, 0.0),
                3 => (0.0, 0.0, sb * (1.0 - sb), sb),
                _ => {
                    let expm1_gap = gap.exp_m1();
                    let ra = sigmoid(-a) / (sigmoid(-b) * expm1_gap);
                    let rb = sb / (sa * expm1_gap);
                    (
                        ra * (1.0 - 2.0 * sa) + ra * ra,
                        -ra * rb,
                        -rb * (1.0 - 2.0 * sb) + rb * rb,
                        -rb,
                    )
                }
            };
            for k in 0..PO_COVARIATES {
                u[k] = self.covariates[(row, k)];
                v[k] = self.covariates[(row, k)];
            }
            u[PO_COVARIATES] = 1.0;
            v[PO_COVARIATES] = 1.0;
            u[PO_COVARIATES + 1] = 0.0;
            v[PO_COVARIATES + 1] = gap;
            h.ger(laa, &u, &u, 1.0);
            h.ger(lab, &u, &v, 1.0);
            h.ger(lab, &v, &u, 1.0);
            h.ger(lbb, &v, &v, 1.0);
            h[(n - 1, n - 1)] += lb * gap;
        }
        h
    }

    /// Generates covariates (six binary indicators, seven standard normal
    /// columns) and outcomes drawn from the model's own probabilities.
    pub fn synthesize(true_theta: &DVector<f64>, n_rows: usize, rng: &mut RngStream) -> PoModel {
        let gamma1 = true_theta[PO_COVARIATES];
        let w = true_theta[PO_COVARIATES + 1];
        let mut covariates = DMatrix::zeros(n_rows, PO_COVARIATES);
        let mut groups = Vec::with_capacity(n_rows);
        for row in 0..n_rows {
            let mut z = 0.0;
            for k in 0..PO_COVARIATES {
                let x = if k < BINARY_RATES.len() {
                    f64::from(rng.uniform() < BINARY_RATES[k])
                } else {
                    rng.normal()
                };
                covariates[(row, k)] = x;
                z += x * true_theta[k];
            }
            let (p1, p2, _) = Self::group_probabilities(z, gamma1, w);
            let u = rng.uniform();
            let group = if u < p1 {
                1
            } else if u < p1 + p2 {
                2
            } else {
                3
            };
            groups.push(group);
        }
        PoModel { covariates, groups }
    }

    /// Parameter values used by the synthetic test fixtures: moderate
    /// covariate effects and intercepts that spread outcomes over all
    /// three groups.
    pub fn default_true_theta() -> DVector<f64> {
        let mut theta = DVector::from_vec(vec![
            0.8, -0.5, 1.2, -0.6, 0.5, 0.4, -0.45, 0.3, -0.35, 0.25, -0.3, 0.2, -0.25,
        ]);
        theta = theta.insert_row(PO_COVARIATES, -0.5);
        theta.insert_row(PO_COVARIATES + 1, 1.3_f64.ln())
    }
}

impl ObjectiveFunction for PoModel {
    fn dim(&self) -> usize {
        PO_PARAMS
    }

    fn eval(&self, theta: &DVector<f64>) -> f64 {
        let gamma1 = theta[PO_COVARIATES];
        let w = theta[PO_COVARIATES + 1];
        let gap = w.exp();
        let mut nll = 0.0;
        for row in 0..self.n_rows() {
            let a = self.linear_effect(theta, row) + gamma1;
            let b = a + gap;
            nll += match self.groups[row] {
                1 => softplus(-a),
                3 => softplus(b),
                // p2 = sigmoid(a) * sigmoid(-b) * expm1(gap)
                _ => softplus(-a) + softplus(b) - ln_expm1(gap),
            };
        }
        nll
    }
}
