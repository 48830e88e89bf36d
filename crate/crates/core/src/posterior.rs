//! Adaptive importance sampling for the posterior mean and covariance of
//! fitted parameters.
//!
//! Draws come from a multivariate t centered at the fitted optimum with
//! scale matrix V (the inverse-Hessian covariance), evaluated in
//! antithetic pairs so the mean estimate is exact for symmetric
//! objectives. The covariance estimate pairs the weighted second moment
//! with a zero-mean control term, scaled by a coefficient fitted within
//! the batch so the control can only reduce the error estimate. Batches
//! adapt the degrees of freedom by the error of the covariance trace.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{CovError, Result};
use crate::hessian::HessianMethod;
use crate::models::NormalModel;
use crate::objective::ObjectiveFunction;
use crate::sampler::{cholesky, mvt_draw, MvtSample, RngStream};
use crate::spectral::covariance_from_hessian;

/// Divisor used in the weight's polynomial tail term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightConvention {
    /// Divisor nu: the weight is exactly likelihood over the density the
    /// sampler actually draws from (a t with scale matrix V). Default.
    Consistent,
    /// Divisor nu - 2: the weight normalizes by the t whose covariance
    /// (rather than scale) equals V. Selectable for comparison runs.
    CovarianceMatched,
}

impl WeightConvention {
    fn divisor(self, nu: u32) -> f64 {
        match self {
            WeightConvention::Consistent => f64::from(nu),
            WeightConvention::CovarianceMatched => f64::from(nu) - 2.0,
        }
    }
}

fn log_weight_from_parts(
    f_value: f64,
    f_hat: f64,
    quad_form: f64,
    nu: u32,
    dim: usize,
    convention: WeightConvention,
) -> f64 {
    let half_exponent = 0.5 * (dim as f64 + f64::from(nu));
    -(f_value - f_hat) + half_exponent * (quad_form / convention.divisor(nu)).ln_1p()
}

/// Log importance weight at the offset y from the optimum:
/// -(f(theta_hat + y) - f_hat) + ((n + nu)/2) log(1 + y^T H y / d).
/// Subtracting the cached f_hat means the objective only needs to be
/// known up to an additive constant.
pub fn log_weight(
    objective: &dyn ObjectiveFunction,
    theta_hat: &DVector<f64>,
    f_hat: f64,
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    nu: u32,
    convention: WeightConvention,
) -> Result<f64> {
    let point = theta_hat + y;
    let f_value = objective.eval(&point);
    if !f_value.is_finite() {
        return Err(CovError::NonFiniteValue {
            context: "objective at a proposal point",
        });
    }
    let quad = y.dot(&(h * y));
    Ok(log_weight_from_parts(
        f_value,
        f_hat,
        quad,
        nu,
        objective.dim(),
        convention,
    ))
}

/// Per-batch configuration.
#[derive(Debug, Clone, Copy)]
pub struct BatchSettings {
    pub nu: u32,
    /// Number of antithetic pairs; the objective is called twice per pair.
    pub n_sims: usize,
    pub convention: WeightConvention,
    pub control_variate: bool,
}

/// A scalar function of theta whose posterior mean is estimated alongside
/// the parameter moments.
pub struct TrackedQuantity {
    pub name: String,
    transform: Box<dyn Fn(&DVector<f64>) -> f64 + Sync + Send>,
}

impl TrackedQuantity {
    pub fn new(
        name: impl Into<String>,
        transform: impl Fn(&DVector<f64>) -> f64 + Sync + Send + 'static,
    ) -> Self {
        TrackedQuantity {
            name: name.into(),
            transform: Box::new(transform),
        }
    }
}

/// Estimates and within-batch error variances from one batch of pairs.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub nu: u32,
    pub n_sims: usize,
    /// Estimate of theta_tilde - theta_hat.
    pub delta_mean: DVector<f64>,
    pub v_tilde: DMatrix<f64>,
    pub trace: f64,
    /// Standard error of the trace of v_tilde.
    pub trace_error: f64,
    /// Variance of each delta_mean component.
    pub mean_variances: DVector<f64>,
    /// Variance of each v_tilde element.
    pub cov_variances: DMatrix<f64>,
    /// Fitted scale on the control term (0 when the control is disabled).
    pub control_coefficient: f64,
    pub tracked_means: Vec<f64>,
    pub tracked_variances: Vec<f64>,
    /// Proposal points where the objective was non-finite (weight 0).
    pub rejections: usize,
    pub evaluations: usize,
}

/// Runs one batch of importance-sampled antithetic pairs.
///
/// Draws are taken from the stream up front in a fixed order, objective
/// evaluations may run concurrently, and every reduction afterwards walks
/// the pairs in index order — so the result is identical for any worker
/// count.
pub fn run_batch(
    objective: &dyn ObjectiveFunction,
    theta_hat: &DVector<f64>,
    f_hat: f64,
    h: &DMatrix<f64>,
    chol: &DMatrix<f64>,
    settings: &BatchSettings,
    tracked: &[TrackedQuantity],
    rng: &mut RngStream,
) -> Result<BatchResult> {
    let n = objective.dim();
    if theta_hat.len() != n || h.nrows() != n || !h.is_square() {
        return Err(CovError::DimensionMismatch {
            left: theta_hat.len(),
            right: n,
        });
    }
    if chol.nrows() != n || chol.ncols() != n {
        return Err(CovError::DimensionMismatch {
            left: chol.nrows(),
            right: n,
        });
    }
    if settings.nu < 3 {
        return Err(CovError::InvalidOptions(format!(
            "degrees of freedom must be at least 3, got {}",
            settings.nu
        )));
    }
    let n_sims = settings.n_sims;
    if n_sims == 0 {
        return Err(CovError::AllWeightsZero);
    }
    let nu = settings.nu;
    let c_nu = (f64::from(nu) - 2.0) / f64::from(nu);

    // The proposal's scale matrix, rebuilt from its factor so the control
    // term matches what was actually sampled; mirrored for exact symmetry.
    let mut v_prop = chol * chol.transpose();
    for j in 0..n {
        for k in 0..j {
            v_prop[(j, k)] = v_prop[(k, j)];
        }
    }

    let samples: Vec<MvtSample> = (0..n_sims).map(|_| mvt_draw(chol, nu, rng)).collect();

    let eval_pair = |s: &MvtSample| {
        let plus = theta_hat + &s.y;
        let minus = theta_hat - &s.y;
        (objective.eval(&plus), objective.eval(&minus))
    };
    let values: Vec<(f64, f64)> = if objective.concurrent_safe() {
        samples.par_iter().map(eval_pair).collect()
    } else {
        samples.iter().map(eval_pair).collect()
    };

    // Log weights, with rejected (non-finite) points marked by NaN.
    let mut rejections = 0usize;
    let mut max_log = f64::NEG_INFINITY;
    let mut logs: Vec<(f64, f64)> = Vec::with_capacity(n_sims);
    for (sample, &(fp, fm)) in samples.iter().zip(&values) {
        let quad = sample.y.dot(&(h * &sample.y));
        let mut side = |f: f64| {
            if f.is_finite() {
                let l = log_weight_from_parts(f, f_hat, quad, nu, n, settings.convention);
                if l > max_log {
                    max_log = l;
                }
                l
            } else {
                rejections += 1;
                f64::NAN
            }
        };
        let pair = (side(fp), side(fm));
        logs.push(pair);
    }
    if !max_log.is_finite() {
        return Err(CovError::AllWeightsZero);
    }

    // First pass: weights and raw accumulators (upper triangles).
    let mut weights: Vec<(f64, f64, f64)> = Vec::with_capacity(n_sims);
    let mut sum_s = 0.0;
    let mut t_sum = DVector::zeros(n);
    let mut a_sum = DMatrix::zeros(n, n);
    let mut c_sum = DMatrix::zeros(n, n);
    let mut tracked_sums = vec![0.0; tracked.len()];
    let mut tracked_pair: Vec<Vec<f64>> = vec![Vec::with_capacity(n_sims); tracked.len()];
    for (i, sample) in samples.iter().enumerate() {
        let (l1, l2) = logs[i];
        let w1 = if l1.is_nan() { 0.0 } else { (l1 - max_log).exp() };
        let w2 = if l2.is_nan() { 0.0 } else { (l2 - max_log).exp() };
        let s = w1 + w2;
        let y = &sample.y;
        sum_s += s;
        t_sum.axpy(w1 - w2, y, 1.0);
        for j in 0..n {
            for k in j..n {
                a_sum[(j, k)] += s * y[j] * y[k];
                if settings.control_variate {
                    c_sum[(j, k)] += v_prop[(j, k)] - c_nu * y[j] * y[k];
                }
            }
        }
        if !tracked.is_empty() {
            let plus = theta_hat + y;
            let minus = theta_hat - y;
            for (t, quantity) in tracked.iter().enumerate() {
                let mut a = 0.0;
                if w1 > 0.0 {
                    a += w1 * (quantity.transform)(&plus);
                }
                if w2 > 0.0 {
                    a += w2 * (quantity.transform)(&minus);
                }
                tracked_sums[t] += a;
                tracked_pair[t].push(a);
            }
        }
        weights.push((w1, w2, s));
    }
    if sum_s <= 0.0 {
        return Err(CovError::AllWeightsZero);
    }
    let s_bar = sum_s / n_sims as f64;
    let delta_mean = &t_sum / sum_s;
    let first = &a_sum / sum_s;
    let c_bar = &c_sum / n_sims as f64;
    let tracked_means: Vec<f64> = tracked_sums.iter().map(|a| a / sum_s).collect();

    let tr_first = (0..n).map(|j| first[(j, j)]).sum::<f64>();
    let tr_c_bar = (0..n).map(|j| c_bar[(j, j)]).sum::<f64>();
    let tr_v_prop = (0..n).map(|j| v_prop[(j, j)]).sum::<f64>();

    // Fit the control coefficient by regressing the weighted trace
    // influence on the control trace influence; with this choice the
    // combined error is never larger than the uncontrolled one.
    let mut beta = 0.0;
    if settings.control_variate {
        let mut cross = 0.0;
        let mut control_sq = 0.0;
        for (sample, &(_, _, s)) in samples.iter().zip(&weights) {
            let norm_sq = sample.y.norm_squared();
            let tu = (s * norm_sq - tr_first * s) / s_bar;
            let tv = (tr_v_prop - c_nu * norm_sq) - tr_c_bar;
            cross += tu * tv;
            control_sq += tv * tv;
        }
        if control_sq > 0.0 {
            beta = -cross / control_sq;
        }
    }

    // Point estimate, mirrored to exact symmetry.
    let mut v_tilde = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let value = first[(j, k)] + beta * c_bar[(j, k)] - delta_mean[j] * delta_mean[k];
            v_tilde[(j, k)] = value;
            v_tilde[(k, j)] = value;
        }
    }
    let trace = (0..n).map(|j| v_tilde[(j, j)]).sum::<f64>();

    // Second pass: within-batch variances from per-pair influences, with
    // the ratio-estimator correction for the weight-sum denominator.
    let mut mean_variances = DVector::zeros(n);
    let mut cov_variances = DMatrix::zeros(n, n);
    let mut tracked_variances = vec![0.0; tracked.len()];
    let mut trace_sq_acc = 0.0;
    if n_sims > 1 {
        let mut du = DVector::zeros(n);
        for (i, (sample, &(w1, w2, s))) in samples.iter().zip(&weights).enumerate() {
            let y = &sample.y;
            let wd = w1 - w2;
            for j in 0..n {
                du[j] = (wd * y[j] - delta_mean[j] * s) / s_bar;
                mean_variances[j] += du[j] * du[j];
            }
            let mut trace_infl = 0.0;
            for j in 0..n {
                for k in j..n {
                    let mut infl = (s * y[j] * y[k] - first[(j, k)] * s) / s_bar
                        - delta_mean[k] * du[j]
                        - delta_mean[j] * du[k];
                    if settings.control_variate {
                        infl += beta * ((v_prop[(j, k)] - c_nu * y[j] * y[k]) - c_bar[(j, k)]);
                    }
                    cov_variances[(j, k)] += infl * infl;
                    if j == k {
                        trace_infl += infl;
                    }
                }
            }
            trace_sq_acc += trace_infl * trace_infl;
            for t in 0..tracked.len() {
                let u = (tracked_pair[t][i] - tracked_means[t] * s) / s_bar;
                tracked_variances[t] += u * u;
            }
        }
        let denom = (n_sims * (n_sims - 1)) as f64;
        mean_variances /= denom;
        cov_variances /= denom;
        trace_sq_acc /= denom;
        for v in &mut tracked_variances {
            *v /= denom;
        }
        for j in 0..n {
            for k in 0..j {
                cov_variances[(j, k)] = cov_variances[(k, j)];
            }
        }
    } else {
        mean_variances.fill(f64::INFINITY);
        cov_variances.fill(f64::INFINITY);
        trace_sq_acc = f64::INFINITY;
        tracked_variances = vec![f64::INFINITY; tracked.len()];
    }

    Ok(BatchResult {
        nu,
        n_sims,
        delta_mean,
        v_tilde,
        trace,
        trace_error: trace_sq_acc.sqrt(),
        mean_variances,
        cov_variances,
        control_coefficient: beta,
        tracked_means,
        tracked_variances,
        rejections,
        evaluations: 2 * n_sims,
    })
}

/// Degrees-of-freedom schedule: step nu up by sqrt(2) (rounded) while the
/// trace error keeps falling; on the first rise, revert to the previous
/// value and hold it for all remaining batches.
#[derive(Debug, Clone)]
pub struct NuSchedule {
    current: u32,
    previous: u32,
    last_error: Option<f64>,
    frozen: bool,
}

impl NuSchedule {
    pub fn new(nu0: u32) -> Self {
        NuSchedule {
            current: nu0,
            previous: nu0,
            last_error: None,
            frozen: false,
        }
    }

    pub fn current(&self) -> u32 {
        self.current
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Feeds the trace error of the batch just run at `current()`.
    pub fn record(&mut self, trace_error: f64) {
        if self.frozen {
            return;
        }
        let improved = match self.last_error {
            None => true,
            Some(previous_error) => trace_error < previous_error,
        };
        if improved {
            self.previous = self.current;
            self.current = (f64::from(self.current) * std::f64::consts::SQRT_2).round() as u32;
            self.last_error = Some(trace_error);
        } else {
            self.current = self.previous;
            self.frozen = true;
        }
    }
}

/// Options for the batched adaptive run.
#[derive(Debug, Clone)]
pub struct PosteriorOptions {
    /// Starting degrees of freedom (at least 3).
    pub nu0: u32,
    /// Number of batches (at least 2).
    pub n_batches: usize,
    /// Antithetic pairs per batch (at least 100).
    pub batch_size: usize,
    pub convention: WeightConvention,
    pub control_variate: bool,
    pub seed: u64,
}

impl Default for PosteriorOptions {
    fn default() -> Self {
        PosteriorOptions {
            nu0: 4,
            n_batches: 10,
            batch_size: 10_000,
            convention: WeightConvention::Consistent,
            control_variate: true,
            seed: 0,
        }
    }
}

/// Inverse-variance pooled standard errors across batches.
#[derive(Debug, Clone)]
pub struct PooledErrors {
    pub delta_mean: DVector<f64>,
    pub v_tilde: DMatrix<f64>,
    pub trace: f64,
    pub tracked: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrackedEstimate {
    pub name: String,
    pub value: f64,
    pub standard_error: f64,
}

#[derive(Debug)]
pub struct PosteriorResult {
    pub theta_tilde: DVector<f64>,
    pub v_tilde: DMatrix<f64>,
    pub batches: Vec<BatchResult>,
    pub pooled_errors: PooledErrors,
    pub tracked: Vec<TrackedEstimate>,
    pub total_evaluations: usize,
    pub total_rejections: usize,
}

impl PosteriorResult {
    /// Degrees of freedom used by each batch, in order.
    pub fn nu_trajectory(&self) -> Vec<u32> {
        self.batches.iter().map(|b| b.nu).collect()
    }

    /// Fraction of proposal points rejected for non-finite objective values.
    pub fn rejection_rate(&self) -> f64 {
        let points: usize = self.batches.iter().map(|b| b.evaluations).sum();
        if points == 0 {
            0.0
        } else {
            self.total_rejections as f64 / points as f64
        }
    }
}

/// Combines batch estimates of one scalar with weights 1/variance.
/// Batches reporting exactly zero variance are treated as exact and
/// averaged by themselves; otherwise batches with non-finite variances
/// are skipped.
fn pool(values: &[f64], variances: &[f64]) -> (f64, f64) {
    if variances.iter().any(|&v| v == 0.0) {
        let exact: Vec<f64> = values
            .iter()
            .zip(variances)
            .filter(|(_, &var)| var == 0.0)
            .map(|(&v, _)| v)
            .collect();
        return (exact.iter().sum::<f64>() / exact.len() as f64, 0.0);
    }
    let mut numerator = 0.0;
    let mut inv_var_sum = 0.0;
    for (&value, &variance) in values.iter().zip(variances) {
        if variance.is_finite() {
            numerator += value / variance;
            inv_var_sum += 1.0 / variance;
        }
    }
    if inv_var_sum > 0.0 {
        (numerator / inv_var_sum, 1.0 / inv_var_sum)
    } else {
        (
            values.iter().sum::<f64>() / values.len().max(1) as f64,
            f64::INFINITY,
        )
    }
}

/// Runs n_batches of importance sampling with the adaptive nu schedule,
/// then pools every quantity across batches by inverse variance.
/// Batch b draws from stream b of the seed, so the whole run is
/// reproducible bit for bit at any worker count.
pub fn adaptive_posterior(
    objective: &dyn ObjectiveFunction,
    theta_hat: &DVector<f64>,
    h: &DMatrix<f64>,
    v: &DMatrix<f64>,
    options: &PosteriorOptions,
    tracked: &[TrackedQuantity],
) -> Result<PosteriorResult> {
    let n = objective.dim();
    if options.nu0 < 3 {
        return Err(CovError::InvalidOptions(format!(
            "nu0 must be at least 3, got {}",
            options.nu0
        )));
    }
    if options.batch_size < 100 {
        return Err(CovError::InvalidOptions(format!(
            "batch size must be at least 100 pairs, got {}",
            options.batch_size
        )));
    }
    if options.n_batches < 2 {
        return Err(CovError::InsufficientBatches {
            got: options.n_batches,
        });
    }
    let chol = cholesky(v)?;
    let f_hat = objective.eval(theta_hat);
    if !f_hat.is_finite() {
        return Err(CovError::NonFiniteValue {
            context: "objective at the optimum",
        });
    }

    let mut schedule = NuSchedule::new(options.nu0);
    let mut batches = Vec::with_capacity(options.n_batches);
    for batch_index in 0..options.n_batches {
        let mut rng = RngStream::new(options.seed, batch_index as u64);
        let settings = BatchSettings {
            nu: schedule.current(),
            n_sims: options.batch_size,
            convention: options.convention,
            control_variate: options.control_variate,
        };
        let batch = run_batch(
            objective, theta_hat, f_hat, h, &chol, &settings, tracked, &mut rng,
        )?;
        schedule.record(batch.trace_error);
        batches.push(batch);
    }

    // Pool each quantity across batches.
    let collect_scalar = |extract: &dyn Fn(&BatchResult) -> (f64, f64)| -> (f64, f64) {
        let (values, variances): (Vec<f64>, Vec<f64>) = batches.iter().map(extract).unzip();
        pool(&values, &variances)
    };
    let mut delta = DVector::zeros(n);
    let mut delta_se = DVector::zeros(n);
    for j in 0..n {
        let (value, variance) =
            collect_scalar(&|b: &BatchResult| (b.delta_mean[j], b.mean_variances[j]));
        delta[j] = value;
        delta_se[j] = variance.sqrt();
    }
    let mut v_tilde = DMatrix::zeros(n, n);
    let mut v_se = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let (value, variance) =
                collect_scalar(&|b: &BatchResult| (b.v_tilde[(j, k)], b.cov_variances[(j, k)]));
            v_tilde[(j, k)] = value;
            v_tilde[(k, j)] = value;
            v_se[(j, k)] = variance.sqrt();
            v_se[(k, j)] = variance.sqrt();
        }
    }
    let (_, trace_variance) =
        collect_scalar(&|b: &BatchResult| (b.trace, b.trace_error * b.trace_error));
    let mut tracked_out = Vec::with_capacity(tracked.len());
    let mut tracked_se = Vec::with_capacity(tracked.len());
    for (t, quantity) in tracked.iter().enumerate() {
        let (value, variance) =
            collect_scalar(&|b: &BatchResult| (b.tracked_means[t], b.tracked_variances[t]));
        tracked_se.push(variance.sqrt());
        tracked_out.push(TrackedEstimate {
            name: quantity.name.clone(),
            value,
            standard_error: variance.sqrt(),
        });
    }

    let total_evaluations = 1 + batches.iter().map(|b| b.evaluations).sum::<usize>();
    let total_rejections = batches.iter().map(|b| b.rejections).sum();
    Ok(PosteriorResult {
        theta_tilde: theta_hat + &delta,
        v_tilde,
        pooled_errors: PooledErrors {
            delta_mean: delta_se,
            v_tilde: v_se,
            trace: trace_variance.sqrt(),
            tracked: tracked_se,
        },
        tracked: tracked_out,
        batches,
        total_evaluations,
        total_rejections,
    })
}

/// End-to-end check on the two-parameter normal model: fits the MLE,
/// computes the covariance, runs the posterior stage, and returns the
/// posterior mean of sigma^2 (the variance parameter) with its pooled
/// standard error.
pub fn normal_sample_check(data: &[f64], options: &PosteriorOptions) -> Result<TrackedEstimate> {
    if data.len() < 3 {
        return Err(CovError::InvalidOptions(format!(
            "need at least 3 observations, got {}",
            data.len()
        )));
    }
    let model = NormalModel::new(data)?;
    let theta_hat = model.mle();
    let (hessian_result, covariance_result) =
        covariance_from_hessian(&model, &theta_hat, HessianMethod::Standard, false)?;
    let tracked = [TrackedQuantity::new("sigma_sq", |theta: &DVector<f64>| {
        (2.0 * theta[1]).exp()
    })];
    let result = adaptive_posterior(
        &model,
        &theta_hat,
        &hessian_result.hessian,
        &covariance_result.covariance,
        options,
        &tracked,
    )?;
    Ok(result.tracked.into_iter().next().expect("one tracked quantity"))
}
