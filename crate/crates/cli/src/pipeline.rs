//! Pipeline orchestration for the three run modes, plus the error type
//! that maps failures onto stable exit codes.

use std::time::Instant;

use covkit_core::error::CovError;
use covkit_core::metrics::{
    correlation_from_covariance, frobenius_distance, stderr_pct_error, ComparisonReport,
};
use covkit_core::models::fit_mle;
use covkit_core::posterior::adaptive_posterior;
use covkit_core::spectral::{covariance_from_hessian, invert_spectral, CovarianceResult};
use covkit_core::{DMatrix, DVector, HessianResult};

use crate::config::{self, MethodChoice, Mode, Overrides, Resolved};
use crate::data::{self, ModelInstance};
use crate::output::{self, BenchmarkRow, MatrixJson, MetricsJson, PosteriorJson, ReportJson};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numerical(CovError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(CovError::AllWeightsZero) => 5,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numerical(CovError::AllWeightsZero) => "all_weights_zero",
            CliError::Numerical(_) => "numerical",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(msg) | CliError::Data(msg) => msg.clone(),
            CliError::Numerical(err) => err.to_string(),
        }
    }

    /// Machine-readable form printed to stderr on failure.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind(), "message": self.message() }
        })
        .to_string()
    }
}

impl From<CovError> for CliError {
    fn from(err: CovError) -> Self {
        // Option-sanity failures come from user-supplied settings, not
        // from the numerics.
        match err {
            CovError::InvalidOptions(msg) => CliError::Config(msg),
            CovError::InsufficientBatches { got } => {
                CliError::Config(format!("need at least 2 batches, got {got}"))
            }
            other => CliError::Numerical(other),
        }
    }
}

struct HessianStage {
    theta_hat: DVector<f64>,
    hessian: HessianResult,
    covariance: CovarianceResult,
    metrics: MetricsJson,
    fit_evaluations: usize,
}

/// Accuracy of the computed matrices against the model's analytic
/// Hessian, inverted through the same spectral path.
fn oracle_metrics(
    model: &ModelInstance,
    theta_hat: &DVector<f64>,
    hessian: &DMatrix<f64>,
    covariance: &DMatrix<f64>,
) -> Result<MetricsJson, CliError> {
    let h_oracle = model.analytic_hessian(theta_hat);
    let v_oracle = invert_spectral(model.objective(), theta_hat, &h_oracle, false)?.covariance;
    let f = frobenius_distance(&h_oracle, hessian)?;
    let corr_f = frobenius_distance(
        &correlation_from_covariance(&v_oracle)?,
        &correlation_from_covariance(covariance)?,
    )?;
    let g = stderr_pct_error(&v_oracle, covariance)?;
    Ok(MetricsJson { f, corr_f, g })
}

/// Uses the configured theta_hat or fits one, then differentiates.
fn run_hessian_stage(
    model: &ModelInstance,
    resolved: &Resolved,
    method: MethodChoice,
) -> Result<HessianStage, CliError> {
    let objective = model.objective();
    let (theta_hat, fit_evaluations) = match &resolved.theta_hat {
        Some(values) => {
            if values.len() != objective.dim() {
                return Err(CliError::Config(format!(
                    "theta_hat has {} entries but the model has {} parameters",
                    values.len(),
                    objective.dim()
                )));
            }
            (DVector::from_vec(values.clone()), 0)
        }
        None => {
            let fit = fit_mle(objective, &model.fit_start())?;
            (fit.theta, fit.evaluations)
        }
    };
    let (hessian_part, polish_flag) = method.parts();
    let (hessian, covariance) =
        covariance_from_hessian(objective, &theta_hat, hessian_part, polish_flag)?;
    let metrics = oracle_metrics(model, &theta_hat, &hessian.hessian, &covariance.covariance)?;
    Ok(HessianStage {
        theta_hat,
        hessian,
        covariance,
        metrics,
        fit_evaluations,
    })
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn base_report(resolved: &Resolved, stage: &HessianStage, elapsed: f64) -> ReportJson {
    ReportJson {
        timestamp: timestamp(),
        mode: resolved.mode.name().to_string(),
        model: resolved.model.name().to_string(),
        method: resolved.method.name().to_string(),
        seed: resolved.seed,
        theta_hat: output::vector_to_vec(&stage.theta_hat),
        hessian: MatrixJson::from_matrix(&stage.hessian.hessian),
        covariance: MatrixJson::from_matrix(&stage.covariance.covariance),
        theta_tilde: None,
        v_tilde: None,
        batches: None,
        metrics: stage.metrics.clone(),
        evaluations: stage.fit_evaluations
            + stage.hessian.evaluations
            + stage.covariance.polish_evaluations,
        time_seconds: elapsed,
    }
}

fn write_matrices(resolved: &Resolved, stage: &HessianStage) -> Result<(), CliError> {
    let dir = &resolved.out_dir;
    output::write_json(dir, "hessian.json", &MatrixJson::from_matrix(&stage.hessian.hessian))?;
    output::write_json(
        dir,
        "covariance.json",
        &MatrixJson::from_matrix(&stage.covariance.covariance),
    )
}

fn run_hessian(model: &ModelInstance, resolved: &Resolved) -> Result<(), CliError> {
    let start = Instant::now();
    let stage = run_hessian_stage(model, resolved, resolved.method)?;
    let report = base_report(resolved, &stage, start.elapsed().as_secs_f64());
    write_matrices(resolved, &stage)?;
    output::write_json(&resolved.out_dir, "report.json", &report)
}

fn run_posterior(model: &ModelInstance, resolved: &Resolved) -> Result<(), CliError> {
    let start = Instant::now();
    let stage = run_hessian_stage(model, resolved, resolved.method)?;
    let result = adaptive_posterior(
        model.objective(),
        &stage.theta_hat,
        &stage.hessian.hessian,
        &stage.covariance.covariance,
        &resolved.posterior,
        &[],
    )?;
    let rate = result.rejection_rate();
    if rate > 0.01 {
        eprintln!(
            "warning: {:.2}% of proposal points were rejected (non-finite objective); \
             the posterior estimates may be biased toward the interior",
            100.0 * rate
        );
    }
    let posterior_json = PosteriorJson::from_result(&result);
    let mut report = base_report(resolved, &stage, 0.0);
    report.theta_tilde = Some(posterior_json.theta_tilde.clone());
    report.v_tilde = Some(posterior_json.v_tilde.clone());
    report.batches = Some(posterior_json.batches.clone());
    report.evaluations += result.total_evaluations;
    report.time_seconds = start.elapsed().as_secs_f64();
    write_matrices(resolved, &stage)?;
    output::write_json(&resolved.out_dir, "posterior.json", &posterior_json)?;
    output::write_json(&resolved.out_dir, "report.json", &report)
}

fn run_benchmark(model: &ModelInstance, resolved: &Resolved) -> Result<(), CliError> {
    let methods = [
        MethodChoice::Standard,
        MethodChoice::Polish,
        MethodChoice::Quick,
    ];
    let mut rows = Vec::with_capacity(methods.len());
    for method in methods {
        let start = Instant::now();
        let stage = run_hessian_stage(model, resolved, method)?;
        let elapsed = start.elapsed().as_secs_f64();
        let report = ComparisonReport {
            method: method.name().to_string(),
            frobenius_hessian: stage.metrics.f,
            frobenius_corr: stage.metrics.corr_f,
            g_pct: stage.metrics.g,
            time_seconds: elapsed,
            evaluations: stage.hessian.evaluations + stage.covariance.polish_evaluations,
        };
        rows.push(BenchmarkRow::from_report(&report));
    }
    output::write_benchmark_csv(&resolved.out_dir, &rows)?;
    output::write_json(&resolved.out_dir, "benchmark.json", &rows)
}

pub fn run(mode: Mode, overrides: &Overrides) -> Result<(), CliError> {
    let resolved = config::resolve(mode, overrides)?;
    if let Some(threads) = resolved.threads {
        if threads == 0 {
            return Err(CliError::Config("threads must be positive".into()));
        }
        // Ignore the error from double initialization: in-process callers
        // (tests) may have installed a pool already.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let model = data::load_model(&resolved)?;
    // Only now create the output directory, so a run that fails to load
    // leaves nothing behind.
    std::fs::create_dir_all(&resolved.out_dir).map_err(|e| {
        CliError::Config(format!(
            "cannot create output directory {}: {e}",
            resolved.out_dir.display()
        ))
    })?;
    match resolved.mode {
        Mode::Hessian => run_hessian(&model, &resolved),
        Mode::Posterior => run_posterior(&model, &resolved),
        Mode::Benchmark => run_benchmark(&model, &resolved),
    }
}
