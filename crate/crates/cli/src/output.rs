//! Serializable artifacts: matrices, run reports, posterior summaries,
//! and benchmark rows. Every type round-trips through its file format.

use std::path::Path;

use covkit_core::metrics::ComparisonReport;
use covkit_core::posterior::{BatchResult, PosteriorResult};
use covkit_core::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::pipeline::CliError;

/// Dense matrix as a flat row-major array with its side length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub n: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut data = Vec::with_capacity(n * n);
        for row in 0..n {
            for col in 0..n {
                data.push(m[(row, col)]);
            }
        }
        MatrixJson { n, data }
    }

    #[cfg(test)]
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsJson {
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "corr_F")]
    pub corr_f: f64,
    #[serde(rename = "G")]
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchJson {
    pub nu: u32,
    pub n_sims: usize,
    pub trace: f64,
    pub trace_error: f64,
    pub control_coefficient: f64,
    pub rejections: usize,
    pub evaluations: usize,
}

impl BatchJson {
    pub fn from_batch(batch: &BatchResult) -> Self {
        BatchJson {
            nu: batch.nu,
            n_sims: batch.n_sims,
            trace: batch.trace,
            trace_error: batch.trace_error,
            control_coefficient: batch.control_coefficient,
            rejections: batch.rejections,
            evaluations: batch.evaluations,
        }
    }
}

/// posterior.json: pooled posterior moments with per-batch history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorJson {
    pub theta_tilde: Vec<f64>,
    pub theta_tilde_se: Vec<f64>,
    pub v_tilde: MatrixJson,
    pub v_tilde_se: MatrixJson,
    pub trace_se: f64,
    pub nu_trajectory: Vec<u32>,
    pub batches: Vec<BatchJson>,
    pub evaluations: usize,
    pub rejection_rate: f64,
}

impl PosteriorJson {
    pub fn from_result(result: &PosteriorResult) -> Self {
        PosteriorJson {
            theta_tilde: result.theta_tilde.iter().copied().collect(),
            theta_tilde_se: result.pooled_errors.delta_mean.iter().copied().collect(),
            v_tilde: MatrixJson::from_matrix(&result.v_tilde),
            v_tilde_se: MatrixJson::from_matrix(&result.pooled_errors.v_tilde),
            trace_se: result.pooled_errors.trace,
            nu_trajectory: result.nu_trajectory(),
            batches: result.batches.iter().map(BatchJson::from_batch).collect(),
            evaluations: result.total_evaluations,
            rejection_rate: result.rejection_rate(),
        }
    }
}

/// report.json: the run summary. The timestamp is the only field that
/// changes between identical runs and sits alone on its own line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub timestamp: String,
    pub mode: String,
    pub model: String,
    pub method: String,
    pub seed: u64,
    pub theta_hat: Vec<f64>,
    pub hessian: MatrixJson,
    pub covariance: MatrixJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_tilde: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_tilde: Option<MatrixJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batches: Option<Vec<BatchJson>>,
    pub metrics: MetricsJson,
    pub evaluations: usize,
    pub time_seconds: f64,
}

/// One benchmark CSV row; mirrors the comparison report from the library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: String,
    pub frobenius_hessian: f64,
    pub frobenius_corr: f64,
    pub g_pct: f64,
    pub time_seconds: f64,
    pub evaluations: usize,
}

impl BenchmarkRow {
    pub fn from_report(report: &ComparisonReport) -> Self {
        BenchmarkRow {
            method: report.method.clone(),
            frobenius_hessian: report.frobenius_hessian,
            frobenius_corr: report.frobenius_corr,
            g_pct: report.g_pct,
            time_seconds: report.time_seconds,
            evaluations: report.evaluations,
        }
    }

    #[cfg(test)]
    pub fn to_report(&self) -> ComparisonReport {
        ComparisonReport {
            method: self.method.clone(),
            frobenius_hessian: self.frobenius_hessian,
            frobenius_corr: self.frobenius_corr,
            g_pct: self.g_pct,
            time_seconds: self.time_seconds,
            evaluations: self.evaluations,
        }
    }
}

pub fn vector_to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("cannot serialize {name}: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn write_benchmark_csv(dir: &Path, rows: &[BenchmarkRow]) -> Result<(), CliError> {
    let path = dir.join("benchmark.csv");
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| CliError::Config(format!("cannot serialize benchmark row: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Config(format!("cannot flush benchmark csv: {e}")))?;
    std::fs::write(&path, bytes)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}
