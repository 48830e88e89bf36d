//! Acceptance suite: eleven end-to-end checks covering exactness on
//! quadratics, accuracy/cost orderings on the built-in models, statistical
//! calibration of the posterior stage, the adaptive schedule, sampler
//! moments, scaling behavior, and byte-level determinism of the binary.
//!
//! Each test prints exactly one `criterion N (...): PASS|FAIL` line
//! (visible with `--nocapture`) and then asserts. Timed criteria share a
//! mutex so wall-clock limits are measured without cross-test load.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use covkit_core::hessian::{assemble_hessian, HessianMethod};
use covkit_core::metrics::stderr_pct_error;
use covkit_core::models::{
    fit_mle, random_spd_pair, BasketballModel, NormalModel, PoModel, QuadraticModel, PO_PARAMS,
};
use covkit_core::objective::{CountingObjective, ObjectiveFunction};
use covkit_core::posterior::{
    adaptive_posterior, normal_sample_check, run_batch, BatchSettings, NuSchedule,
    PosteriorOptions, WeightConvention,
};
use covkit_core::sampler::{cholesky, mvt_draw, RngStream};
use covkit_core::spectral::{covariance_from_hessian, invert_spectral};
use covkit_core::{DMatrix, DVector};

// Pinned tolerances and limits, one place for the whole suite.
const QUAD_EXACTNESS_TOL: f64 = 1e-9; // scaled by 1 + max |entry|
const QUAD_TIME_LIMIT_S: f64 = 5.0;
const PO_G_STANDARD_MAX_PCT: f64 = 1e-4;
const PO_QUICK_G_FACTOR: f64 = 10.0;
const PO_EVAL_RATIO: (f64, f64) = (0.55, 0.70);
const PO_TIME_LIMIT_S: f64 = 30.0;
const BASKETBALL_G_STANDARD_MAX_PCT: f64 = 1e-3;
const BASKETBALL_TIME_LIMIT_S: f64 = 60.0;
const ANTITHETIC_TOL: f64 = 1e-12;
const CONTROL_MIN_WINS: usize = 18;
const CONTROL_SEEDS: u64 = 20;
const POOLED_SE_FACTOR: f64 = 3.0;
const ORACLE_SE_LIMIT_FRACTION: f64 = 0.005; // pooled SE <= 0.5% of estimate
const ORACLE_TIME_LIMIT_S: f64 = 120.0;
const MVT_MOMENT_TOL_FRACTION: f64 = 0.02; // of the trace scale
const SCALING_SLOPE: (f64, f64) = (-1.35, -0.65);
const SCALING_TIME_LIMIT_S: f64 = 120.0;

/// Serializes the timed criteria so their wall-clock limits are honest.
static TIMED: Mutex<()> = Mutex::new(());

fn conclude(number: u32, name: &str, failures: Vec<String>) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("criterion {number} ({name}): {status}");
    assert!(
        failures.is_empty(),
        "criterion {number} ({name}) failed:\n  {}",
        failures.join("\n  ")
    );
}

fn check(failures: &mut Vec<String>, ok: bool, detail: impl FnOnce() -> String) {
    if !ok {
        failures.push(detail());
    }
}

/// The shared 2x2 Gaussian test objective: f = theta' V^-1 theta / 2 with
/// V = [[1.5, 0.4], [0.4, 0.8]], so the posterior is exactly N(0, V).
fn gaussian_fixture() -> (QuadraticModel, DMatrix<f64>, DMatrix<f64>) {
    let v = DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8]);
    let h = DMatrix::from_row_slice(2, 2, &[0.8, -0.4, -0.4, 1.5]).map(|x| x / 1.04);
    let model = QuadraticModel::new(h.clone(), DVector::zeros(2), 0.0).unwrap();
    (model, h, v)
}

#[test]
fn criterion_01_quadratic_exactness() {
    let _guard = TIMED.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut failures = Vec::new();
    for n in [2usize, 5, 10, 20] {
        let mut rng = RngStream::new(100 + n as u64, 0);
        let (a, a_inv) = random_spd_pair(n, &mut rng);
        let model = QuadraticModel::new(a.clone(), DVector::zeros(n), 0.0).unwrap();
        let theta = DVector::zeros(n);

        let hessian = assemble_hessian(&model, &theta, HessianMethod::Standard).unwrap();
        let h_tol = QUAD_EXACTNESS_TOL * (1.0 + a.amax());
        let h_dev = (&hessian.hessian - &a).amax();
        check(&mut failures, h_dev <= h_tol, || {
            format!("n={n}: hessian deviates {h_dev:.3e} > {h_tol:.3e}")
        });

        let (_, cov) =
            covariance_from_hessian(&model, &theta, HessianMethod::Standard, false).unwrap();
        let v_tol = QUAD_EXACTNESS_TOL * (1.0 + a_inv.amax());
        let v_dev = (&cov.covariance - &a_inv).amax();
        check(&mut failures, v_dev <= v_tol, || {
            format!("n={n}: covariance deviates {v_dev:.3e} > {v_tol:.3e}")
        });
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(&mut failures, elapsed < QUAD_TIME_LIMIT_S, || {
        format!("took {elapsed:.1} s, limit {QUAD_TIME_LIMIT_S} s")
    });
    conclude(1, "quadratic exactness", failures);
}

/// Runs the three differentiation methods against the analytic oracle and
/// returns (G percent, differentiation evaluations) per method, in the
/// order standard, standard+polish, quick.
fn method_comparison(
    objective: &dyn ObjectiveFunction,
    theta_hat: &DVector<f64>,
    h_oracle: &DMatrix<f64>,
) -> Vec<(f64, usize)> {
    let v_oracle = invert_spectral(objective, theta_hat, h_oracle, false)
        .unwrap()
        .covariance;
    [
        (HessianMethod::Standard, false),
        (HessianMethod::Standard, true),
        (HessianMethod::Quick, false),
    ]
    .into_iter()
    .map(|(method, polish)| {
        let (hessian, cov) = covariance_from_hessian(objective, theta_hat, method, polish).unwrap();
        let g = stderr_pct_error(&v_oracle, &cov.covariance).unwrap();
        (g, hessian.evaluations + cov.polish_evaluations)
    })
    .collect()
}

#[test]
fn criterion_02_po_accuracy_and_cost() {
    let _guard = TIMED.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut failures = Vec::new();

    let truth = PoModel::default_true_theta();
    let mut rng = RngStream::new(42, 0);
    let model = PoModel::synthesize(&truth, 768, &mut rng);
    let fit = fit_mle(&model, &DVector::zeros(PO_PARAMS)).unwrap();
    let h_oracle = model.analytic_hessian(&fit.theta);
    let results = method_comparison(&model, &fit.theta, &h_oracle);
    let (g_standard, evals_standard) = results[0];
    let (g_polish, _) = results[1];
    let (g_quick, evals_quick) = results[2];

    check(&mut failures, g_standard <= PO_G_STANDARD_MAX_PCT, || {
        format!("G(standard) = {g_standard:.3e}% > {PO_G_STANDARD_MAX_PCT:.1e}%")
    });
    check(&mut failures, g_polish <= g_standard, || {
        format!("G(polish) = {g_polish:.3e}% > G(standard) = {g_standard:.3e}%")
    });
    check(
        &mut failures,
        g_quick >= PO_QUICK_G_FACTOR * g_standard,
        || format!("G(quick) = {g_quick:.3e}% < {PO_QUICK_G_FACTOR} x G(standard)"),
    );
    let ratio = evals_quick as f64 / evals_standard as f64;
    check(
        &mut failures,
        ratio >= PO_EVAL_RATIO.0 && ratio <= PO_EVAL_RATIO.1,
        || {
            format!(
                "evaluation ratio {evals_quick}/{evals_standard} = {ratio:.3} outside {PO_EVAL_RATIO:?}"
            )
        },
    );
    let elapsed = start.elapsed().as_secs_f64();
    check(&mut failures, elapsed < PO_TIME_LIMIT_S, || {
        format!("took {elapsed:.1} s, limit {PO_TIME_LIMIT_S} s")
    });
    conclude(2, "ordinal model accuracy/cost", failures);
}

#[test]
fn criterion_03_basketball_accuracy_and_cost() {
    let _guard = TIMED.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut failures = Vec::new();

    let mut rng = RngStream::new(7, 0);
    let (model, _truth) = BasketballModel::synthesize(40, 400, &mut rng);
    let fit = fit_mle(&model, &model.default_start()).unwrap();
    let h_oracle = model.analytic_hessian(&fit.theta);
    let results = method_comparison(&model, &fit.theta, &h_oracle);
    let (g_standard, _) = results[0];
    let (g_polish, _) = results[1];
    let (g_quick, _) = results[2];

    check(
        &mut failures,
        g_standard <= BASKETBALL_G_STANDARD_MAX_PCT,
        || format!("G(standard) = {g_standard:.3e}% > {BASKETBALL_G_STANDARD_MAX_PCT:.1e}%"),
    );
    check(&mut failures, g_polish <= g_standard, || {
        format!("G(polish) = {g_polish:.3e}% > G(standard) = {g_standard:.3e}%")
    });
    check(
        &mut failures,
        g_quick >= PO_QUICK_G_FACTOR * g_standard,
        || format!("G(quick) = {g_quick:.3e}% < {PO_QUICK_G_FACTOR} x G(standard)"),
    );
    let elapsed = start.elapsed().as_secs_f64();
    check(&mut failures, elapsed < BASKETBALL_TIME_LIMIT_S, || {
        format!("took {elapsed:.1} s, limit {BASKETBALL_TIME_LIMIT_S} s")
    });
    conclude(3, "basketball model accuracy/cost", failures);
}

#[test]
fn criterion_04_offdiagonal_evaluation_accounting() {
    let mut failures = Vec::new();
    for n in [5usize, 15] {
        let mut rng = RngStream::new(200 + n as u64, 0);
        let (a, _) = random_spd_pair(n, &mut rng);
        let model = QuadraticModel::new(a, DVector::zeros(n), 0.0).unwrap();
        let theta = DVector::zeros(n);
        for (method, per_element) in [(HessianMethod::Standard, 8), (HessianMethod::Quick, 4)] {
            let counted = CountingObjective::new(&model);
            let result = assemble_hessian(&counted, &theta, method).unwrap();
            let expected = per_element * n * (n - 1) / 2;
            let independent = counted.count() - result.diag_evaluations;
            check(&mut failures, independent == expected, || {
                format!("n={n} {method:?}: counted {independent} off-diagonal evals, expected {expected}")
            });
            check(
                &mut failures,
                result.offdiag_evaluations == expected,
                || {
                    format!(
                        "n={n} {method:?}: reported {} off-diagonal evals, expected {expected}",
                        result.offdiag_evaluations
                    )
                },
            );
        }
    }
    conclude(4, "off-diagonal evaluation accounting", failures);
}

#[test]
fn criterion_05_antithetic_exactness() {
    let mut failures = Vec::new();
    let (model, h, v) = gaussian_fixture();
    let theta_hat = DVector::zeros(2);
    let chol = cholesky(&v).unwrap();
    let sizes = [1usize, 7, 64, 300, 1000];
    for nu in [3u32, 6, 12] {
        for (idx, seed) in (11u64..16).enumerate() {
            let settings = BatchSettings {
                nu,
                n_sims: sizes[idx],
                convention: WeightConvention::Consistent,
                control_variate: true,
            };
            let mut rng = RngStream::new(seed, 0);
            let batch = run_batch(&model, &theta_hat, 0.0, &h, &chol, &settings, &[], &mut rng)
                .unwrap();
            let dev = batch.delta_mean.amax();
            check(&mut failures, dev <= ANTITHETIC_TOL, || {
                format!(
                    "nu={nu} seed={seed} n_sims={}: |delta_mean| = {dev:.3e}",
                    sizes[idx]
                )
            });
        }
    }
    conclude(5, "antithetic mean exactness", failures);
}

#[test]
fn criterion_06_control_variate_efficacy() {
    let _guard = TIMED.lock().unwrap_or_else(|e| e.into_inner());
    let mut failures = Vec::new();
    let (model, h, v) = gaussian_fixture();
    let theta_hat = DVector::zeros(2);
    let chol = cholesky(&v).unwrap();
    let base = BatchSettings {
        nu: 6,
        n_sims: 10_000,
        convention: WeightConvention::Consistent,
        control_variate: true,
    };

    let mut wins = 0usize;
    let mut controlled = Vec::new();
    for seed in 0..CONTROL_SEEDS {
        let mut rng = RngStream::new(seed, 0);
        let with = run_batch(&model, &theta_hat, 0.0, &h, &chol, &base, &[], &mut rng).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let off = BatchSettings {
            control_variate: false,
            ..base
        };
        let without = run_batch(&model, &theta_hat, 0.0, &h, &chol, &off, &[], &mut rng).unwrap();
        if with.trace_error <= without.trace_error {
            wins += 1;
        }
        controlled.push(with);
    }
    check(&mut failures, wins >= CONTROL_MIN_WINS, || {
        format!("control variate reduced the trace error in only {wins}/{CONTROL_SEEDS} seeds")
    });

    // Pool the controlled batches (independent streams) per element and
    // compare the combined estimate against the exact covariance.
    for j in 0..2 {
        for k in 0..2 {
            let mut num = 0.0;
            let mut inv_var = 0.0;
            for batch in &controlled {
                let var = batch.cov_variances[(j, k)];
                num += batch.v_tilde[(j, k)] / var;
                inv_var += 1.0 / var;
            }
            let pooled = num / inv_var;
            let se = (1.0 / inv_var).sqrt();
            let dev = (pooled - v[(j, k)]).abs();
            check(&mut failures, dev <= POOLED_SE_FACTOR * se, || {
                format!("element ({j},{k}): |pooled - exact| = {dev:.3e} > 3 x SE = {se:.3e}")
            });
        }
    }
    conclude(6, "control-variate efficacy", failures);
}

/// The frozen 10-observation sample used by criteria 7 and 11.
const NORMAL_SAMPLE: [f64; 10] = [1.2, -0.4, 0.7, 2.1, -1.3, 0.3, 0.9, -0.6, 1.8, 0.2];

/// Deterministic 2-D Simpson quadrature for the posterior mean of
/// sigma^2 = exp(2 t) under the flat prior in (mu, t): the independent
/// oracle for the sampled estimate.
fn sigma_sq_quadrature_oracle(model: &NormalModel) -> f64 {
    let theta_hat = model.mle();
    let f_hat = model.eval(&theta_hat);
    let m = model.len() as f64;
    let sigma_mu = ((2.0 * theta_hat[1]).exp() / m).sqrt();
    let sigma_t = (0.5 / m).sqrt();
    let half_width = 15.0;
    let points = 801usize; // odd, so Simpson's rule applies cleanly

    let axis = |center: f64, scale: f64| -> (Vec<f64>, Vec<f64>) {
        let lo = center - half_width * scale;
        let hi = center + half_width * scale;
        let h = (hi - lo) / (points - 1) as f64;
        let xs: Vec<f64> = (0..points).map(|i| lo + h * i as f64).collect();
        let ws: Vec<f64> = (0..points)
            .map(|i| {
                let w = if i == 0 || i == points - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * h / 3.0
            })
            .collect();
        (xs, ws)
    };
    let (mus, mu_w) = axis(theta_hat[0], sigma_mu);
    let (ts, t_w) = axis(theta_hat[1], sigma_t);

    let mut numerator = 0.0;
    let mut denominator = 0.0;
    let mut point = DVector::zeros(2);
    for (mu, wm) in mus.iter().zip(&mu_w) {
        for (t, wt) in ts.iter().zip(&t_w) {
            point[0] = *mu;
            point[1] = *t;
            let density = (-(model.eval(&point) - f_hat)).exp();
            let weight = wm * wt * density;
            numerator += weight * (2.0 * t).exp();
            denominator += weight;
        }
    }
    numerator / denominator
}

#[test]
fn criterion_07_posterior_oracle_on_normal_sample() {
    let _guard = TIMED.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut failures = Vec::new();

    let model = NormalModel::new(&NORMAL_SAMPLE).unwrap();
    let oracle = sigma_sq_quadrature_oracle(&model);

    // 10 batches x 10^4 pairs = 1e5 simulations, 2e5 objective calls
    let options = PosteriorOptions {
        nu0: 4,
        n_batches: 10,
        batch_size: 10_000,
        convention: WeightConvention::Consistent,
        control_variate: true,
        seed: 2024,
    };
    let estimate = normal_sample_check(&NORMAL_SAMPLE, &options).unwrap();
    let dev = (estimate.value - oracle).abs();
    check(
        &mut failures,
        dev <= POOLED_SE_FACTOR * estimate.standard_error,
        || {
            format!(
                "|sampled {:.6} - quadrature {oracle:.6}| = {dev:.2e} > 3 x SE = {:.2e}",
                estimate.value,
                POOLED_SE_FACTOR * estimate.standard_error
            )
        },
    );
    check(
        &mut failures,
        estimate.standard_error <= ORACLE_SE_LIMIT_FRACTION * estimate.value,
        || {
            format!(
                "pooled SE {:.3e} exceeds {:.2}% of the estimate {:.6}",
                estimate.standard_error,
                100.0 * ORACLE_SE_LIMIT_FRACTION,
                estimate.value
            )
        },
    );
    let elapsed = start.elapsed().as_secs_f64();
    check(&mut failures, elapsed < ORACLE_TIME_LIMIT_S, || {
        format!("took {elapsed:.1} s, limit {ORACLE_TIME_LIMIT_S} s")
    });
    conclude(7, "posterior quadrature oracle", failures);
}

#[test]
fn criterion_08_adaptive_schedule() {
    let mut failures = Vec::new();

    // falling errors: nu keeps stepping by sqrt(2), rounded
    let mut schedule = NuSchedule::new(4);
    let mut trajectory = vec![schedule.current()];
    for error in [1.0, 0.9, 0.8, 0.7] {
        schedule.record(error);
        trajectory.push(schedule.current());
    }
    check(&mut failures, trajectory == vec![4, 6, 8, 11, 16], || {
        format!("monotone trajectory {trajectory:?}, expected [4, 6, 8, 11, 16]")
    });

    // rigged rise: revert to the previous nu and freeze there
    let mut schedule = NuSchedule::new(4);
    let mut trajectory = Vec::new();
    for error in [1.0, 0.9, 0.8, 0.85, 0.1] {
        trajectory.push(schedule.current());
        schedule.record(error);
    }
    trajectory.push(schedule.current());
    check(
        &mut failures,
        trajectory == vec![4, 6, 8, 11, 8, 8] && schedule.is_frozen(),
        || format!("rigged trajectory {trajectory:?}, expected [4, 6, 8, 11, 8, 8] frozen"),
    );
    conclude(8, "adaptive degrees-of-freedom schedule", failures);
}

#[test]
fn criterion_09_sampler_moments() {
    let _guard = TIMED.lock().unwrap_or_else(|e| e.into_inner());
    let mut failures = Vec::new();
    let n = 5usize;
    let nu = 6u32;
    let draws = 1_000_000usize;
    let mut rng = RngStream::new(900, 0);
    let (v, _) = random_spd_pair(n, &mut rng);
    let chol = cholesky(&v).unwrap();

    let mut second_moment = DMatrix::zeros(n, n);
    for _ in 0..draws {
        let sample = mvt_draw(&chol, nu, &mut rng);
        for j in 0..n {
            for k in j..n {
                second_moment[(j, k)] += sample.y[j] * sample.y[k];
            }
        }
    }
    second_moment /= draws as f64;
    let target = &v * (f64::from(nu) / (f64::from(nu) - 2.0));
    let scale = target.trace() / n as f64;
    for j in 0..n {
        for k in j..n {
            let dev = (second_moment[(j, k)] - target[(j, k)]).abs();
            check(
                &mut failures,
                dev <= MVT_MOMENT_TOL_FRACTION * scale,
                || {
                    format!(
                        "element ({j},{k}): |{:.4} - {:.4}| = {dev:.4} > {:.4}",
                        second_moment[(j, k)],
                        target[(j, k)],
                        MVT_MOMENT_TOL_FRACTION * scale
                    )
                },
            );
        }
    }
    conclude(9, "multivariate t sample moments", failures);
}

#[test]
fn criterion_10_posterior_shift_scales_inversely_with_sample_size() {
    let _guard = TIMED.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut failures = Vec::new();

    let sizes = [100usize, 400, 1600];
    let mut log_points = Vec::new();
    for (idx, &m) in sizes.iter().enumerate() {
        let mut rng = RngStream::new(500 + idx as u64, 0);
        let data = NormalModel::synthesize(0.0, 1.0, m, &mut rng);
        let model = NormalModel::new(&data).unwrap();
        let theta_hat = model.mle();
        let (hessian, cov) =
            covariance_from_hessian(&model, &theta_hat, HessianMethod::Standard, false).unwrap();
        let options = PosteriorOptions {
            nu0: 4,
            n_batches: 4,
            batch_size: 25_000,
            convention: WeightConvention::Consistent,
            control_variate: true,
            seed: 600 + idx as u64,
        };
        let result = adaptive_posterior(
            &model,
            &theta_hat,
            &hessian.hessian,
            &cov.covariance,
            &options,
            &[],
        )
        .unwrap();
        let shift = (&result.theta_tilde - &theta_hat).norm();
        log_points.push(((m as f64).ln(), shift.ln()));
    }

    // least-squares slope through the three log-log points
    let n = log_points.len() as f64;
    let mean_x = log_points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = log_points.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = log_points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum::<f64>()
        / log_points
            .iter()
            .map(|p| (p.0 - mean_x) * (p.0 - mean_x))
            .sum::<f64>();
    check(
        &mut failures,
        slope >= SCALING_SLOPE.0 && slope <= SCALING_SLOPE.1,
        || format!("log-log slope {slope:.3} outside [{}, {}]", SCALING_SLOPE.0, SCALING_SLOPE.1),
    );
    let elapsed = start.elapsed().as_secs_f64();
    check(&mut failures, elapsed < SCALING_TIME_LIMIT_S, || {
        format!("took {elapsed:.1} s, limit {SCALING_TIME_LIMIT_S} s")
    });
    conclude(10, "posterior shift scaling", failures);
}

// ---- criterion 11: byte-level determinism of the binary across threads ----

fn covkit(args: &[&str]) {
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_covkit"))
        .args(args)
        .output()
        .expect("spawn covkit");
    assert!(
        output.status.success(),
        "covkit {args:?}: {}\n{}",
        output.status,
        String::from_utf8_lossy(&output.stderr)
    );
}

/// File content with wall-clock lines (timestamp, time_seconds) removed.
fn stable_json_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.contains("\"timestamp\"") && !l.contains("\"time_seconds\""))
        .map(str::to_string)
        .collect()
}

/// CSV rows with the time_seconds column removed.
fn stable_csv(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let keep: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| *h != "time_seconds")
        .map(|(i, _)| i)
        .collect();
    rdr.records()
        .map(|record| {
            let record = record.unwrap();
            keep.iter().map(|&i| record[i].to_string()).collect()
        })
        .collect()
}

fn write_file(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn criterion_11_thread_count_determinism() {
    let _guard = TIMED.lock().unwrap_or_else(|e| e.into_inner());
    let mut failures = Vec::new();
    let dir = tempfile::tempdir().unwrap();

    // the criterion-2 workload: ordinal-model benchmark
    let po_config = |out: &Path| {
        format!(
            r#"{{"model": "po", "synth": {{"n": 768, "seed": 42}}, "out_dir": {:?}}}"#,
            out.to_str().unwrap()
        )
    };
    // the criterion-7 workload: posterior run on the frozen sample
    let sample = {
        let mut text = String::from("x\n");
        for x in NORMAL_SAMPLE {
            text.push_str(&format!("{x}\n"));
        }
        write_file(dir.path(), "sample.csv", &text)
    };
    let normal_config = |out: &Path| {
        format!(
            r#"{{"model": "normal", "data_path": {:?}, "out_dir": {:?}, "seed": 2024,
                "posterior": {{"nu0": 4, "batches": 10, "batch_size": 10000}}}}"#,
            sample.to_str().unwrap(),
            out.to_str().unwrap()
        )
    };

    let mut po_outs = Vec::new();
    let mut normal_outs = Vec::new();
    for threads in ["1", "8"] {
        let po_out = dir.path().join(format!("po-{threads}"));
        let config = write_file(
            dir.path(),
            &format!("po-{threads}.json"),
            &po_config(&po_out),
        );
        covkit(&[
            "benchmark",
            "--config",
            config.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        po_outs.push(po_out);

        let normal_out = dir.path().join(format!("normal-{threads}"));
        let config = write_file(
            dir.path(),
            &format!("normal-{threads}.json"),
            &normal_config(&normal_out),
        );
        covkit(&[
            "posterior",
            "--config",
            config.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        normal_outs.push(normal_out);
    }

    check(
        &mut failures,
        stable_csv(&po_outs[0].join("benchmark.csv")) == stable_csv(&po_outs[1].join("benchmark.csv")),
        || "benchmark.csv differs between --threads 1 and --threads 8".to_string(),
    );
    check(
        &mut failures,
        stable_json_lines(&po_outs[0].join("benchmark.json"))
            == stable_json_lines(&po_outs[1].join("benchmark.json")),
        || "benchmark.json differs between --threads 1 and --threads 8".to_string(),
    );
    for name in ["posterior.json", "hessian.json", "covariance.json"] {
        check(
            &mut failures,
            std::fs::read(normal_outs[0].join(name)).unwrap()
                == std::fs::read(normal_outs[1].join(name)).unwrap(),
            || format!("{name} differs between --threads 1 and --threads 8"),
        );
    }
    check(
        &mut failures,
        stable_json_lines(&normal_outs[0].join("report.json"))
            == stable_json_lines(&normal_outs[1].join("report.json")),
        || "report.json differs between --threads 1 and --threads 8".to_string(),
    );
    conclude(11, "thread-count determinism", failures);
}
