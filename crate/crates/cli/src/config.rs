//! Run configuration: a JSON file plus command-line overrides, with the
//! command line winning wherever both speak.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use covkit_core::hessian::HessianMethod;
use covkit_core::posterior::{PosteriorOptions, WeightConvention};
use serde::Deserialize;

use crate::pipeline::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Hessian,
    Posterior,
    Benchmark,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Hessian => "hessian",
            Mode::Posterior => "posterior",
            Mode::Benchmark => "benchmark",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Po,
    Basketball,
    Normal,
    Quadratic,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Po => "po",
            ModelKind::Basketball => "basketball",
            ModelKind::Normal => "normal",
            ModelKind::Quadratic => "quadratic",
        }
    }
}

/// Differentiation method plus whether eigenvalues get polished.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Standard,
    Polish,
    Quick,
}

impl MethodChoice {
    pub fn name(self) -> &'static str {
        match self {
            MethodChoice::Standard => "standard",
            MethodChoice::Polish => "standard+polish",
            MethodChoice::Quick => "quick",
        }
    }

    pub fn parts(self) -> (HessianMethod, bool) {
        match self {
            MethodChoice::Standard => (HessianMethod::Standard, false),
            MethodChoice::Polish => (HessianMethod::Standard, true),
            MethodChoice::Quick => (HessianMethod::Quick, false),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionChoice {
    Consistent,
    CovarianceMatched,
}

impl From<ConventionChoice> for WeightConvention {
    fn from(choice: ConventionChoice) -> Self {
        match choice {
            ConventionChoice::Consistent => WeightConvention::Consistent,
            ConventionChoice::CovarianceMatched => WeightConvention::CovarianceMatched,
        }
    }
}

/// Synthetic-data request: size and seed, with optional generating
/// parameters (model defaults used when absent).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    /// Rows for po/normal, games for basketball, dimension for quadratic.
    pub n: usize,
    pub seed: u64,
    pub true_theta: Option<Vec<f64>>,
    /// Basketball only: league size (default 40).
    pub teams: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorConfig {
    pub nu0: Option<u32>,
    pub batches: Option<usize>,
    pub batch_size: Option<usize>,
    pub convention: Option<ConventionChoice>,
    pub control_variate: Option<bool>,
}

/// The on-disk configuration file. `mode` is optional because the
/// subcommand already names it; when both are present the subcommand wins.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<String>,
    pub model: ModelKind,
    pub data_path: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
    pub theta_hat: Option<Vec<f64>>,
    pub method: Option<MethodChoice>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub posterior: PosteriorConfig,
}

/// Command-line overrides shared by all three subcommands.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON run configuration file
    #[arg(long)]
    pub config: PathBuf,
    /// RNG seed for the run (overrides the config file)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Differentiation method
    #[arg(long, value_enum)]
    pub method: Option<MethodChoice>,
    /// Starting degrees of freedom for the posterior stage
    #[arg(long)]
    pub nu0: Option<u32>,
    /// Number of posterior batches
    #[arg(long)]
    pub batches: Option<usize>,
    /// Antithetic pairs per batch
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    /// Importance-weight divisor convention
    #[arg(long, value_enum)]
    pub convention: Option<ConventionChoice>,
    /// Cap on worker threads (results do not depend on this)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory (overrides the config file; default "out")
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything the pipeline needs, with defaults and overrides applied.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub mode: Mode,
    pub model: ModelKind,
    pub data_path: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
    pub theta_hat: Option<Vec<f64>>,
    pub method: MethodChoice,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub posterior: PosteriorOptions,
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("cannot parse config {}: {e}", path.display())))
}

pub fn resolve(mode: Mode, overrides: &Overrides) -> Result<Resolved, CliError> {
    let config = load_config(&overrides.config)?;
    if let Some(named) = &config.mode {
        let known = ["hessian", "posterior", "benchmark"];
        if !known.contains(&named.as_str()) {
            return Err(CliError::Config(format!(
                "unknown mode {named:?}; expected one of {known:?}"
            )));
        }
    }
    match (&config.data_path, &config.synth) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "config must set exactly one of data_path and synth, found both".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Config(
                "config must set exactly one of data_path and synth, found neither".into(),
            ))
        }
        _ => {}
    }
    if config.model == ModelKind::Quadratic && config.data_path.is_some() {
        return Err(CliError::Config(
            "the quadratic model has no dataset; use synth".into(),
        ));
    }

    let seed = overrides.seed.or(config.seed).unwrap_or(0);
    let defaults = PosteriorOptions::default();
    let posterior = PosteriorOptions {
        nu0: overrides.nu0.or(config.posterior.nu0).unwrap_or(defaults.nu0),
        n_batches: overrides
            .batches
            .or(config.posterior.batches)
            .unwrap_or(defaults.n_batches),
        batch_size: overrides
            .batch_size
            .or(config.posterior.batch_size)
            .unwrap_or(defaults.batch_size),
        convention: overrides
            .convention
            .or(config.posterior.convention)
            .map(WeightConvention::from)
            .unwrap_or(defaults.convention),
        control_variate: config
            .posterior
            .control_variate
            .unwrap_or(defaults.control_variate),
        seed,
    };
    Ok(Resolved {
        mode,
        model: config.model,
        data_path: config.data_path,
        synth: config.synth,
        theta_hat: config.theta_hat,
        method: overrides
            .method
            .or(config.method)
            .unwrap_or(MethodChoice::Standard),
        seed,
        threads: overrides.threads.or(config.threads),
        out_dir: overrides
            .out
            .clone()
            .or(config.out_dir)
            .unwrap_or_else(|| PathBuf::from("out")),
        posterior,
    })
}
