//! Dataset loading (CSV) and synthetic generation, producing one of the
//! built-in models ready for the pipeline.

use std::path::Path;

use covkit_core::models::{
    random_spd_pair, BasketballModel, Game, NormalModel, PoModel, QuadraticModel, PO_COVARIATES,
};
use covkit_core::objective::ObjectiveFunction;
use covkit_core::sampler::RngStream;
use covkit_core::{DMatrix, DVector};

use crate::config::{ModelKind, Resolved, SynthSpec};
use crate::pipeline::CliError;

/// A loaded model instance; one variant per built-in likelihood.
pub enum ModelInstance {
    Po(PoModel),
    Basketball(BasketballModel),
    Normal(NormalModel),
    Quadratic(QuadraticModel),
}

impl ModelInstance {
    pub fn objective(&self) -> &dyn ObjectiveFunction {
        match self {
            ModelInstance::Po(m) => m,
            ModelInstance::Basketball(m) => m,
            ModelInstance::Normal(m) => m,
            ModelInstance::Quadratic(m) => m,
        }
    }

    pub fn analytic_hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        match self {
            ModelInstance::Po(m) => m.analytic_hessian(theta),
            ModelInstance::Basketball(m) => m.analytic_hessian(theta),
            ModelInstance::Normal(m) => m.analytic_hessian(theta),
            ModelInstance::Quadratic(m) => m.analytic_hessian(),
        }
    }

    /// Starting point for the quasi-Newton fit.
    pub fn fit_start(&self) -> DVector<f64> {
        match self {
            ModelInstance::Po(m) => DVector::zeros(m.dim()),
            ModelInstance::Basketball(m) => m.default_start(),
            ModelInstance::Normal(m) => m.mle(),
            ModelInstance::Quadratic(m) => DVector::zeros(m.dim()),
        }
    }
}

fn data_err(path: &Path, detail: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {detail}", path.display()))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data_err(path, e))
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    row: usize,
    name: &str,
    raw: &str,
) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| {
        data_err(path, format!("row {}: bad {name} value {raw:?}: {e}", row + 2))
    })
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

/// PO ordinal-outcome CSV: 13 covariate columns plus a `group` column
/// holding labels 1..3; the covariates are taken in file order.
pub fn load_po(path: &Path) -> Result<PoModel, CliError> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| data_err(path, e))?.clone();
    let group_col = column_index(&headers, "group")
        .ok_or_else(|| data_err(path, "missing required column `group`"))?;
    let covariate_cols: Vec<usize> = (0..headers.len()).filter(|&i| i != group_col).collect();
    if covariate_cols.len() != PO_COVARIATES {
        return Err(data_err(
            path,
            format!(
                "expected {PO_COVARIATES} covariate columns plus `group`, found {}",
                covariate_cols.len()
            ),
        ));
    }
    let mut rows: Vec<f64> = Vec::new();
    let mut groups: Vec<u8> = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| data_err(path, e))?;
        for (k, &col) in covariate_cols.iter().enumerate() {
            let raw = record
                .get(col)
                .ok_or_else(|| data_err(path, format!("row {}: short record", row + 2)))?;
            rows.push(parse_field(path, row, &format!("covariate {}", k + 1), raw)?);
        }
        let raw = record
            .get(group_col)
            .ok_or_else(|| data_err(path, format!("row {}: short record", row + 2)))?;
        groups.push(parse_field(path, row, "group", raw)?);
    }
    if groups.is_empty() {
        return Err(data_err(path, "no data rows"));
    }
    let covariates = DMatrix::from_row_slice(groups.len(), PO_COVARIATES, &rows);
    PoModel::new(covariates, groups).map_err(|e| data_err(path, e))
}

/// Basketball results CSV with columns team1, team2, score1, score2, home;
/// team identifiers are 0-based and the league size is the largest id + 1.
pub fn load_basketball(path: &Path) -> Result<BasketballModel, CliError> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| data_err(path, e))?.clone();
    let col = |name: &str| -> Result<usize, CliError> {
        column_index(&headers, name)
            .ok_or_else(|| data_err(path, format!("missing required column `{name}`")))
    };
    let (c1, c2, cs1, cs2, ch) = (
        col("team1")?,
        col("team2")?,
        col("score1")?,
        col("score2")?,
        col("home")?,
    );
    let mut games = Vec::new();
    let mut max_team = 0usize;
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| data_err(path, e))?;
        let field = |c: usize| {
            record
                .get(c)
                .ok_or_else(|| data_err(path, format!("row {}: short record", row + 2)))
        };
        let team1: usize = parse_field(path, row, "team1", field(c1)?)?;
        let team2: usize = parse_field(path, row, "team2", field(c2)?)?;
        let score1: f64 = parse_field(path, row, "score1", field(cs1)?)?;
        let score2: f64 = parse_field(path, row, "score2", field(cs2)?)?;
        let home = match field(ch)? {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(data_err(
                    path,
                    format!("row {}: bad home value {other:?} (use 0/1)", row + 2),
                ))
            }
        };
        max_team = max_team.max(team1).max(team2);
        games.push(Game {
            team1,
            team2,
            score1,
            score2,
            home,
        });
    }
    if games.is_empty() {
        return Err(data_err(path, "no data rows"));
    }
    BasketballModel::new(games, max_team + 1).map_err(|e| data_err(path, e))
}

/// Plain sample CSV with a single `x` column.
pub fn load_normal(path: &Path) -> Result<NormalModel, CliError> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| data_err(path, e))?.clone();
    let x_col = column_index(&headers, "x")
        .ok_or_else(|| data_err(path, "missing required column `x`"))?;
    let mut data = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| data_err(path, e))?;
        let raw = record
            .get(x_col)
            .ok_or_else(|| data_err(path, format!("row {}: short record", row + 2)))?;
        data.push(parse_field(path, row, "x", raw)?);
    }
    NormalModel::new(&data).map_err(|e| data_err(path, e))
}

fn synth_theta(spec: &SynthSpec, expected: usize, default: DVector<f64>) -> Result<DVector<f64>, CliError> {
    match &spec.true_theta {
        None => Ok(default),
        Some(values) if values.len() == expected => Ok(DVector::from_vec(values.clone())),
        Some(values) => Err(CliError::Config(format!(
            "synth true_theta needs {expected} entries, got {}",
            values.len()
        ))),
    }
}

fn synthesize(kind: ModelKind, spec: &SynthSpec) -> Result<ModelInstance, CliError> {
    if spec.n == 0 {
        return Err(CliError::Config("synth n must be positive".into()));
    }
    let mut rng = RngStream::new(spec.seed, 0);
    match kind {
        ModelKind::Po => {
            let default = PoModel::default_true_theta();
            let truth = synth_theta(spec, default.len(), default.clone())?;
            Ok(ModelInstance::Po(PoModel::synthesize(&truth, spec.n, &mut rng)))
        }
        ModelKind::Basketball => {
            let teams = spec.teams.unwrap_or(40);
            if teams < 2 {
                return Err(CliError::Config("basketball synth needs at least 2 teams".into()));
            }
            let (model, _truth) = BasketballModel::synthesize(teams, spec.n, &mut rng);
            Ok(ModelInstance::Basketball(model))
        }
        ModelKind::Normal => {
            let truth = synth_theta(spec, 2, DVector::zeros(2))?;
            let data = NormalModel::synthesize(truth[0], truth[1].exp(), spec.n, &mut rng);
            Ok(ModelInstance::Normal(
                NormalModel::new(&data).map_err(CliError::Numerical)?,
            ))
        }
        ModelKind::Quadratic => {
            let (a, _inv) = random_spd_pair(spec.n, &mut rng);
            Ok(ModelInstance::Quadratic(
                QuadraticModel::new(a, DVector::zeros(spec.n), 0.0)
                    .map_err(CliError::Numerical)?,
            ))
        }
    }
}

pub fn load_model(resolved: &Resolved) -> Result<ModelInstance, CliError> {
    if let Some(path) = &resolved.data_path {
        match resolved.model {
            ModelKind::Po => Ok(ModelInstance::Po(load_po(path)?)),
            ModelKind::Basketball => Ok(ModelInstance::Basketball(load_basketball(path)?)),
            ModelKind::Normal => Ok(ModelInstance::Normal(load_normal(path)?)),
            ModelKind::Quadratic => unreachable!("rejected at config validation"),
        }
    } else {
        let spec = resolved.synth.as_ref().expect("config validation");
        synthesize(resolved.model, spec)
    }
}
