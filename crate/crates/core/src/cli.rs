//! Command-line front end: `fit`, `path`, `predict`, `df` and `simulate`.
//!
//! Settings come from an optional JSON file (`--config`) overridden by flags. Every
//! output carries `schema_version` and the resolved configuration, and is written to a
//! temporary file first and renamed into place.
//!
//! Exit codes: 0 on success, 1 on input errors, 2 when a fit did not converge (the
//! result is still written).

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coef::CoefficientMatrix;
use crate::design::{build_design_with, read_csv, standardize, CsvColumns, CsvData, DesignOptions, DesignTensor, Standardizer};
use crate::dof::{df_generic, df_l2, df_linf, DfEstimate, DEFAULT_LINF_Q};
use crate::error::{Error, Result};
use crate::glm::{admm_fit_logistic_cached, fit_path_logistic_outcomes, sigmoid, Family, DEFAULT_INNER_ITERS};
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::postfit::{relax_refit, RefitResult};
use crate::simulate::{run_scenario, MethodConfig, Scenario};
use crate::solver::{
    admm_fit_cached, fit_path_outcomes, lambda_grid, lambda_max, AdmmOptions, FactorCache, FitResult,
};

pub const SCHEMA_VERSION: &str = "1";

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "HEREDITY_THREADS";

const DEFAULT_ALPHA: f64 = 0.5;
const DEFAULT_GRID: &str = "10x50";
const DEFAULT_LAMBDA_RATIO: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "heredity", version, about = "Interaction models with strong-heredity penalties")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one penalty setting and write the fit as JSON.
    Fit(RunArgs),
    /// Fit a grid of (alpha, lambda) values with warm starts.
    Path(RunArgs),
    /// Predict from a saved fit on new covariates; writes CSV.
    Predict(RunArgs),
    /// Degrees-of-freedom estimate of a saved fit.
    Df(RunArgs),
    /// Run a synthetic experiment; writes a summary CSV and per-replicate JSON.
    Simulate(RunArgs),
}

/// Flags shared by all subcommands; each uses the ones it needs.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON file with any of the settings below (snake_case keys).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Response column name.
    #[arg(long)]
    pub response: Option<String>,
    /// Comma-separated covariate columns of the first block (default: all others).
    #[arg(long, value_delimiter = ',')]
    pub x_columns: Option<Vec<String>>,
    /// Comma-separated columns of the second block; omitted means X = Z.
    #[arg(long, value_delimiter = ',')]
    pub z_columns: Option<Vec<String>>,
    /// Penalty kind: l2, linf, hybrid, l1 or none.
    #[arg(long)]
    pub penalty: Option<PenaltyKind>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// A number, or `max` for the smallest lambda giving the intercept-only model.
    #[arg(long)]
    pub lambda: Option<LambdaArg>,
    /// Interaction penalty; with it, `--lambda` is used directly for rows and columns.
    #[arg(long)]
    pub lambda3: Option<f64>,
    /// gaussian or binomial.
    #[arg(long)]
    pub family: Option<Family>,
    /// `<n_alpha>x<n_lambda>`, for example `10x50`.
    #[arg(long)]
    pub grid: Option<GridArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (or directory for `simulate`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Refit the selected support without penalty.
    #[arg(long)]
    pub relax: bool,
    /// Exponent approximating the l_inf norm in df estimates.
    #[arg(long)]
    pub df_q: Option<u32>,
    /// Saved fit (for `predict` and `df`).
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// Drop squared terms when X = Z.
    #[arg(long)]
    pub zero_diagonal: bool,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Primal and dual stopping tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
}

/// `lambda` as given by the user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaArg {
    Max,
    Value(f64),
}

impl FromStr for LambdaArg {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("max") {
            return Ok(LambdaArg::Max);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidInput(format!("lambda must be a number or 'max', got '{s}'")))?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {v}")));
        }
        Ok(LambdaArg::Value(v))
    }
}

impl fmt::Display for LambdaArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaArg::Max => f.write_str("max"),
            LambdaArg::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for LambdaArg {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LambdaArg::Max => s.serialize_str("max"),
            LambdaArg::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for LambdaArg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => LambdaArg::from_str(&v.to_string()),
            Raw::Text(s) => LambdaArg::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Size of an `(alpha, lambda)` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridArg {
    pub n_alpha: usize,
    pub n_lambda: usize,
}

impl GridArg {
    /// Midpoints of `n_alpha` equal bins of (0,1): `0.05, 0.15, ..., 0.95` for ten.
    pub fn alphas(&self) -> Vec<f64> {
        (0..self.n_alpha)
            .map(|i| (i as f64 + 0.5) / self.n_alpha as f64)
            .collect()
    }
}

impl FromStr for GridArg {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("grid must look like '10x50', got '{s}'"));
        let (a, l) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let n_alpha: usize = a.trim().parse().map_err(|_| bad())?;
        let n_lambda: usize = l.trim().parse().map_err(|_| bad())?;
        if n_alpha == 0 || n_lambda == 0 {
            return Err(bad());
        }
        Ok(Self { n_alpha, n_lambda })
    }
}

impl fmt::Display for GridArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n_alpha, self.n_lambda)
    }
}

impl Serialize for GridArg {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GridArg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        GridArg::from_str(&s).map_err(serde::de::Error::custom)
    }
}

/// Resolved settings of one invocation; also the schema of `--config` files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_columns: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_columns: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<PenaltyKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Explicit mixing values for `path`; overrides the grid's alpha count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub relax: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df_q: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<PathBuf>,
    #[serde(default)]
    pub zero_diagonal: bool,
    #[serde(default)]
    pub admm: AdmmOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodConfig>,
}

impl RunConfig {
    /// Reads `--config` (when given) and applies the flags on top.
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let mut cfg: RunConfig = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str(&text)?
            }
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = &args.$field {
                    cfg.$field = Some(v.clone());
                }
            )*};
        }
        take!(data, response, x_columns, z_columns, penalty, alpha, lambda, lambda3, family, grid, seed, out, df_q, fit);
        cfg.relax |= args.relax;
        cfg.zero_diagonal |= args.zero_diagonal;
        if let Some(m) = args.max_iter {
            cfg.admm.max_iter = m;
        }
        if let Some(t) = args.tol {
            cfg.admm.eps_pri = Some(t);
            cfg.admm.eps_dual = Some(t);
        }
        if let Some(r) = args.replicates {
            cfg.scenario
                .as_mut()
                .ok_or_else(|| Error::InvalidInput("--replicates needs a scenario in --config".into()))?
                .replicates = r;
        }
        cfg.admm.validate()?;
        Ok(cfg)
    }

    fn require<'a, T>(&self, v: &'a Option<T>, name: &str) -> Result<&'a T> {
        v.as_ref().ok_or_else(|| Error::InvalidInput(format!("missing required setting '{name}'")))
    }

    fn family(&self) -> Family {
        self.family.unwrap_or_default()
    }

    fn kind(&self) -> PenaltyKind {
        self.penalty.unwrap_or(PenaltyKind::GroupL2)
    }

    fn out(&self) -> Result<&PathBuf> {
        self.require(&self.out, "out")
    }

    fn design_options(&self) -> DesignOptions {
        DesignOptions {
            zero_diagonal: self.zero_diagonal,
        }
    }

    fn inner_iters(&self) -> usize {
        self.inner_iters.unwrap_or(DEFAULT_INNER_ITERS)
    }
}

/// Training data after standardization.
struct Prepared {
    csv: CsvData,
    standardizer: Standardizer,
    design: DesignTensor,
    y: DVector<f64>,
    response: String,
}

fn load_training(cfg: &RunConfig) -> Result<Prepared> {
    let path = cfg.require(&cfg.data, "data")?;
    let response = cfg.require(&cfg.response, "response")?.clone();
    let csv = read_csv(
        path,
        &CsvColumns {
            response: Some(response.clone()),
            x: cfg.x_columns.clone(),
            z: cfg.z_columns.clone(),
        },
    )?;
    let (std_data, standardizer) = standardize(&csv.dataset)?;
    let design = build_design_with(&std_data, cfg.design_options());
    let y = csv.dataset.y.clone();
    Ok(Prepared {
        csv,
        standardizer,
        design,
        y,
        response,
    })
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Covariate names and layout recorded with each fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnInfo {
    pub response: String,
    pub x_columns: Vec<String>,
    pub z_columns: Vec<String>,
    /// `true` when both blocks are the same covariates.
    pub symmetric: bool,
    pub zero_diagonal: bool,
}

/// Output of `fit`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOutput {
    pub schema_version: String,
    pub command: String,
    pub config: RunConfig,
    pub family: Family,
    pub columns: ColumnInfo,
    pub standardizer: Standardizer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    /// Coefficients on the standardized scale.
    pub fit: FitResult,
    /// `fit.b_hat` expressed on the raw covariates.
    pub coefficients_original_scale: CoefficientMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxed: Option<RefitResult>,
}

/// One grid point of `path`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathPoint {
    pub alpha: f64,
    pub lambda: f64,
    pub fit: FitResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxed: Option<RefitResult>,
}

/// Output of `path`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathOutput {
    pub schema_version: String,
    pub command: String,
    pub config: RunConfig,
    pub family: Family,
    pub columns: ColumnInfo,
    pub standardizer: Standardizer,
    /// `(alpha, lambda_max)` per mixing value.
    pub lambda_max: Vec<(f64, f64)>,
    pub points: Vec<PathPoint>,
}

/// Output of `df`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfOutput {
    pub schema_version: String,
    pub command: String,
    pub config: RunConfig,
    pub penalty: PenaltyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
    pub estimate: DfEstimate,
}

/// What a command produced, for the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::NotConverged => 2,
        }
    }
}

fn column_info(cfg: &RunConfig, prep: &Prepared) -> ColumnInfo {
    ColumnInfo {
        response: prep.response.clone(),
        x_columns: prep.csv.x_names.clone(),
        z_columns: prep.csv.z_names.clone(),
        symmetric: prep.csv.dataset.symmetric,
        zero_diagonal: cfg.zero_diagonal && prep.csv.dataset.symmetric,
    }
}

fn fit_one(cfg: &RunConfig, prep: &Prepared, cache: &FactorCache, spec: &PenaltySpec) -> Result<FitResult> {
    match cfg.family() {
        Family::Gaussian => admm_fit_cached(&prep.design, cache, &prep.y, spec, &cfg.admm, None),
        Family::Binomial => {
            admm_fit_logistic_cached(&prep.design, cache, &prep.y, spec, &cfg.admm, cfg.inner_iters(), None)
        }
    }
}

/// Builds the `PenaltySpec` for `fit`: `(alpha, lambda)` unless `lambda3` is given, in which case
/// rows and columns both get `lambda`.
fn fit_spec(cfg: &RunConfig, prep: &Prepared) -> Result<(PenaltySpec, Option<f64>)> {
    let kind = cfg.kind();
    let lambda = *cfg.require(&cfg.lambda, "lambda")?;
    if let Some(l3) = cfg.lambda3 {
        if cfg.alpha.is_some() {
            return Err(Error::InvalidInput("give either alpha or lambda3, not both".into()));
        }
        let l = match lambda {
            LambdaArg::Value(v) => v,
            LambdaArg::Max => {
                return Err(Error::InvalidInput("lambda 'max' needs the alpha form, not lambda3".into()))
            }
        };
        return Ok((PenaltySpec::new(kind, l, l, l3)?, None));
    }
    let alpha = cfg.alpha.unwrap_or(DEFAULT_ALPHA);
    let (p1, p2) = (prep.design.p1(), prep.design.p2());
    let (lam, lmax) = match lambda {
        LambdaArg::Value(v) => (v, None),
        LambdaArg::Max => {
            let m = lambda_max(&prep.design, &prep.y, kind, alpha)?;
            (m, Some(m))
        }
    };
    Ok((PenaltySpec::reparametrized(kind, alpha, lam, p1, p2)?, lmax))
}

fn relax(cfg: &RunConfig, prep: &Prepared, fit: &FitResult) -> Result<Option<RefitResult>> {
    if cfg.relax {
        relax_refit(&prep.design, &prep.y, &fit.support, cfg.family()).map(Some)
    } else {
        Ok(None)
    }
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<Status> {
    let out = cfg.out()?;
    let prep = load_training(cfg)?;
    let (spec, lmax) = fit_spec(cfg, &prep)?;
    let cache = FactorCache::new(&prep.design)?;
    let fit = fit_one(cfg, &prep, &cache, &spec)?;
    let relaxed = relax(cfg, &prep, &fit)?;
    let status = if fit.converged { Status::Ok } else { Status::NotConverged };
    let output = FitOutput {
        schema_version: SCHEMA_VERSION.into(),
        command: "fit".into(),
        config: cfg.clone(),
        family: cfg.family(),
        columns: column_info(cfg, &prep),
        coefficients_original_scale: prep.standardizer.to_original_scale(&fit.b_hat)?,
        standardizer: prep.standardizer.clone(),
        lambda_max: lmax,
        fit,
        relaxed,
    };
    write_json(out, &output)?;
    Ok(status)
}

pub fn cmd_path(cfg: &RunConfig) -> Result<Status> {
    let out = cfg.out()?;
    let prep = load_training(cfg)?;
    let kind = cfg.kind();
    let grid_arg = match cfg.grid {
        Some(g) => g,
        None => GridArg::from_str(DEFAULT_GRID)?,
    };
    let alphas = match (&cfg.alphas, cfg.alpha) {
        (Some(a), _) => a.clone(),
        (None, Some(a)) => vec![a],
        (None, None) => grid_arg.alphas(),
    };
    let ratio = cfg.lambda_ratio.unwrap_or(DEFAULT_LAMBDA_RATIO);
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidInput(format!("lambda_ratio must lie in (0,1), got {ratio}")));
    }
    let (p1, p2) = (prep.design.p1(), prep.design.p2());
    let mut lmaxes = Vec::with_capacity(alphas.len());
    let mut grid = Vec::new();
    for &alpha in &alphas {
        let lmax = lambda_max(&prep.design, &prep.y, kind, alpha)?;
        lmaxes.push((alpha, lmax));
        for lam in lambda_grid(lmax, grid_arg.n_lambda, ratio) {
            grid.push(PenaltySpec::reparametrized(kind, alpha, lam, p1, p2)?);
        }
    }
    let cache = FactorCache::new(&prep.design)?;
    let fits = match cfg.family() {
        Family::Gaussian => fit_path_outcomes(&prep.design, &cache, &prep.y, &grid, &cfg.admm)?,
        Family::Binomial => {
            fit_path_logistic_outcomes(&prep.design, &cache, &prep.y, &grid, &cfg.admm, cfg.inner_iters())?
        }
    };
    let status = if fits.iter().all(|f| f.converged) { Status::Ok } else { Status::NotConverged };
    let points = grid
        .iter()
        .zip(fits)
        .map(|(spec, fit)| {
            let (alpha, lambda) = spec.alpha_lambda.expect("grid specs are reparametrized");
            Ok(PathPoint {
                alpha,
                lambda,
                relaxed: relax(cfg, &prep, &fit)?,
                fit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let output = PathOutput {
        schema_version: SCHEMA_VERSION.into(),
        command: "path".into(),
        config: cfg.clone(),
        family: cfg.family(),
        columns: column_info(cfg, &prep),
        standardizer: prep.standardizer.clone(),
        lambda_max: lmaxes,
        points,
    };
    write_json(out, &output)?;
    Ok(status)
}

fn load_fit(cfg: &RunConfig) -> Result<FitOutput> {
    let path = cfg.require(&cfg.fit, "fit")?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read fit {}: {e}", path.display())))?;
    let fit: FitOutput = serde_json::from_str(&text)?;
    if fit.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidInput(format!(
            "fit has schema version {}, expected {SCHEMA_VERSION}",
            fit.schema_version
        )));
    }
    Ok(fit)
}

/// Covariates of `--data` in the saved fit's column layout and scale.
fn design_for(cfg: &RunConfig, saved: &FitOutput) -> Result<DesignTensor> {
    let path = cfg.require(&cfg.data, "data")?;
    let cols = &saved.columns;
    let csv = read_csv(
        path,
        &CsvColumns {
            response: None,
            x: Some(cols.x_columns.clone()),
            z: if cols.symmetric { None } else { Some(cols.z_columns.clone()) },
        },
    )?;
    let data = saved.standardizer.apply(&csv.dataset)?;
    Ok(build_design_with(
        &data,
        DesignOptions {
            zero_diagonal: cols.zero_diagonal,
        },
    ))
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<Status> {
    let out = cfg.out()?;
    let saved = load_fit(cfg)?;
    let design = design_for(cfg, &saved)?;
    let b = match (&saved.relaxed, cfg.relax) {
        (Some(r), true) => &r.b,
        (None, true) => return Err(Error::InvalidInput("the saved fit has no relaxed coefficients".into())),
        _ => &saved.fit.b_hat,
    };
    let eta = crate::design::predict(&design, b)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    match saved.family {
        Family::Gaussian => {
            w.write_record(["prediction"])?;
            for v in eta.iter() {
                w.write_record([v.to_string()])?;
            }
        }
        Family::Binomial => {
            w.write_record(["link", "probability"])?;
            for v in eta.iter() {
                w.write_record([v.to_string(), sigmoid(*v).to_string()])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(out, &bytes)?;
    Ok(Status::Ok)
}

pub fn cmd_df(cfg: &RunConfig) -> Result<Status> {
    let out = cfg.out()?;
    let saved = load_fit(cfg)?;
    let design = design_for(cfg, &saved)?;
    let spec = saved.fit.spec;
    let b = &saved.fit.b_hat;
    if spec.row_kind != spec.col_kind {
        return Err(Error::InvalidInput("df needs the same penalty on rows and columns".into()));
    }
    let q = cfg.df_q.unwrap_or(DEFAULT_LINF_Q);
    let (estimate, q_used) = match spec.row_kind {
        PenaltyKind::GroupL2 => (df_l2(&design, b, spec.lambda1, spec.lambda2)?, None),
        PenaltyKind::Linf => (df_linf(&design, b, spec.lambda1, spec.lambda2, q)?, Some(q)),
        PenaltyKind::L1 | PenaltyKind::None => (df_generic(&design, b, &[])?, None),
        PenaltyKind::HybridL1Linf => {
            return Err(Error::InvalidInput("df is not available for the hybrid penalty".into()))
        }
    };
    write_json(
        out,
        &DfOutput {
            schema_version: SCHEMA_VERSION.into(),
            command: "df".into(),
            config: cfg.clone(),
            penalty: spec.row_kind,
            q: q_used,
            estimate,
        },
    )?;
    Ok(Status::Ok)
}

/// Per-replicate output of `simulate`, with the resolved configuration.
#[derive(Debug, Clone, Serialize)]
struct SimulateOutput<'a> {
    schema_version: &'a str,
    command: &'a str,
    config: &'a RunConfig,
    report: &'a crate::simulate::ScenarioReport,
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Status> {
    let dir = cfg.out()?;
    let mut scenario = cfg.require(&cfg.scenario, "scenario")?.clone();
    let mut method = cfg.method.clone().unwrap_or_default();
    if let Some(seed) = cfg.seed {
        scenario.seed = seed;
    }
    if let Some(family) = cfg.family {
        scenario.family = family;
    }
    if let Some(kind) = cfg.penalty {
        method.kind = kind;
    }
    if let Some(g) = cfg.grid {
        method.alphas = g.alphas();
        method.n_lambda = g.n_lambda;
    }
    if let Some(r) = cfg.lambda_ratio {
        method.lambda_ratio = r;
    }
    let mut resolved = cfg.clone();
    resolved.scenario = Some(scenario.clone());
    resolved.method = Some(method.clone());

    let report = run_scenario(&scenario, &method)?;
    std::fs::create_dir_all(dir)?;
    let mut table = Vec::new();
    report.write_table_csv(&mut table)?;
    write_atomic(&dir.join("table.csv"), &table)?;
    write_json(
        &dir.join("replicates.json"),
        &SimulateOutput {
            schema_version: SCHEMA_VERSION,
            command: "simulate",
            config: &resolved,
            report: &report,
        },
    )?;
    Ok(Status::Ok)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn execute(command: &Command) -> Result<Status> {
    configure_threads()?;
    let (args, run): (&RunArgs, fn(&RunConfig) -> Result<Status>) = match command {
        Command::Fit(a) => (a, cmd_fit),
        Command::Path(a) => (a, cmd_path),
        Command::Predict(a) => (a, cmd_predict),
        Command::Df(a) => (a, cmd_df),
        Command::Simulate(a) => (a, cmd_simulate),
    };
    run(&RunConfig::resolve(args)?)
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(Status::NotConverged) => {
            eprintln!("heredity: warning: at least one fit did not converge; results were written");
            Status::NotConverged.code()
        }
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("heredity: error: {e}");
            1
        }
    }
}
