//! Synthetic experiments: hereditary truths, Gaussian covariates, calibrated noise,
//! and the train/test/validation protocol with relaxed and unrelaxed selection.
//!
//! Randomness comes from ChaCha8 seeded with the scenario seed. The truth uses stream 0;
//! replicate `r` uses streams `1 + 8r + purpose` (see [`Purpose`]) so replicates are
//! reproducible independently of execution order.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coef::CoefficientMatrix;
use crate::design::{build_design_with, predict, standardize, Dataset, DesignOptions, DesignTensor};
use crate::error::{Error, Result};
use crate::glm::{fit_path_logistic_outcomes, sigmoid, Family, DEFAULT_INNER_ITERS};
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::postfit::{confusion, count_interactions, eval_loss, oracle_fit, relax_refit};
use crate::solver::{alpha_grid, fit_path_outcomes, lambda_grid, lambda_max, AdmmOptions, FactorCache, Support};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Covariance {
    Identity,
    /// `Sigma[i,j] = phi^|i-j|`.
    Ar { phi: f64 },
    /// `Sigma[i,j] = rho` off the diagonal.
    Exchangeable { rho: f64 },
}

impl Covariance {
    pub fn matrix(&self, p: usize) -> DMatrix<f64> {
        match *self {
            Covariance::Identity => DMatrix::identity(p, p),
            Covariance::Ar { phi } => DMatrix::from_fn(p, p, |i, j| phi.powi(i.abs_diff(j) as i32)),
            Covariance::Exchangeable { rho } => DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho }),
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        let ok = match *self {
            Covariance::Identity => true,
            Covariance::Ar { phi } => phi.abs() < 1.0,
            Covariance::Exchangeable { rho } => rho < 1.0 && rho > -1.0 / (p.max(2) - 1) as f64,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("covariance {self:?} is not positive definite")))
        }
    }
}

fn default_main_values() -> Vec<f64> {
    (-5..=5).filter(|v| *v != 0).map(f64::from).collect()
}

fn default_inter_values() -> Vec<f64> {
    (-5..=5).filter(|v| *v != 0).map(|v| f64::from(2 * v)).collect()
}

fn default_n_true_main() -> usize {
    10
}

fn default_snr() -> f64 {
    3.0
}

fn default_covariance() -> Covariance {
    Covariance::Identity
}

fn default_replicates() -> usize {
    1
}

fn default_zero_diagonal() -> bool {
    true
}

/// A simulation setting with `X = Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n_train: usize,
    pub n_test: usize,
    pub n_valid: usize,
    pub p: usize,
    #[serde(default = "default_n_true_main")]
    pub n_true_main: usize,
    pub n_true_inter: usize,
    #[serde(default = "default_main_values")]
    pub main_values: Vec<f64>,
    #[serde(default = "default_inter_values")]
    pub inter_values: Vec<f64>,
    /// Target ratio of signal variance to noise variance (Gaussian family).
    #[serde(default = "default_snr")]
    pub snr: f64,
    #[serde(default = "default_covariance")]
    pub covariance: Covariance,
    #[serde(default)]
    pub family: Family,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Leave squared terms out of the design and the candidate interactions.
    #[serde(default = "default_zero_diagonal")]
    pub zero_diagonal: bool,
    pub seed: u64,
}

impl Scenario {
    /// The squared-error setting with `p = 30`, ten active mains and 300 observations per split.
    pub fn standard(n_true_inter: usize, seed: u64) -> Self {
        Self {
            n_train: 300,
            n_test: 300,
            n_valid: 300,
            p: 30,
            n_true_main: default_n_true_main(),
            n_true_inter,
            main_values: default_main_values(),
            inter_values: default_inter_values(),
            snr: default_snr(),
            covariance: Covariance::Identity,
            family: Family::Gaussian,
            replicates: 1,
            zero_diagonal: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n_train < 2 || self.n_test == 0 || self.n_valid == 0 {
            return Err(Error::InvalidInput("scenario needs p >= 1, n_train >= 2 and nonempty splits".into()));
        }
        if self.n_true_main > self.p {
            return Err(Error::InvalidInput(format!(
                "n_true_main {} exceeds p {}",
                self.n_true_main, self.p
            )));
        }
        let available = self.n_true_main * self.n_true_main.saturating_sub(1) / 2;
        if self.n_true_inter > available {
            return Err(Error::InfeasibleScenario {
                requested: self.n_true_inter,
                available,
            });
        }
        if self.main_values.is_empty() || self.inter_values.is_empty() {
            return Err(Error::InvalidInput("value sets must be nonempty".into()));
        }
        if self.main_values.iter().chain(&self.inter_values).any(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::InvalidInput("value sets must hold finite nonzero values".into()));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(Error::InvalidInput("snr must be positive".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidInput("replicates must be at least 1".into()));
        }
        self.covariance.validate(self.p)
    }
}

/// Independent random streams within one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    TrainCovariates = 0,
    TestCovariates = 1,
    ValidCovariates = 2,
    TrainNoise = 3,
    TestNoise = 4,
    ValidNoise = 5,
}

/// Generator for the truth (`replicate = None`) or one replicate's purpose.
pub fn stream(seed: u64, replicate: Option<usize>, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = match replicate {
        None => 0,
        Some(r) => 1 + 8 * r as u64 + purpose as u64,
    };
    rng.set_stream(id);
    rng
}

/// Hereditary truth: the first `n_true_main` mains in `B[j,0]`, interactions in the upper
/// triangle `B[j,k]`, `j < k`, among active mains.
pub fn gen_coefficients(scenario: &Scenario) -> Result<CoefficientMatrix> {
    scenario.validate()?;
    let mut rng = stream(scenario.seed, None, Purpose::TrainCovariates);
    gen_coefficients_with(scenario, &mut rng)
}

pub fn gen_coefficients_with(scenario: &Scenario, rng: &mut impl Rng) -> Result<CoefficientMatrix> {
    let p = scenario.p;
    let m = scenario.n_true_main;
    let pairs: Vec<(usize, usize)> = (1..=m).flat_map(|j| (j + 1..=m).map(move |k| (j, k))).collect();
    if scenario.n_true_inter > pairs.len() {
        return Err(Error::InfeasibleScenario {
            requested: scenario.n_true_inter,
            available: pairs.len(),
        });
    }
    let mut b = CoefficientMatrix::zeros(p, p);
    for j in 1..=m {
        b[(j, 0)] = scenario.main_values[rng.random_range(0..scenario.main_values.len())];
    }
    let mut chosen = sample(rng, pairs.len(), scenario.n_true_inter).into_vec();
    chosen.sort_unstable();
    for idx in chosen {
        b[pairs[idx]] = scenario.inter_values[rng.random_range(0..scenario.inter_values.len())];
    }
    Ok(b)
}

/// `n` rows drawn i.i.d. from `N_p(0, Sigma)`.
pub fn gen_gaussian_data(covariance: &Covariance, n: usize, p: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    covariance.validate(p)?;
    let z = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng));
    match covariance {
        Covariance::Identity => Ok(z),
        _ => {
            let chol = covariance
                .matrix(p)
                .cholesky()
                .ok_or_else(|| Error::InvalidInput("covariance is not positive definite".into()))?;
            Ok(z * chol.l().transpose())
        }
    }
}

/// Noise level giving `var(signal) / sigma^2 = snr`; `None` when the signal is constant.
pub fn noise_sigma(signal: &DVector<f64>, snr: f64) -> Option<f64> {
    let n = signal.len();
    if n < 2 {
        return None;
    }
    let mean = signal.mean();
    let var = signal.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var > 0.0 {
        Some((var / snr).sqrt())
    } else {
        None
    }
}

/// `y = W*B + sigma * N(0, I)`. Returns `(y, sigma, degenerate)`; a zero signal uses
/// `sigma = 1` and sets `degenerate`.
pub fn gen_response(
    design: &DesignTensor,
    b_true: &CoefficientMatrix,
    snr: f64,
    rng: &mut impl Rng,
) -> Result<(DVector<f64>, f64, bool)> {
    let signal = predict(design, b_true)?;
    let (sigma, degenerate) = match noise_sigma(&signal, snr) {
        Some(s) => (s, false),
        None => (1.0, true),
    };
    Ok((add_noise(&signal, sigma, rng), sigma, degenerate))
}

pub fn add_noise(signal: &DVector<f64>, sigma: f64, rng: &mut impl Rng) -> DVector<f64> {
    signal.map(|s| {
        let e: f64 = StandardNormal.sample(rng);
        s + sigma * e
    })
}

/// Bernoulli responses with success probability `logistic(W*B)`.
pub fn gen_logistic_response(design: &DesignTensor, b_true: &CoefficientMatrix, rng: &mut impl Rng) -> Result<DVector<f64>> {
    let eta = predict(design, b_true)?;
    Ok(eta.map(|e| if rng.random::<f64>() < sigmoid(e) { 1.0 } else { 0.0 }))
}

fn default_kind() -> PenaltyKind {
    PenaltyKind::GroupL2
}

fn default_n_lambda() -> usize {
    50
}

fn default_lambda_ratio() -> f64 {
    1e-3
}

/// How the method under study is fitted and tuned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    #[serde(default = "default_kind")]
    pub kind: PenaltyKind,
    /// Mixing values; defaults to `0.05, 0.15, ..., 0.95`.
    #[serde(default = "alpha_grid")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_n_lambda")]
    pub n_lambda: usize,
    /// Smallest lambda as a fraction of each mixing value's `lambda_max`.
    #[serde(default = "default_lambda_ratio")]
    pub lambda_ratio: f64,
    #[serde(default)]
    pub admm: AdmmOptions,
    /// Keep per-grid-point metrics in the replicate reports.
    #[serde(default)]
    pub keep_grid: bool,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            alphas: alpha_grid(),
            n_lambda: default_n_lambda(),
            lambda_ratio: default_lambda_ratio(),
            admm: AdmmOptions::default(),
            keep_grid: false,
        }
    }
}

impl MethodConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::InvalidInput("alphas must be nonempty and inside (0,1)".into()));
        }
        if self.n_lambda == 0 || !(self.lambda_ratio > 0.0 && self.lambda_ratio < 1.0) {
            return Err(Error::InvalidInput("n_lambda >= 1 and lambda_ratio in (0,1) required".into()));
        }
        self.admm.validate()
    }

    pub fn label(&self) -> String {
        format!("heredity.{}", self.kind.name())
    }
}

/// Scores of one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub lambda: f64,
    pub converged: bool,
    pub test_loss: f64,
    pub validation_loss: f64,
    pub relaxed_test_loss: f64,
    pub relaxed_validation_loss: f64,
    pub n_interactions: usize,
    pub fdr: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// The model picked by held-out loss on the test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub alpha: f64,
    pub lambda: f64,
    pub validation_loss: f64,
    /// Validation loss over the oracle model's validation loss.
    pub relative_loss: f64,
    pub fdr: f64,
    pub tpr: f64,
    pub n_interactions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub replicate: usize,
    pub sigma: Option<f64>,
    pub degenerate_signal: bool,
    pub realized_snr: Option<f64>,
    pub oracle_validation_loss: f64,
    pub true_validation_loss: f64,
    pub raw: Selection,
    pub relaxed: Selection,
    pub non_converged: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<GridPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub n_true_inter: usize,
    pub method: String,
    pub relaxed: bool,
    pub relative_loss: MeanSe,
    pub fdr: MeanSe,
    pub tpr: MeanSe,
    pub n_interactions: MeanSe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub schema_version: String,
    pub scenario: Scenario,
    pub method: MethodConfig,
    pub truth: CoefficientMatrix,
    pub replicates: Vec<ReplicateReport>,
    pub table: Vec<TableRow>,
}

impl ScenarioReport {
    pub fn write_table_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "n_true_inter",
            "method",
            "relaxed",
            "relative_ssr",
            "relative_ssr_se",
            "fdr",
            "fdr_se",
            "tpr",
            "tpr_se",
            "num_inter",
            "num_inter_se",
        ])?;
        for r in &self.table {
            w.write_record([
                r.n_true_inter.to_string(),
                r.method.clone(),
                if r.relaxed { "yes" } else { "no" }.to_string(),
                format!("{:.6}", r.relative_loss.mean),
                format!("{:.6}", r.relative_loss.se),
                format!("{:.6}", r.fdr.mean),
                format!("{:.6}", r.fdr.se),
                format!("{:.6}", r.tpr.mean),
                format!("{:.6}", r.tpr.se),
                format!("{:.6}", r.n_interactions.mean),
                format!("{:.6}", r.n_interactions.se),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The three standardized splits of one replicate, with the truth's signal.
pub struct ReplicateData {
    pub train: DesignTensor,
    pub test: DesignTensor,
    pub valid: DesignTensor,
    pub y_train: DVector<f64>,
    pub y_test: DVector<f64>,
    pub y_valid: DVector<f64>,
    /// Noise level (Gaussian family only).
    pub sigma: Option<f64>,
    pub degenerate_signal: bool,
    pub realized_snr: Option<f64>,
    /// Validation loss of the true coefficients on the raw covariates.
    pub true_validation_loss: f64,
}

/// Generates and standardizes (with training statistics) the splits of one replicate.
pub fn gen_replicate(scenario: &Scenario, truth: &CoefficientMatrix, replicate: usize) -> Result<ReplicateData> {
    let p = scenario.p;
    let opts = DesignOptions {
        zero_diagonal: scenario.zero_diagonal,
    };
    let rep = Some(replicate);
    let raw = |n: usize, purpose: Purpose| -> Result<Dataset> {
        let x = gen_gaussian_data(&scenario.covariance, n, p, &mut stream(scenario.seed, rep, purpose))?;
        Dataset::symmetric(x, DVector::zeros(n))
    };
    let train = raw(scenario.n_train, Purpose::TrainCovariates)?;
    let test = raw(scenario.n_test, Purpose::TestCovariates)?;
    let valid = raw(scenario.n_valid, Purpose::ValidCovariates)?;
    let w_train = build_design_with(&train, opts);
    let w_test = build_design_with(&test, opts);
    let w_valid = build_design_with(&valid, opts);

    let (y_train, y_test, y_valid, sigma, degenerate, realized) = match scenario.family {
        Family::Gaussian => {
            let signal = predict(&w_train, truth)?;
            let (sigma, degenerate) = match noise_sigma(&signal, scenario.snr) {
                Some(s) => (s, false),
                None => (1.0, true),
            };
            let noisy = |w: &DesignTensor, purpose: Purpose| -> Result<DVector<f64>> {
                Ok(add_noise(&predict(w, truth)?, sigma, &mut stream(scenario.seed, rep, purpose)))
            };
            let y_train = add_noise(&signal, sigma, &mut stream(scenario.seed, rep, Purpose::TrainNoise));
            let noise = &y_train - &signal;
            let realized = if degenerate {
                None
            } else {
                noise_sigma(&signal, 1.0).map(|sd| sd * sd / (noise.norm_squared() / (noise.len() - 1) as f64))
            };
            (
                y_train,
                noisy(&w_test, Purpose::TestNoise)?,
                noisy(&w_valid, Purpose::ValidNoise)?,
                Some(sigma),
                degenerate,
                realized,
            )
        }
        Family::Binomial => {
            let bern = |w: &DesignTensor, purpose: Purpose| {
                gen_logistic_response(w, truth, &mut stream(scenario.seed, rep, purpose))
            };
            (
                bern(&w_train, Purpose::TrainNoise)?,
                bern(&w_test, Purpose::TestNoise)?,
                bern(&w_valid, Purpose::ValidNoise)?,
                None,
                false,
                None,
            )
        }
    };
    let true_validation_loss = eval_loss(&w_valid, &y_valid, truth, scenario.family)?;

    let (train_std, st) = standardize(&train)?;
    let test_std = st.apply(&test)?;
    let valid_std = st.apply(&valid)?;
    Ok(ReplicateData {
        train: build_design_with(&train_std, opts),
        test: build_design_with(&test_std, opts),
        valid: build_design_with(&valid_std, opts),
        y_train,
        y_test,
        y_valid,
        sigma,
        degenerate_signal: degenerate,
        realized_snr: realized,
        true_validation_loss,
    })
}

/// `(alpha, lambda)` grid in alpha-major order, each alpha with its own `lambda_max`.
pub fn method_grid(design: &DesignTensor, y: &DVector<f64>, method: &MethodConfig) -> Result<Vec<PenaltySpec>> {
    let (p1, p2) = (design.p1(), design.p2());
    let mut grid = Vec::with_capacity(method.alphas.len() * method.n_lambda);
    for &alpha in &method.alphas {
        let lmax = lambda_max(design, y, method.kind, alpha)?;
        for lam in lambda_grid(lmax, method.n_lambda, method.lambda_ratio) {
            grid.push(PenaltySpec::reparametrized(method.kind, alpha, lam, p1, p2)?);
        }
    }
    Ok(grid)
}

fn select(points: &[GridPoint], relaxed: bool, oracle_loss: f64) -> Selection {
    let key = |g: &GridPoint| if relaxed { g.relaxed_test_loss } else { g.test_loss };
    let best = points
        .iter()
        .min_by(|a, b| key(a).total_cmp(&key(b)))
        .expect("grid is nonempty");
    let vloss = if relaxed { best.relaxed_validation_loss } else { best.validation_loss };
    Selection {
        alpha: best.alpha,
        lambda: best.lambda,
        validation_loss: vloss,
        relative_loss: vloss / oracle_loss,
        fdr: best.fdr,
        tpr: best.tpr,
        n_interactions: best.n_interactions,
    }
}

/// Runs the full protocol on one replicate.
pub fn run_replicate(
    scenario: &Scenario,
    method: &MethodConfig,
    truth: &CoefficientMatrix,
    replicate: usize,
) -> Result<ReplicateReport> {
    let data = gen_replicate(scenario, truth, replicate)?;
    let family = scenario.family;
    let cache = FactorCache::new(&data.train)?;
    let grid = method_grid(&data.train, &data.y_train, method)?;
    let fits = match family {
        Family::Gaussian => fit_path_outcomes(&data.train, &cache, &data.y_train, &grid, &method.admm)?,
        Family::Binomial => fit_path_logistic_outcomes(
            &data.train,
            &cache,
            &data.y_train,
            &grid,
            &method.admm,
            DEFAULT_INNER_ITERS,
        )?,
    };
    let oracle = oracle_fit(&data.train, &data.y_train, truth, family)?;
    let oracle_loss = eval_loss(&data.valid, &data.y_valid, &oracle.b, family)?;

    let mut refits: HashMap<Support, (f64, f64)> = HashMap::new();
    let mut points = Vec::with_capacity(fits.len());
    for (spec, fit) in grid.iter().zip(&fits) {
        let (alpha, lambda) = spec.alpha_lambda.expect("grid specs are reparametrized");
        let (relaxed_test, relaxed_valid) = match refits.get(&fit.support) {
            Some(v) => *v,
            None => {
                let refit = relax_refit(&data.train, &data.y_train, &fit.support, family)?;
                let v = (
                    eval_loss(&data.test, &data.y_test, &refit.b, family)?,
                    eval_loss(&data.valid, &data.y_valid, &refit.b, family)?,
                );
                refits.insert(fit.support.clone(), v);
                v
            }
        };
        let (tp, fp, pos, neg) = confusion(&data.train, &fit.b_hat, truth);
        points.push(GridPoint {
            alpha,
            lambda,
            converged: fit.converged,
            test_loss: eval_loss(&data.test, &data.y_test, &fit.b_hat, family)?,
            validation_loss: eval_loss(&data.valid, &data.y_valid, &fit.b_hat, family)?,
            relaxed_test_loss: relaxed_test,
            relaxed_validation_loss: relaxed_valid,
            n_interactions: count_interactions(&data.train, &fit.b_hat),
            fdr: fp as f64 / (fp + tp).max(1) as f64,
            tpr: tp as f64 / pos.max(1) as f64,
            fpr: fp as f64 / neg.max(1) as f64,
        });
    }
    Ok(ReplicateReport {
        replicate,
        sigma: data.sigma,
        degenerate_signal: data.degenerate_signal,
        realized_snr: data.realized_snr,
        oracle_validation_loss: oracle_loss,
        true_validation_loss: data.true_validation_loss,
        raw: select(&points, false, oracle_loss),
        relaxed: select(&points, true, oracle_loss),
        non_converged: fits.iter().filter(|f| !f.converged).count(),
        grid: if method.keep_grid { points } else { Vec::new() },
    })
}

fn table_row(scenario: &Scenario, method: &MethodConfig, reps: &[ReplicateReport], relaxed: bool) -> TableRow {
    let pick = |r: &ReplicateReport| if relaxed { r.relaxed } else { r.raw };
    let col = |f: &dyn Fn(&Selection) -> f64| MeanSe::of(&reps.iter().map(|r| f(&pick(r))).collect::<Vec<_>>());
    TableRow {
        n_true_inter: scenario.n_true_inter,
        method: method.label(),
        relaxed,
        relative_loss: col(&|s| s.relative_loss),
        fdr: col(&|s| s.fdr),
        tpr: col(&|s| s.tpr),
        n_interactions: col(&|s| s.n_interactions as f64),
    }
}

/// Runs every replicate (in parallel) and summarizes them.
pub fn run_scenario(scenario: &Scenario, method: &MethodConfig) -> Result<ScenarioReport> {
    scenario.validate()?;
    method.validate()?;
    let truth = gen_coefficients(scenario)?;
    let replicates = (0..scenario.replicates)
        .into_par_iter()
        .map(|r| run_replicate(scenario, method, &truth, r))
        .collect::<Result<Vec<_>>>()?;
    let table = vec![
        table_row(scenario, method, &replicates, false),
        table_row(scenario, method, &replicates, true),
    ];
    Ok(ScenarioReport {
        schema_version: "1".into(),
        scenario: scenario.clone(),
        method: method.clone(),
        truth,
        replicates,
        table,
    })
}
