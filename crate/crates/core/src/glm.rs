//! Logistic loss for binary responses.
//!
//! The ADMM loop is shared with the squared-error solver; only the B-step changes.
//! The logistic Hessian `W' diag(p(1-p)) W / n` is bounded by `W'W/(4n)`, so replacing
//! it by that bound gives a quadratic majorizer whose minimizer is a shifted solve
//! with the cached factorization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coef::{flatten, unflatten, CoefficientMatrix};
use crate::design::{predict, DesignTensor};
use crate::error::{Error, Result};
use crate::penalty::PenaltySpec;
use crate::solver::{
    certified_null_fit, check_shapes, consensus_target_scaled, penalty_value, run_admm, run_chains, AdmmOptions,
    AdmmState, BStep, FactorCache, FitResult,
};

/// Number of majorize-minimize passes per B-step.
pub const DEFAULT_INNER_ITERS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Gaussian,
    Binomial,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "binomial" => Ok(Family::Binomial),
            other => Err(Error::InvalidInput(format!(
                "unknown family '{other}' (expected gaussian or binomial)"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlmSpec {
    pub family: Family,
    pub penalty: PenaltySpec,
}

pub fn check_binary(y: &DVector<f64>) -> Result<()> {
    if y.iter().all(|v| *v == 0.0 || *v == 1.0) {
        Ok(())
    } else {
        Err(Error::NonBinaryResponse)
    }
}

/// `log(1 + e^eta)` without overflow.
#[inline]
pub fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn loss_from_eta(eta: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    eta.iter().zip(y.iter()).map(|(e, yi)| softplus(*e) - yi * e).sum::<f64>() / n
}

/// Mean negative log-likelihood `-(1/n) sum [y_i eta_i - log(1 + e^eta_i)]`.
pub fn logistic_loss(b: &CoefficientMatrix, design: &DesignTensor, y: &DVector<f64>) -> Result<f64> {
    check_shapes(design, y)?;
    check_binary(y)?;
    Ok(loss_from_eta(&predict(design, b)?, y))
}

/// Gradient of [`logistic_loss`], `W'(p - y)/n`, laid out as a coefficient matrix.
pub fn logistic_grad(
    b: &CoefficientMatrix,
    design: &DesignTensor,
    y: &DVector<f64>,
) -> Result<CoefficientMatrix> {
    check_shapes(design, y)?;
    check_binary(y)?;
    let eta = predict(design, b)?;
    let g = flat_grad(design, &eta, y);
    CoefficientMatrix::from_flat(design.p1(), design.p2(), &g)
}

fn flat_grad(design: &DesignTensor, eta: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let resid = DVector::from_fn(y.len(), |i, _| sigmoid(eta[i]) - y[i]);
    design.data().tr_mul(&resid) / y.len() as f64
}

/// Penalized logistic objective.
pub fn logistic_objective(
    b: &CoefficientMatrix,
    design: &DesignTensor,
    y: &DVector<f64>,
    spec: &PenaltySpec,
) -> Result<f64> {
    Ok(logistic_loss(b, design, y)? + penalty_value(b.as_matrix(), spec))
}

/// `log(p/(1-p))` of the response mean: the intercept of the null model.
pub fn null_intercept(y: &DVector<f64>) -> f64 {
    let p = y.mean();
    (p / (1.0 - p)).ln()
}

/// Value of the B-step surrogate at `b`, expanded around `b0`:
///
/// ```text
/// L(b0) + g0'(b - b0) + (1/8n)||W(b - b0)||^2 + (3 rho/2)||M - b||^2
/// ```
///
/// where `3 rho M` is `target_scaled`. Upper-bounds `L(b) + (3 rho/2)||M - b||^2`.
pub fn surrogate_value(
    design: &DesignTensor,
    y: &DVector<f64>,
    b0: &DMatrix<f64>,
    b: &DMatrix<f64>,
    rho: f64,
    target_scaled: &DMatrix<f64>,
) -> f64 {
    let (f0, fb) = (flatten(b0), flatten(b));
    let eta0 = design.data() * &f0;
    let step = &fb - &f0;
    let wstep = design.data() * &step;
    let n = y.len() as f64;
    let m = flatten(target_scaled) / (3.0 * rho);
    loss_from_eta(&eta0, y)
        + flat_grad(design, &eta0, y).dot(&step)
        + wstep.norm_squared() / (8.0 * n)
        + 1.5 * rho * (&m - &fb).norm_squared()
}

/// The function the surrogate majorizes: `L(b) + (3 rho/2)||M - b||^2`.
pub fn proximal_loss(
    design: &DesignTensor,
    y: &DVector<f64>,
    b: &DMatrix<f64>,
    rho: f64,
    target_scaled: &DMatrix<f64>,
) -> f64 {
    let fb = flatten(b);
    let m = flatten(target_scaled) / (3.0 * rho);
    loss_from_eta(&(design.data() * &fb), y) + 1.5 * rho * (&m - &fb).norm_squared()
}

/// One or more majorize-minimize passes starting from the current `B`.
pub fn update_b_logistic(
    state: &AdmmState,
    design: &DesignTensor,
    cache: &FactorCache,
    y: &DVector<f64>,
    inner_iters: usize,
) -> DMatrix<f64> {
    let (p1, p2) = (design.p1(), design.p2());
    let n = y.len() as f64;
    let target = flatten(&consensus_target_scaled(state));
    let mut b = flatten(&state.b);
    for _ in 0..inner_iters.max(1) {
        let eta = design.data() * &b;
        let work = DVector::from_fn(y.len(), |i, _| eta[i] / 4.0 - (sigmoid(eta[i]) - y[i]));
        let rhs = design.data().tr_mul(&work) / n + &target;
        b = cache.solve_shifted(&rhs, 0.25, 3.0 * state.rho);
    }
    unflatten(p1, p2, b.as_slice())
}

struct LogisticStep<'a> {
    design: &'a DesignTensor,
    cache: &'a FactorCache,
    y: &'a DVector<f64>,
    inner_iters: usize,
}

impl BStep for LogisticStep<'_> {
    fn update(&mut self, state: &AdmmState) -> DMatrix<f64> {
        update_b_logistic(state, self.design, self.cache, self.y, self.inner_iters)
    }

    fn exact(&self) -> bool {
        false
    }
}

/// Penalized logistic fit with a prebuilt factorization; returns non-converged fits as such.
pub fn admm_fit_logistic_cached(
    design: &DesignTensor,
    cache: &FactorCache,
    y: &DVector<f64>,
    spec: &PenaltySpec,
    opts: &AdmmOptions,
    inner_iters: usize,
    warm: Option<AdmmState>,
) -> Result<FitResult> {
    check_shapes(design, y)?;
    check_binary(y)?;
    opts.validate()?;
    let obj = |b: &CoefficientMatrix| logistic_objective(b, design, y, spec).unwrap_or(f64::NAN);
    if let Some(fit) = certified_null_fit(design, y, spec, opts, null_intercept(y), &obj)? {
        return Ok(fit);
    }
    let warm = warm.or_else(|| {
        // start from the null model rather than p = 1/2 everywhere
        let mut s = AdmmState::zeros(design.p1(), design.p2(), opts.rho0);
        let icpt = null_intercept(y);
        if icpt.is_finite() {
            for m in [&mut s.b, &mut s.d, &mut s.e, &mut s.f] {
                m[(0, 0)] = icpt;
            }
        }
        Some(s)
    });
    let mut step = LogisticStep {
        design,
        cache,
        y,
        inner_iters,
    };
    Ok(run_admm(design, spec, opts, warm, &mut step, &obj))
}

/// Penalized logistic fit; non-convergence is an error carrying the partial fit.
pub fn admm_fit_logistic(
    design: &DesignTensor,
    y: &DVector<f64>,
    spec: &PenaltySpec,
    opts: &AdmmOptions,
    warm: Option<AdmmState>,
) -> Result<FitResult> {
    check_shapes(design, y)?;
    check_binary(y)?;
    let cache = FactorCache::new(design)?;
    let fit = admm_fit_logistic_cached(design, &cache, y, spec, opts, DEFAULT_INNER_ITERS, warm)?;
    if fit.converged {
        Ok(fit)
    } else {
        Err(Error::NotConverged(Box::new(fit)))
    }
}

/// Logistic counterpart of [`crate::solver::fit_path_outcomes`].
pub fn fit_path_logistic_outcomes(
    design: &DesignTensor,
    cache: &FactorCache,
    y: &DVector<f64>,
    grid: &[PenaltySpec],
    opts: &AdmmOptions,
    inner_iters: usize,
) -> Result<Vec<FitResult>> {
    check_binary(y)?;
    run_chains(grid, |spec, warm| {
        admm_fit_logistic_cached(design, cache, y, spec, opts, inner_iters, warm)
    })
}
