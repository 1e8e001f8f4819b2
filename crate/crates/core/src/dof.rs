//! Degrees of freedom of a penalized fit.
//!
//! On a locally stable active set `A` the fit solves
//! `X_A'(X_A b - y) + sum_d lam_d grad P_d(b) = 0`, so `d yhat / d y` is
//! `X_A (X_A'X_A + sum_d lam_d H_d)^-1 X_A'` with `H_d` the Hessian of group `d`'s norm,
//! and its trace estimates df without bias. The lasso part has zero Hessian almost
//! everywhere and drops out.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coef::{flat_index, CoefficientMatrix};
use crate::design::{predict, DesignTensor};
use crate::error::{shape_mismatch, Error, Result};

/// Exponent used to approximate the `l_inf` norm by an `l_q` norm.
pub const DEFAULT_LINF_Q: u32 = 500;

/// Hessian of `||x||_q` for even `q >= 2`:
/// `(q-1)/||x||_q * (diag(t^(q-2)) - t^(q-1) (t^(q-1))')` with `t = x/||x||_q`.
pub fn hessian_lq(x: &[f64], q: u32) -> Result<DMatrix<f64>> {
    if q < 2 || q % 2 != 0 {
        return Err(Error::InvalidInput(format!("q must be an even integer >= 2, got {q}")));
    }
    if x.is_empty() {
        return Err(Error::EmptyVector);
    }
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return Err(Error::ZeroVector);
    }
    // With r = |x|/m, a = r^(q-2), w = a r^2, u = sign(x) a r and S = sum w the Hessian is
    // (q-1)/||x||_q * S^(-(q-2)/q) * (diag(a) - u u'/S). The diagonal a_i (S - w_i)/S is
    // formed from the other terms directly; subtracting cancels badly when one entry
    // dominates, which is the usual case for large q.
    let r: Vec<f64> = x.iter().map(|v| v.abs() / m).collect();
    let a: Vec<f64> = r.iter().map(|&v| v.powi(q as i32 - 2)).collect();
    let w: Vec<f64> = a.iter().zip(&r).map(|(ai, ri)| ai * ri * ri).collect();
    let u: Vec<f64> = x.iter().zip(&r).zip(&a).map(|((v, ri), ai)| v.signum() * ai * ri).collect();
    let sum: f64 = w.iter().sum();
    let norm = m * sum.powf(1.0 / q as f64);
    let scale = (q - 1) as f64 / norm * sum.powf(-((q - 2) as f64) / q as f64);
    let d = x.len();
    Ok(DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            let others: f64 = w.iter().enumerate().filter(|(l, _)| *l != i).map(|(_, v)| v).sum();
            scale * a[i] * others / sum
        } else {
            -scale * (u[i] * u[j]) / sum
        }
    }))
}

/// `||x||_q`, scaled by the largest magnitude so large `q` does not overflow.
pub fn lq_norm(x: &[f64], q: u32) -> f64 {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = x.iter().map(|v| (v.abs() / m).powi(q as i32)).sum();
    m * s.powf(1.0 / q as f64)
}

/// A penalized group over flat coefficient positions.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPenalty {
    pub positions: Vec<usize>,
    /// Weight on the loss scale `0.5 ||y - X b||^2`.
    pub lambda: f64,
    /// Even `q` of the group norm, or `None` for penalties with no curvature.
    pub q: Option<u32>,
}

/// Nonzero positions of a coefficient vector, in flat order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    pub indices: Vec<usize>,
}

impl ActiveSet {
    pub fn from_coefficients(b: &CoefficientMatrix) -> Self {
        let flat = b.to_flat();
        Self {
            indices: (0..flat.len()).filter(|&i| flat[i] != 0.0).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Positions within the active set of the group's active members.
    pub fn restrict(&self, group: &[usize]) -> Vec<usize> {
        group
            .iter()
            .filter_map(|g| self.indices.binary_search(g).ok())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DfEstimate {
    pub df: f64,
    pub active_size: usize,
    /// Ridge added to the inner matrix when it was numerically singular; 0 otherwise.
    pub jitter: f64,
    /// Condition estimate of the inner matrix from its Cholesky pivots.
    pub condition: f64,
}

const CONDITION_LIMIT: f64 = 1e12;

/// Unbiased df estimate for a fit with coefficients `b` and the given curved groups.
pub fn df_generic(design: &DesignTensor, b: &CoefficientMatrix, groups: &[GroupPenalty]) -> Result<DfEstimate> {
    if b.p1() != design.p1() || b.p2() != design.p2() {
        return Err(shape_mismatch(
            "coefficient matrix",
            format!("{}x{}", design.p1() + 1, design.p2() + 1),
            format!("{}x{}", b.p1() + 1, b.p2() + 1),
        ));
    }
    let active = ActiveSet::from_coefficients(b);
    if active.is_empty() {
        return Ok(DfEstimate {
            df: 0.0,
            active_size: 0,
            jitter: 0.0,
            condition: 1.0,
        });
    }
    let flat = b.to_flat();
    let xa = design.data().select_columns(&active.indices);
    let gram = xa.tr_mul(&xa);
    let mut inner = gram.clone();
    for g in groups {
        let Some(q) = g.q else { continue };
        if g.lambda == 0.0 {
            continue;
        }
        let pos = active.restrict(&g.positions);
        if pos.is_empty() {
            continue;
        }
        let sub: Vec<f64> = pos.iter().map(|&p| flat[active.indices[p]]).collect();
        let h = hessian_lq(&sub, q)?;
        for (a, &pa) in pos.iter().enumerate() {
            for (c, &pc) in pos.iter().enumerate() {
                inner[(pa, pc)] += g.lambda * h[(a, c)];
            }
        }
    }
    let dim = inner.nrows();
    let (chol, jitter, condition) = match factor(&inner) {
        Some((c, cond)) => (c, 0.0, cond),
        None => {
            let jitter = 1e-10 * inner.trace() / dim as f64;
            let shifted = &inner + DMatrix::identity(dim, dim) * jitter;
            // the condition limit only decides whether to jitter; exactly repeated
            // columns (X = Z) stay ill-conditioned but contribute nothing to the trace
            let cond = pivot_condition(&shifted);
            match shifted.cholesky() {
                Some(c) if cond.is_finite() => (c, jitter, cond),
                _ => return Err(Error::SingularInnerMatrix { condition: cond }),
            }
        }
    };
    let solved = chol.solve(&gram);
    Ok(DfEstimate {
        df: solved.trace(),
        active_size: active.len(),
        jitter,
        condition,
    })
}

fn pivot_condition(m: &DMatrix<f64>) -> f64 {
    match m.clone().cholesky() {
        Some(c) => {
            let d = c.l_dirty().diagonal();
            let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
            (hi / lo).powi(2)
        }
        None => f64::INFINITY,
    }
}

fn factor(m: &DMatrix<f64>) -> Option<(nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> {
    let cond = pivot_condition(m);
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return None;
    }
    m.clone().cholesky().map(|c| (c, cond))
}

/// Row groups `j = 1..=p1` and column groups `k = 1..=p2` with weights `n lambda`.
pub fn row_col_groups(design: &DesignTensor, lambda1: f64, lambda2: f64, q: u32) -> Vec<GroupPenalty> {
    let (p1, p2) = (design.p1(), design.p2());
    let n = design.n() as f64;
    let rows = (1..=p1).map(|j| GroupPenalty {
        positions: sorted((0..=p2).map(|k| flat_index(p1, p2, j, k)).collect()),
        lambda: n * lambda1,
        q: Some(q),
    });
    let cols = (1..=p2).map(|k| GroupPenalty {
        positions: sorted((0..=p1).map(|j| flat_index(p1, p2, j, k)).collect()),
        lambda: n * lambda2,
        q: Some(q),
    });
    rows.chain(cols).collect()
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// df of a fit with group-`l2` rows and columns.
pub fn df_l2(design: &DesignTensor, b: &CoefficientMatrix, lambda1: f64, lambda2: f64) -> Result<DfEstimate> {
    df_generic(design, b, &row_col_groups(design, lambda1, lambda2, 2))
}

/// df of a fit with `l_inf` rows and columns, approximated through `l_q`.
pub fn df_linf(
    design: &DesignTensor,
    b: &CoefficientMatrix,
    lambda1: f64,
    lambda2: f64,
    q: u32,
) -> Result<DfEstimate> {
    df_generic(design, b, &row_col_groups(design, lambda1, lambda2, q))
}

/// Monte-Carlo df with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McDf {
    pub df: f64,
    pub std_error: f64,
    pub reps: usize,
}

pub const MIN_MC_REPS: usize = 10;

/// `reps` responses `W*B_true + sigma * N(0, I)` from one seeded stream.
pub fn draw_responses(
    design: &DesignTensor,
    b_true: &CoefficientMatrix,
    sigma: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    let mu = predict(design, b_true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..reps)
        .map(|_| DVector::from_fn(mu.len(), |i, _| {
            let e: f64 = StandardNormal.sample(&mut rng);
            mu[i] + sigma * e
        }))
        .collect())
}

/// `(1/sigma^2) sum_i Cov(y_i, yhat_i)` from paired draws, via the sample covariance.
///
/// The standard error treats each replicate's centered cross-product sum as one
/// observation.
pub fn covariance_df(responses: &[DVector<f64>], fitted: &[DVector<f64>], sigma: f64) -> Result<McDf> {
    let reps = responses.len();
    if reps < MIN_MC_REPS {
        return Err(Error::TooFewReplicates(reps));
    }
    if fitted.len() != reps {
        return Err(shape_mismatch("fitted replicates", reps, fitted.len()));
    }
    let n = responses[0].len();
    let r = reps as f64;
    let mut ybar = DVector::zeros(n);
    let mut fbar = DVector::zeros(n);
    for (y, f) in responses.iter().zip(fitted) {
        if y.len() != n || f.len() != n {
            return Err(shape_mismatch("replicate length", n, y.len().max(f.len())));
        }
        ybar += y;
        fbar += f;
    }
    ybar /= r;
    fbar /= r;
    let scale = r / (r - 1.0) / (sigma * sigma);
    let per_rep: Vec<f64> = responses
        .iter()
        .zip(fitted)
        .map(|(y, f)| (y - &ybar).dot(&(f - &fbar)) * scale)
        .collect();
    let mean = per_rep.iter().sum::<f64>() / r;
    let var = per_rep.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    Ok(McDf {
        df: mean,
        std_error: (var / r).sqrt(),
        reps,
    })
}

/// Monte-Carlo df of `procedure` (response -> fitted values) at a fixed design.
pub fn monte_carlo_df<F>(
    design: &DesignTensor,
    b_true: &CoefficientMatrix,
    sigma: f64,
    reps: usize,
    seed: u64,
    procedure: F,
) -> Result<McDf>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    let out = monte_carlo_df_multi(design, b_true, sigma, reps, seed, |y| Ok(vec![procedure(y)?]))?;
    Ok(out[0])
}

/// Like [`monte_carlo_df`] for a procedure returning several fits per response (a path).
pub fn monte_carlo_df_multi<F>(
    design: &DesignTensor,
    b_true: &CoefficientMatrix,
    sigma: f64,
    reps: usize,
    seed: u64,
    procedure: F,
) -> Result<Vec<McDf>>
where
    F: Fn(&DVector<f64>) -> Result<Vec<DVector<f64>>> + Sync,
{
    if reps < MIN_MC_REPS {
        return Err(Error::TooFewReplicates(reps));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidInput("sigma must be positive".into()));
    }
    let responses = draw_responses(design, b_true, sigma, reps, seed)?;
    let fits: Vec<Vec<DVector<f64>>> = responses
        .par_iter()
        .map(&procedure)
        .collect::<Result<_>>()?;
    let outputs = fits[0].len();
    if fits.iter().any(|f| f.len() != outputs) {
        return Err(Error::InvalidInput("procedure returned a varying number of fits".into()));
    }
    (0..outputs)
        .map(|o| {
            let fitted: Vec<DVector<f64>> = fits.iter().map(|f| f[o].clone()).collect();
            covariance_df(&responses, &fitted, sigma)
        })
        .collect()
}
