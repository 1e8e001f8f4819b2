use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{admm_fit_cached, AdmmOptions, AdmmState, FactorCache, FitResult};
use crate::coef::unflatten;
use crate::design::DesignTensor;
use crate::error::{shape_mismatch, Error, Result};
use crate::penalty::{dual_norm, PenaltyKind, PenaltySpec};

/// Gradient of the loss at the intercept-only model, `W'(y - ybar)/n`, as a matrix.
pub fn null_gradient(design: &DesignTensor, y: &DVector<f64>) -> Result<DMatrix<f64>> {
    if y.len() != design.n() {
        return Err(shape_mismatch("response length", design.n(), y.len()));
    }
    let centered = y.add_scalar(-y.mean());
    let g = design.data().tr_mul(&centered) / design.n() as f64;
    Ok(unflatten(design.p1(), design.p2(), g.as_slice()))
}

/// Sufficient condition for `B = intercept only` to be optimal given the null gradient `g`.
///
/// Each interaction gradient beyond the lasso budget `lambda3` is split evenly between
/// its row and column (entirely to one side when the other is unpenalized), and each
/// row/column must then pass its dual-norm test.
pub fn blockwise_zero(g: &DMatrix<f64>, spec: &PenaltySpec) -> bool {
    let (p1, p2) = (g.nrows() - 1, g.ncols() - 1);
    let row_pen = spec.row_kind != PenaltyKind::None;
    let col_pen = spec.col_kind != PenaltyKind::None;
    let (row_share, col_share) = match (row_pen, col_pen) {
        (true, true) => (0.5, 0.5),
        (true, false) => (1.0, 0.0),
        (false, true) => (0.0, 1.0),
        (false, false) => (0.5, 0.5),
    };
    let excess = DMatrix::from_fn(p1 + 1, p2 + 1, |j, k| {
        if j == 0 || k == 0 {
            g[(j, k)]
        } else {
            let v = g[(j, k)];
            v.signum() * (v.abs() - spec.lambda3).max(0.0)
        }
    });
    let tol = 1e-12;
    let mut buf = vec![0.0; p2 + 1];
    for j in 1..=p1 {
        buf[0] = excess[(j, 0)];
        for k in 1..=p2 {
            buf[k] = row_share * excess[(j, k)];
        }
        match dual_norm(spec.row_kind, &buf) {
            Ok(v) if v <= spec.lambda1 + tol => {}
            _ => return false,
        }
    }
    let mut buf = vec![0.0; p1 + 1];
    for k in 1..=p2 {
        buf[0] = excess[(0, k)];
        for j in 1..=p1 {
            buf[j] = col_share * excess[(j, k)];
        }
        match dual_norm(spec.col_kind, &buf) {
            Ok(v) if v <= spec.lambda2 + tol => {}
            _ => return false,
        }
    }
    true
}

/// Smallest `lambda` (to bisection precision) at which [`blockwise_zero`] certifies the
/// intercept-only model for the reparametrized spec at `alpha`.
pub fn lambda_max(design: &DesignTensor, y: &DVector<f64>, kind: PenaltyKind, alpha: f64) -> Result<f64> {
    let g = null_gradient(design, y)?;
    let (p1, p2) = (design.p1(), design.p2());
    let ok = |lam: f64| -> Result<bool> {
        Ok(blockwise_zero(&g, &PenaltySpec::reparametrized(kind, alpha, lam, p1, p2)?))
    };
    let scale = g.amax();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut hi = scale;
    let mut tries = 0;
    while !ok(hi)? {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::InvalidInput(format!(
                "no finite lambda zeroes the model for penalty '{kind}'"
            )));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Ten mixing values `0.05, 0.15, ..., 0.95`.
pub fn alpha_grid() -> Vec<f64> {
    (0..10).map(|i| 0.05 + 0.1 * i as f64).collect()
}

/// `count` log-spaced values from `lambda_max` down to `ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, count: usize, ratio: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lambda_max],
        _ => (0..count)
            .map(|i| lambda_max * ratio.powf(i as f64 / (count - 1) as f64))
            .collect(),
    }
}

/// Key grouping specs that share a warm-start chain: same kinds and same mixing value.
fn chain_key(spec: &PenaltySpec) -> (u8, u8, u64) {
    let mix = match spec.alpha_lambda {
        Some((alpha, _)) => alpha,
        None => {
            let total = spec.lambda1 + spec.lambda2 + spec.lambda3;
            if total > 0.0 {
                spec.lambda3 / total
            } else {
                0.0
            }
        }
    };
    (spec.row_kind as u8, spec.col_kind as u8, mix.to_bits())
}

fn spec_size(spec: &PenaltySpec) -> f64 {
    spec.alpha_lambda
        .map(|(_, l)| l)
        .unwrap_or(spec.lambda1 + spec.lambda2 + spec.lambda3)
}

/// Fits every spec, warm-starting along decreasing `lambda` within each chain of equal
/// kinds and mixing value. Chains run in parallel. Non-converged fits are returned as
/// such; only input errors fail.
pub fn fit_path_outcomes(
    design: &DesignTensor,
    cache: &FactorCache,
    y: &DVector<f64>,
    grid: &[PenaltySpec],
    opts: &AdmmOptions,
) -> Result<Vec<FitResult>> {
    run_chains(grid, |spec, warm| admm_fit_cached(design, cache, y, spec, opts, warm))
}

/// Drives `fit` over the grid in warm-start chains and restores input order.
pub(crate) fn run_chains<F>(grid: &[PenaltySpec], fit: F) -> Result<Vec<FitResult>>
where
    F: Fn(&PenaltySpec, Option<AdmmState>) -> Result<FitResult> + Sync,
{
    if grid.is_empty() {
        return Err(Error::InvalidInput("penalty grid is empty".into()));
    }
    let mut chains: BTreeMap<(u8, u8, u64), Vec<usize>> = BTreeMap::new();
    for (i, spec) in grid.iter().enumerate() {
        chains.entry(chain_key(spec)).or_default().push(i);
    }
    let chains: Vec<Vec<usize>> = chains
        .into_values()
        .map(|mut idx| {
            idx.sort_by(|&a, &b| spec_size(&grid[b]).total_cmp(&spec_size(&grid[a])).then(a.cmp(&b)));
            idx
        })
        .collect();
    let fitted: Vec<Result<Vec<(usize, FitResult)>>> = chains
        .par_iter()
        .map(|idx| {
            let mut out = Vec::with_capacity(idx.len());
            let mut warm = None;
            for &i in idx {
                let result = fit(&grid[i], warm.take())
                    .map_err(|e| Error::GridPoint { index: i, source: Box::new(e) })?;
                warm = result.state.clone();
                out.push((i, result));
            }
            Ok(out)
        })
        .collect();
    let mut slots: Vec<Option<FitResult>> = (0..grid.len()).map(|_| None).collect();
    for chain in fitted {
        for (i, result) in chain? {
            slots[i] = Some(result);
        }
    }
    Ok(slots.into_iter().map(|f| f.expect("every grid point fitted")).collect())
}

/// Strict variant of [`fit_path_outcomes`]: the first non-converged grid point (in
/// input order) becomes an error tagged with its index.
pub fn fit_path(
    design: &DesignTensor,
    y: &DVector<f64>,
    grid: &[PenaltySpec],
    opts: &AdmmOptions,
) -> Result<Vec<FitResult>> {
    let cache = FactorCache::new(design)?;
    let fits = fit_path_outcomes(design, &cache, y, grid, opts)?;
    if let Some(i) = fits.iter().position(|f| !f.converged) {
        let fit = fits.into_iter().nth(i).expect("index in range");
        return Err(Error::GridPoint {
            index: i,
            source: Box::new(Error::NotConverged(Box::new(fit))),
        });
    }
    Ok(fits)
}
