//! Refitting on a selected support and scoring fits against held-out data and truth.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coef::{cell_of, CoefficientMatrix};
use crate::design::{predict, DesignTensor};
use crate::error::{shape_mismatch, Error, Result};
use crate::glm::{check_binary, sigmoid, softplus, Family};
use crate::solver::Support;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefitResult {
    pub b: CoefficientMatrix,
    /// More distinct active columns than observations; `b` is the minimum-norm solution.
    pub underdetermined: bool,
    /// The logistic likelihood kept increasing without bound; `b` was stopped early.
    pub separation: bool,
}

/// Distinct design columns of the support. In the symmetric case `(j,k)` and `(k,j)`
/// (and `(j,0)`, `(0,j)`) share a column; the first in flat order represents both.
fn unique_columns(design: &DesignTensor, support: &Support) -> Vec<usize> {
    let (p1, p2) = (design.p1(), design.p2());
    let mut cols = Vec::new();
    for idx in 0..design.n_columns() {
        let (j, k) = cell_of(p1, p2, idx);
        if !support.get(j, k) || design.is_masked(j, k) {
            continue;
        }
        if let Some((mj, mk)) = design.mirror(j, k) {
            if support.get(mj, mk) && design.column_index(mj, mk) < idx {
                continue;
            }
        }
        cols.push(idx);
    }
    cols
}

fn check_support(design: &DesignTensor, support: &Support) -> Result<()> {
    if support.p1 != design.p1() || support.p2 != design.p2() {
        return Err(shape_mismatch(
            "support",
            format!("{}x{}", design.p1() + 1, design.p2() + 1),
            format!("{}x{}", support.p1 + 1, support.p2 + 1),
        ));
    }
    Ok(())
}

/// Unpenalized refit (least squares or logistic MLE) restricted to the support.
/// The intercept is always included.
pub fn relax_refit(
    design: &DesignTensor,
    y: &DVector<f64>,
    support: &Support,
    family: Family,
) -> Result<RefitResult> {
    check_support(design, support)?;
    if y.len() != design.n() {
        return Err(shape_mismatch("response length", design.n(), y.len()));
    }
    let mut support = support.clone();
    support.set(0, 0, true);
    let cols = unique_columns(design, &support);
    let xa = design.data().select_columns(&cols);
    let underdetermined = cols.len() > design.n();
    let (coef, separation) = match family {
        Family::Gaussian => (least_squares(&xa, y), false),
        Family::Binomial => {
            check_binary(y)?;
            logistic_mle(&xa, y)
        }
    };
    let mut flat = DVector::zeros(design.n_columns());
    for (c, &idx) in cols.iter().enumerate() {
        flat[idx] = coef[c];
    }
    Ok(RefitResult {
        b: CoefficientMatrix::from_flat(design.p1(), design.p2(), &flat)?,
        underdetermined,
        separation,
    })
}

/// Normal equations when well posed, otherwise the SVD minimum-norm solution.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    if x.ncols() <= x.nrows() {
        let gram = x.tr_mul(x);
        if let Some(ch) = gram.clone().cholesky() {
            let d = ch.l_dirty().diagonal();
            let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
            if (hi / lo).powi(2) < 1e10 {
                return ch.solve(&x.tr_mul(y));
            }
        }
    }
    min_norm(x, y)
}

fn min_norm(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    if x.ncols() > x.nrows() {
        // wide: x' (x x')^-1 y when x x' is well conditioned
        if let Some(ch) = (x * x.transpose()).cholesky() {
            let d = ch.l_dirty().diagonal();
            let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
            if (hi / lo).powi(2) < 1e10 {
                return x.tr_mul(&ch.solve(y));
            }
        }
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * (x.nrows().max(x.ncols()) as f64) * f64::EPSILON;
    svd.solve(y, eps).unwrap_or_else(|_| DVector::zeros(x.ncols()))
}

const MLE_COEF_CAP: f64 = 1e3;

/// Newton-Raphson with step halving. Returns the estimate and whether separation
/// (coefficients escaping to infinity) was detected.
fn logistic_mle(x: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, bool) {
    let (n, p) = x.shape();
    let mut b = DVector::zeros(p);
    let nll = |b: &DVector<f64>| -> f64 {
        let eta = x * b;
        (0..n).map(|i| softplus(eta[i]) - y[i] * eta[i]).sum()
    };
    let mut current = nll(&b);
    for _ in 0..100 {
        let eta = x * &b;
        let prob: Vec<f64> = eta.iter().map(|e| sigmoid(*e)).collect();
        let grad = x.tr_mul(&DVector::from_fn(n, |i, _| prob[i] - y[i]));
        let mut weighted = x.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= prob[i] * (1.0 - prob[i]);
        }
        let mut hess = x.tr_mul(&weighted);
        let ridge = 1e-10 * (hess.trace() / p as f64).max(1e-300);
        for i in 0..p {
            hess[(i, i)] += ridge;
        }
        let step = match hess.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => min_norm(&hess, &grad),
        };
        let mut t = 1.0;
        let mut next = &b - &step * t;
        let mut value = nll(&next);
        while value > current && t > 1e-8 {
            t *= 0.5;
            next = &b - &step * t;
            value = nll(&next);
        }
        let change = (&next - &b).amax();
        b = next;
        let improved = current - value;
        current = value;
        if b.amax() > MLE_COEF_CAP {
            return (b, true);
        }
        if change < 1e-10 || improved.abs() < 1e-14 * (1.0 + current.abs()) {
            break;
        }
    }
    let separated = current < 1e-6 * n as f64;
    (b, separated)
}

/// Refit on the support of the true coefficients.
pub fn oracle_fit(
    design: &DesignTensor,
    y: &DVector<f64>,
    truth: &CoefficientMatrix,
    family: Family,
) -> Result<RefitResult> {
    relax_refit(design, y, &Support::from_nonzero(truth), family)
}

/// Sum of squared residuals of `b` on `(design, y)`.
pub fn ssr(design: &DesignTensor, y: &DVector<f64>, b: &CoefficientMatrix) -> Result<f64> {
    if y.len() != design.n() {
        return Err(shape_mismatch("response length", design.n(), y.len()));
    }
    Ok((y - predict(design, b)?).norm_squared())
}

/// Binomial deviance `2 sum [log(1 + e^eta) - y eta]` of `b` on `(design, y)`.
pub fn deviance(design: &DesignTensor, y: &DVector<f64>, b: &CoefficientMatrix) -> Result<f64> {
    if y.len() != design.n() {
        return Err(shape_mismatch("response length", design.n(), y.len()));
    }
    check_binary(y)?;
    let eta = predict(design, b)?;
    Ok(2.0 * (0..y.len()).map(|i| softplus(eta[i]) - y[i] * eta[i]).sum::<f64>())
}

/// Held-out loss for the family: SSR or deviance.
pub fn eval_loss(design: &DesignTensor, y: &DVector<f64>, b: &CoefficientMatrix, family: Family) -> Result<f64> {
    match family {
        Family::Gaussian => ssr(design, y, b),
        Family::Binomial => deviance(design, y, b),
    }
}

/// Candidate interaction slots and whether each is present in `b`.
///
/// With a symmetric design an interaction is an unordered pair `j <= k` whose combined
/// coefficient `B[j,k] + B[k,j]` (just `B[j,j]` on the diagonal) is nonzero; masked
/// squared terms are not candidates. Otherwise every interior cell is a slot.
pub fn interaction_slots(design: &DesignTensor, b: &CoefficientMatrix) -> Vec<bool> {
    let (p1, p2) = (design.p1(), design.p2());
    if design.symmetric() {
        let mut out = Vec::new();
        for j in 1..=p1 {
            for k in j..=p2 {
                if design.is_masked(j, k) {
                    continue;
                }
                let v = if j == k { b[(j, j)] } else { b[(j, k)] + b[(k, j)] };
                out.push(v != 0.0);
            }
        }
        out
    } else {
        (1..=p1)
            .flat_map(|j| (1..=p2).map(move |k| (j, k)))
            .map(|c| b[c] != 0.0)
            .collect()
    }
}

/// Number of interactions present in `b`, counted as in [`interaction_slots`].
pub fn count_interactions(design: &DesignTensor, b: &CoefficientMatrix) -> usize {
    interaction_slots(design, b).into_iter().filter(|v| *v).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetrics {
    /// Held-out SSR (deviance for binary responses).
    pub ssr: f64,
    pub n_interactions: usize,
    pub true_positives: Option<usize>,
    pub false_positives: Option<usize>,
    /// `FP / max(1, FP + TP)`; 0 with no discoveries.
    pub fdr: Option<f64>,
    /// `TP / max(1, positives)`.
    pub tpr: Option<f64>,
    /// `FP / max(1, negatives)`.
    pub fpr: Option<f64>,
}

/// Selection counts of `estimate` against `truth` over interaction slots:
/// `(tp, fp, positives, negatives)`.
pub fn confusion(design: &DesignTensor, estimate: &CoefficientMatrix, truth: &CoefficientMatrix) -> (usize, usize, usize, usize) {
    let est = interaction_slots(design, estimate);
    let tru = interaction_slots(design, truth);
    let mut c = (0, 0, 0, 0);
    for (e, t) in est.iter().zip(&tru) {
        match (e, t) {
            (true, true) => c.0 += 1,
            (true, false) => c.1 += 1,
            _ => {}
        }
        if *t {
            c.2 += 1;
        } else {
            c.3 += 1;
        }
    }
    c
}

/// Metrics for each fitted coefficient matrix on the evaluation split.
pub fn score(
    fits: &[CoefficientMatrix],
    truth: Option<&CoefficientMatrix>,
    eval_design: &DesignTensor,
    eval_y: &DVector<f64>,
    family: Family,
) -> Result<Vec<SelectionMetrics>> {
    if let Some(t) = truth {
        if t.p1() != eval_design.p1() || t.p2() != eval_design.p2() {
            return Err(shape_mismatch("true coefficients", eval_design.p1(), t.p1()));
        }
    }
    fits.iter()
        .map(|b| {
            let loss = eval_loss(eval_design, eval_y, b, family)?;
            let mut m = SelectionMetrics {
                ssr: loss,
                n_interactions: count_interactions(eval_design, b),
                true_positives: None,
                false_positives: None,
                fdr: None,
                tpr: None,
                fpr: None,
            };
            if let Some(t) = truth {
                let (tp, fp, pos, neg) = confusion(eval_design, b, t);
                m.true_positives = Some(tp);
                m.false_positives = Some(fp);
                m.fdr = Some(fp as f64 / (fp + tp).max(1) as f64);
                m.tpr = Some(tp as f64 / pos.max(1) as f64);
                m.fpr = Some(fp as f64 / neg.max(1) as f64);
            }
            Ok(m)
        })
        .collect()
}

/// `(fpr, tpr)` points sorted by fpr, then tpr. Points without truth are skipped.
pub fn roc_points(metrics: &[SelectionMetrics]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = metrics
        .iter()
        .filter_map(|m| Some((m.fpr?, m.tpr?)))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts
}

/// One CSV row per grid point.
pub fn metrics_csv<W: std::io::Write>(out: W, labels: &[(f64, f64)], metrics: &[SelectionMetrics]) -> Result<()> {
    if labels.len() != metrics.len() {
        return Err(Error::InvalidInput("one label per grid point is required".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "lambda", "ssr", "n_interactions", "fdr", "tpr", "fpr"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for ((alpha, lambda), m) in labels.iter().zip(metrics) {
        w.write_record([
            alpha.to_string(),
            lambda.to_string(),
            m.ssr.to_string(),
            m.n_interactions.to_string(),
            opt(m.fdr),
            opt(m.tpr),
            opt(m.fpr),
        ])?;
    }
    w.flush()?;
    Ok(())
}
