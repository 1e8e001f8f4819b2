//! Row/column penalty kinds with their norms, dual norms and proximal operators.
//!
//! Every prox here solves `argmin_b 0.5 * ||y - b||^2 + lam * P(b)` exactly. The zero
//! test of each prox is evaluated through [`dual_norm`] so that `zero_check` and a
//! zero prox output agree bit for bit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PenaltyKind {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "l2")]
    GroupL2,
    #[serde(rename = "linf")]
    Linf,
    /// `max(|b_first|, ||b_rest||_1)`, where `b_first` is the main-effect entry.
    #[serde(rename = "hybrid")]
    HybridL1Linf,
    #[serde(rename = "none")]
    None,
}

impl PenaltyKind {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::L1 => "l1",
            PenaltyKind::GroupL2 => "l2",
            PenaltyKind::Linf => "linf",
            PenaltyKind::HybridL1Linf => "hybrid",
            PenaltyKind::None => "none",
        }
    }

    /// Kinds whose row/column groups force strong heredity of the support.
    pub fn induces_heredity(self) -> bool {
        matches!(
            self,
            PenaltyKind::GroupL2 | PenaltyKind::Linf | PenaltyKind::HybridL1Linf
        )
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(PenaltyKind::L1),
            "l2" => Ok(PenaltyKind::GroupL2),
            "linf" => Ok(PenaltyKind::Linf),
            "hybrid" => Ok(PenaltyKind::HybridL1Linf),
            "none" => Ok(PenaltyKind::None),
            other => Err(Error::InvalidInput(format!(
                "unknown penalty '{other}' (expected l2, linf, hybrid, l1 or none)"
            ))),
        }
    }
}

/// Penalty kinds for rows and columns plus the three tuning parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySpec {
    pub row_kind: PenaltyKind,
    pub col_kind: PenaltyKind,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// `(alpha, lambda)` when this was built from the reparametrized form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_lambda: Option<(f64, f64)>,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        Self::with_kinds(kind, kind, lambda1, lambda2, lambda3)
    }

    pub fn with_kinds(
        row_kind: PenaltyKind,
        col_kind: PenaltyKind,
        lambda1: f64,
        lambda2: f64,
        lambda3: f64,
    ) -> Result<Self> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2), ("lambda3", lambda3)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self {
            row_kind,
            col_kind,
            lambda1,
            lambda2,
            lambda3,
            alpha_lambda: None,
        })
    }

    /// `lambda1 = (1-alpha) lambda sqrt(p1)`, `lambda2 = (1-alpha) lambda sqrt(p2)`,
    /// `lambda3 = alpha lambda`.
    pub fn reparametrized(
        kind: PenaltyKind,
        alpha: f64,
        lambda: f64,
        p1: usize,
        p2: usize,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0,1), got {alpha}")));
        }
        let mut spec = Self::new(
            kind,
            (1.0 - alpha) * lambda * (p1 as f64).sqrt(),
            (1.0 - alpha) * lambda * (p2 as f64).sqrt(),
            alpha * lambda,
        )?;
        spec.alpha_lambda = Some((alpha, lambda));
        Ok(spec)
    }

    pub fn all_zero(&self) -> bool {
        self.lambda1 == 0.0 && self.lambda2 == 0.0 && self.lambda3 == 0.0
    }
}

fn check_nonempty(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        Err(Error::EmptyVector)
    } else {
        Ok(())
    }
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn norm_value(kind: PenaltyKind, v: &[f64]) -> Result<f64> {
    check_nonempty(v)?;
    Ok(match kind {
        PenaltyKind::L1 => l1(v),
        PenaltyKind::GroupL2 => l2(v),
        PenaltyKind::Linf => linf(v),
        PenaltyKind::HybridL1Linf => v[0].abs().max(l1(&v[1..])),
        PenaltyKind::None => 0.0,
    })
}

/// Dual norm `sup { z'v : P(z) <= 1 }`.
///
/// For `None` the constraint set is everything, so the dual is `+inf` except at 0.
pub fn dual_norm(kind: PenaltyKind, v: &[f64]) -> Result<f64> {
    check_nonempty(v)?;
    Ok(match kind {
        PenaltyKind::L1 => linf(v),
        PenaltyKind::GroupL2 => l2(v),
        PenaltyKind::Linf => l1(v),
        PenaltyKind::HybridL1Linf => v[0].abs() + linf(&v[1..]),
        PenaltyKind::None => {
            if v.iter().all(|x| *x == 0.0) {
                0.0
            } else {
                f64::INFINITY
            }
        }
    })
}

/// Whether the prox of `y` at level `lam` is exactly zero.
pub fn zero_check(kind: PenaltyKind, y: &[f64], lam: f64) -> bool {
    if y.is_empty() {
        return true;
    }
    dual_norm(kind, y).map(|d| d <= lam).unwrap_or(false)
}

#[inline]
pub fn soft_threshold(v: f64, lam: f64) -> f64 {
    if v > lam {
        v - lam
    } else if v < -lam {
        v + lam
    } else {
        0.0
    }
}

pub fn prox_soft_threshold(y: &[f64], lam: f64) -> Vec<f64> {
    y.iter().map(|&v| soft_threshold(v, lam)).collect()
}

pub fn prox_group_l2(y: &[f64], lam: f64) -> Vec<f64> {
    let norm = l2(y);
    if norm <= lam {
        return vec![0.0; y.len()];
    }
    let scale = 1.0 - lam / norm;
    y.iter().map(|v| v * scale).collect()
}

/// Euclidean projection onto `{u : ||u||_1 <= radius}` by sorting magnitudes.
pub fn project_l1_ball(y: &[f64], radius: f64) -> Vec<f64> {
    if l1(y) <= radius {
        return y.to_vec();
    }
    let theta = l1_threshold(y, radius);
    y.iter()
        .map(|&v| v.signum() * (v.abs() - theta).max(0.0))
        .collect()
}

/// Threshold `theta` with `sum_i (|y_i| - theta)_+ = radius`; requires `||y||_1 > radius`.
fn l1_threshold(y: &[f64], radius: f64) -> f64 {
    let mut mags: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = mags[0];
    let mut theta = cum - radius;
    for (i, &m) in mags.iter().enumerate().skip(1) {
        cum += m;
        let t = (cum - radius) / (i + 1) as f64;
        if m > t {
            theta = t;
        } else {
            break;
        }
    }
    theta.max(0.0)
}

/// Prox of `lam * ||.||_inf`, via the Moreau decomposition `y - P_{lam B1}(y)`.
pub fn prox_linf(y: &[f64], lam: f64) -> Vec<f64> {
    if l1(y) <= lam {
        return vec![0.0; y.len()];
    }
    let theta = l1_threshold(y, lam);
    // y - proj = clamp(y, -theta, theta)
    y.iter().map(|&v| v.clamp(-theta, theta)).collect()
}

/// Optimal split `lambda_1` of the dual budget between the first coordinate and
/// the rest, for the hybrid penalty. Assumes the zero test already failed.
///
/// With `z_i = lam - |y_{i+1}|` sorted ascending, the unconstrained minimizer is
/// `min_m (|y_1| + sum_{i<=m} z_(i)) / (m+1)`; the constrained one clamps it to `[0, lam]`.
pub fn hybrid_split(y: &[f64], lam: f64) -> f64 {
    let mut z: Vec<f64> = y[1..].iter().map(|v| lam - v.abs()).collect();
    z.sort_by(|a, b| a.total_cmp(b));
    let mut cum = y[0].abs();
    let mut best = cum;
    for (m, zi) in z.iter().enumerate() {
        cum += zi;
        let cand = cum / (m + 2) as f64;
        if cand < best {
            best = cand;
        }
    }
    best.clamp(0.0, lam)
}

/// Prox of `lam * max(|b_1|, ||b_rest||_1)`.
pub fn prox_hybrid(y: &[f64], lam: f64) -> Vec<f64> {
    if y.len() <= 1 {
        return prox_soft_threshold(y, lam);
    }
    if zero_check(PenaltyKind::HybridL1Linf, y, lam) {
        return vec![0.0; y.len()];
    }
    let lam1 = hybrid_split(y, lam);
    let rest = lam - lam1;
    let mut out = Vec::with_capacity(y.len());
    out.push(y[0] - y[0].clamp(-lam1, lam1));
    out.extend(y[1..].iter().map(|&v| v - v.clamp(-rest, rest)));
    out
}

/// Dispatches to the prox of `kind`.
pub fn prox(kind: PenaltyKind, y: &[f64], lam: f64) -> Vec<f64> {
    match kind {
        PenaltyKind::L1 => prox_soft_threshold(y, lam),
        PenaltyKind::GroupL2 => prox_group_l2(y, lam),
        PenaltyKind::Linf => prox_linf(y, lam),
        PenaltyKind::HybridL1Linf => prox_hybrid(y, lam),
        PenaltyKind::None => y.to_vec(),
    }
}

/// Value of the prox objective `0.5 ||y - b||^2 + lam P(b)`.
pub fn prox_objective(kind: PenaltyKind, y: &[f64], b: &[f64], lam: f64) -> f64 {
    let fit: f64 = y.iter().zip(b).map(|(a, c)| (a - c) * (a - c)).sum();
    0.5 * fit + lam * norm_value(kind, b).unwrap_or(0.0)
}
