//! Independent reference implementations used by the integration and acceptance tests.
//! Nothing here calls the library's solvers or penalty kernels.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Penalty kinds by their configuration names.
pub const KINDS: [&str; 4] = ["l1", "l2", "linf", "hybrid"];

pub fn norm_by_name(kind: &str, v: &[f64]) -> f64 {
    match kind {
        "l1" => v.iter().map(|x| x.abs()).sum(),
        "l2" => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        "linf" => v.iter().fold(0.0, |a, x| a.max(x.abs())),
        "hybrid" => {
            let rest: f64 = v[1..].iter().map(|x| x.abs()).sum();
            v[0].abs().max(rest)
        }
        "none" => 0.0,
        _ => panic!("unknown kind {kind}"),
    }
}

pub fn prox_objective(kind: &str, y: &[f64], b: &[f64], lam: f64) -> f64 {
    let fit: f64 = y.iter().zip(b).map(|(a, c)| (a - c).powi(2)).sum();
    0.5 * fit + lam * norm_by_name(kind, b)
}

fn gauss(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Smallest prox objective over `points` candidates: scalings of `y`, coordinatewise
/// shrinkages of `y`, local perturbations of `incumbent` at several scales, and uniform
/// draws from a box containing every minimizer.
pub fn prox_search_min(kind: &str, y: &[f64], lam: f64, incumbent: &[f64], points: usize, rng: &mut impl Rng) -> f64 {
    let d = y.len();
    let ymax = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut best = prox_objective(kind, y, &vec![0.0; d], lam);
    let mut cand = vec![0.0; d];
    let try_point = |c: &[f64], best: &mut f64| {
        let v = prox_objective(kind, y, c, lam);
        if v < *best {
            *best = v;
        }
    };
    let grid = points / 10;
    for i in 0..=grid {
        let t = i as f64 / grid as f64;
        for (c, v) in cand.iter_mut().zip(y) {
            *c = t * v;
        }
        try_point(&cand, &mut best);
    }
    let shrink = points / 10;
    for i in 0..shrink {
        let thr = ymax * i as f64 / shrink as f64;
        for (c, v) in cand.iter_mut().zip(y) {
            *c = v.signum() * (v.abs() - thr).max(0.0);
        }
        try_point(&cand, &mut best);
    }
    let local = points / 2;
    for i in 0..local {
        let scale = 10f64.powf(-1.0 - 5.0 * (i % 6) as f64 / 5.0) * ymax.max(1e-3);
        for (c, v) in cand.iter_mut().zip(incumbent) {
            *c = v + scale * gauss(rng);
        }
        try_point(&cand, &mut best);
        // also try zeroing a random coordinate of the perturbed point
        let j = rng.random_range(0..d);
        cand[j] = 0.0;
        try_point(&cand, &mut best);
    }
    let rest = points.saturating_sub(grid + 1 + shrink + 2 * local);
    for _ in 0..rest {
        for c in cand.iter_mut() {
            *c = rng.random_range(-ymax..=ymax);
        }
        try_point(&cand, &mut best);
    }
    best
}

/// Hybrid prox through a one-dimensional search over the split `lambda1` of the dual
/// budget: `beta = y - u(lambda1)` with `u` the clipped response.
pub fn hybrid_prox_by_split(y: &[f64], lam: f64) -> Vec<f64> {
    let u_of = |l1: f64| -> Vec<f64> {
        let mut u = Vec::with_capacity(y.len());
        u.push(y[0].clamp(-l1, l1));
        let rest = (lam - l1).max(0.0);
        for v in &y[1..] {
            u.push(v.clamp(-rest, rest));
        }
        u
    };
    let f = |l1: f64| -> f64 {
        let rest = (lam - l1).max(0.0);
        let head = (y[0].abs() - l1).max(0.0).powi(2);
        head + y[1..].iter().map(|v| (v.abs() - rest).max(0.0).powi(2)).sum::<f64>()
    };
    let steps = 20_000;
    let mut best = (0.0, f(0.0));
    for i in 1..=steps {
        let l1 = lam * i as f64 / steps as f64;
        let v = f(l1);
        if v < best.1 {
            best = (l1, v);
        }
    }
    // golden-section refinement around the best grid point; f is convex in lambda1
    let h = lam / steps as f64;
    let (mut a, mut b) = ((best.0 - h).max(0.0), (best.0 + h).min(lam));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) <= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let l1 = 0.5 * (a + b);
    y.iter().zip(u_of(l1)).map(|(a, b)| a - b).collect()
}

/// Raw-design fitted values for a `(p1+1) x (p2+1)` coefficient matrix, computed cell by cell.
pub fn raw_fitted(b: &DMatrix<f64>, x: &DMatrix<f64>, z: &DMatrix<f64>) -> DVector<f64> {
    let (p1, p2) = (x.ncols(), z.ncols());
    DVector::from_fn(x.nrows(), |i, _| {
        let mut s = b[(0, 0)];
        for j in 1..=p1 {
            s += b[(j, 0)] * x[(i, j - 1)];
        }
        for k in 1..=p2 {
            s += b[(0, k)] * z[(i, k - 1)];
        }
        for j in 1..=p1 {
            for k in 1..=p2 {
                s += b[(j, k)] * x[(i, j - 1)] * z[(i, k - 1)];
            }
        }
        s
    })
}

/// Interaction-model objective with the same kind on rows and columns.
#[allow(clippy::too_many_arguments)]
pub fn model_objective(
    b: &DMatrix<f64>,
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    kind: &str,
    l1: f64,
    l2: f64,
    l3: f64,
) -> f64 {
    let n = y.len() as f64;
    let r = y - raw_fitted(b, x, z);
    let (p1, p2) = (x.ncols(), z.ncols());
    let mut pen = 0.0;
    for j in 1..=p1 {
        let row: Vec<f64> = (0..=p2).map(|k| b[(j, k)]).collect();
        pen += l1 * norm_by_name(kind, &row);
    }
    for k in 1..=p2 {
        let col: Vec<f64> = (0..=p1).map(|j| b[(j, k)]).collect();
        pen += l2 * norm_by_name(kind, &col);
    }
    for j in 1..=p1 {
        for k in 1..=p2 {
            pen += l3 * b[(j, k)].abs();
        }
    }
    r.norm_squared() / (2.0 * n) + pen
}

/// Least-squares fitted values through the SVD pseudo-inverse.
pub fn ols_fitted(w: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let svd = w.clone().svd(true, true);
    let coef = svd.solve(y, 1e-12).expect("svd solve");
    w * coef
}

/// Lasso with an unpenalized intercept, `(1/2n)||y - a - A beta||^2 + sum_j pen_j |beta_j|`,
/// by cyclic coordinate descent. Returns `(intercept, beta)`.
pub fn cd_lasso(a: &DMatrix<f64>, y: &DVector<f64>, pen: &[f64], sweeps: usize) -> (f64, DVector<f64>) {
    let (n, p) = a.shape();
    let nf = n as f64;
    let mut beta = DVector::zeros(p);
    let mut icpt = y.mean();
    let mut r = y.add_scalar(-icpt);
    let col_sq: Vec<f64> = (0..p).map(|j| a.column(j).norm_squared() / nf).collect();
    for _ in 0..sweeps {
        let mut change = 0.0f64;
        for j in 0..p {
            let old = beta[j];
            let rho: f64 = a.column(j).dot(&r) / nf + col_sq[j] * old;
            let new = rho.signum() * (rho.abs() - pen[j]).max(0.0) / col_sq[j];
            if new != old {
                r.axpy(old - new, &a.column(j), 1.0);
                beta[j] = new;
                change = change.max((new - old).abs());
            }
        }
        let shift = r.mean();
        icpt += shift;
        r.add_scalar_mut(-shift);
        if change < 1e-14 {
            break;
        }
    }
    (icpt, beta)
}

/// Subgradient of [`model_objective`] with hybrid rows and columns.
fn hybrid_subgradient(
    b: &DMatrix<f64>,
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    l1: f64,
    l2: f64,
    l3: f64,
) -> DMatrix<f64> {
    let (p1, p2) = (x.ncols(), z.ncols());
    let n = y.len() as f64;
    let r = y - raw_fitted(b, x, z);
    let mut g = DMatrix::zeros(p1 + 1, p2 + 1);
    for i in 0..y.len() {
        let ri = -r[i] / n;
        for j in 0..=p1 {
            let xj = if j == 0 { 1.0 } else { x[(i, j - 1)] };
            for k in 0..=p2 {
                let zk = if k == 0 { 1.0 } else { z[(i, k - 1)] };
                g[(j, k)] += ri * xj * zk;
            }
        }
    }
    let sgn = |v: f64| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
    for j in 1..=p1 {
        let main = b[(j, 0)].abs();
        let rest: f64 = (1..=p2).map(|k| b[(j, k)].abs()).sum();
        if main >= rest {
            g[(j, 0)] += l1 * sgn(b[(j, 0)]);
        } else {
            for k in 1..=p2 {
                g[(j, k)] += l1 * sgn(b[(j, k)]);
            }
        }
    }
    for k in 1..=p2 {
        let main = b[(0, k)].abs();
        let rest: f64 = (1..=p1).map(|j| b[(j, k)].abs()).sum();
        if main >= rest {
            g[(0, k)] += l2 * sgn(b[(0, k)]);
        } else {
            for j in 1..=p1 {
                g[(j, k)] += l2 * sgn(b[(j, k)]);
            }
        }
    }
    for j in 1..=p1 {
        for k in 1..=p2 {
            g[(j, k)] += l3 * sgn(b[(j, k)]);
        }
    }
    g
}

/// Best objective of a long subgradient run from zero with steps `step0 / sqrt(t+1)`.
#[allow(clippy::too_many_arguments)]
pub fn subgradient_hybrid(
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    l1: f64,
    l2: f64,
    l3: f64,
    iters: usize,
    step0: f64,
) -> f64 {
    let (p1, p2) = (x.ncols(), z.ncols());
    let mut b = DMatrix::zeros(p1 + 1, p2 + 1);
    let obj = |b: &DMatrix<f64>| model_objective(b, x, z, y, "hybrid", l1, l2, l3);
    let mut best = obj(&b);
    for t in 0..iters {
        let g = hybrid_subgradient(&b, x, z, y, l1, l2, l3);
        let gn = g.norm();
        if gn == 0.0 {
            break;
        }
        b -= g * (step0 / ((t + 1) as f64).sqrt() / gn.max(1.0));
        if t % 10 == 0 || t + 1 == iters {
            best = best.min(obj(&b));
        }
    }
    best
}

/// Unpenalized logistic regression by damped Newton iterations.
pub fn newton_logistic(w: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let (n, p) = w.shape();
    let loss = |beta: &DVector<f64>| -> f64 {
        let eta = w * beta;
        eta.iter()
            .zip(y.iter())
            .map(|(e, yi)| e.max(0.0) + (-e.abs()).exp().ln_1p() - yi * e)
            .sum::<f64>()
    };
    let mut beta = DVector::zeros(p);
    for _ in 0..100 {
        let eta = w * &beta;
        let prob = eta.map(|e| 1.0 / (1.0 + (-e).exp()));
        let grad = w.tr_mul(&(&prob - y));
        let mut h = DMatrix::zeros(p, p);
        for i in 0..n {
            let wi = prob[i] * (1.0 - prob[i]);
            let row = w.row(i);
            h += row.transpose() * row * wi;
        }
        let step = h.lu().solve(&grad).expect("newton system");
        let base = loss(&beta);
        let mut t = 1.0;
        while loss(&(&beta - &step * t)) > base && t > 1e-10 {
            t *= 0.5;
        }
        beta -= step * t;
        if grad.amax() < 1e-12 {
            break;
        }
    }
    beta
}

/// Gaussian matrix with i.i.d. standard entries.
pub fn gaussian_matrix(n: usize, p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| gauss(rng))
}

pub fn gaussian_vector(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| gauss(rng))
}

/// Prints and records one acceptance line.
pub struct Report {
    lines: Vec<(String, bool)>,
}

impl Report {
    pub fn new() -> Self {
        Self { lines: Vec::new() }
    }

    pub fn record(&mut self, id: &str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {id} {detail}");
        self.lines.push((id.to_string(), pass));
    }

    pub fn failures(&self) -> Vec<String> {
        self.lines.iter().filter(|(_, p)| !p).map(|(id, _)| id.clone()).collect()
    }
}
