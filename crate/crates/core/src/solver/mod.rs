//! ADMM for the squared-error objective
//!
//! ```text
//! (1/2n) ||y - W*B||^2 + l1 sum_j Pr(B[j,.]) + l2 sum_k Pc(B[.,k]) + l3 ||B_interior||_1
//! ```
//!
//! split into consensus copies `B = D = E = F`. `D` carries the row penalty, `E` the
//! column penalty and `F` the interaction lasso; row 0 of `D`, column 0 of `E` and the
//! border of `F` are pass-through.

mod factor;
mod path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use factor::FactorCache;
pub(crate) use path::run_chains;
pub use path::{
    alpha_grid, blockwise_zero, fit_path, fit_path_outcomes, lambda_grid, lambda_max,
    null_gradient,
};

use crate::coef::{flatten, unflatten, CoefficientMatrix};
use crate::design::{predict, DesignTensor};
use crate::error::{shape_mismatch, Error, Result};
use crate::penalty::{norm_value, prox, soft_threshold, PenaltyKind, PenaltySpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmOptions {
    pub rho0: f64,
    /// Primal tolerance; `None` means `1e-4 * sqrt((p1+1)(p2+1))`.
    #[serde(default)]
    pub eps_pri: Option<f64>,
    /// Dual tolerance; `None` means `1e-4 * sqrt((p1+1)(p2+1))`.
    #[serde(default)]
    pub eps_dual: Option<f64>,
    pub max_iter: usize,
    pub rho_adapt: bool,
    /// Interaction entries of `F` at or below this magnitude are outside the support.
    pub tol_support: f64,
    /// Record the objective at `B` every this many iterations.
    #[serde(default)]
    pub trace_every: Option<usize>,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            eps_pri: None,
            eps_dual: None,
            max_iter: 10_000,
            rho_adapt: true,
            tol_support: 1e-8,
            trace_every: None,
        }
    }
}

impl AdmmOptions {
    /// Options with both tolerances set to `eps`.
    pub fn with_tolerance(eps: f64) -> Self {
        Self {
            eps_pri: Some(eps),
            eps_dual: Some(eps),
            ..Self::default()
        }
    }

    pub fn resolved_tolerances(&self, p1: usize, p2: usize) -> (f64, f64) {
        let default = 1e-4 * (((p1 + 1) * (p2 + 1)) as f64).sqrt();
        (
            self.eps_pri.unwrap_or(default),
            self.eps_dual.unwrap_or(default),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.rho0) {
            return Err(Error::InvalidInput("rho0 must be positive".into()));
        }
        if self.eps_pri.is_some_and(|v| !positive(v)) || self.eps_dual.is_some_and(|v| !positive(v)) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        if !(self.tol_support >= 0.0) {
            return Err(Error::InvalidInput("tol_support must be >= 0".into()));
        }
        if self.trace_every == Some(0) {
            return Err(Error::InvalidInput("trace_every must be positive".into()));
        }
        Ok(())
    }
}

/// Primal, split and dual variables of the ADMM iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub b: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub gamma1: DMatrix<f64>,
    pub gamma2: DMatrix<f64>,
    pub gamma3: DMatrix<f64>,
    pub rho: f64,
    pub iter: usize,
    pub r_primal: f64,
    pub s_dual: f64,
}

impl AdmmState {
    pub fn zeros(p1: usize, p2: usize, rho: f64) -> Self {
        let z = DMatrix::zeros(p1 + 1, p2 + 1);
        Self {
            b: z.clone(),
            d: z.clone(),
            e: z.clone(),
            f: z.clone(),
            gamma1: z.clone(),
            gamma2: z.clone(),
            gamma3: z,
            rho,
            iter: 0,
            r_primal: 0.0,
            s_dual: 0.0,
        }
    }

    fn p1(&self) -> usize {
        self.b.nrows() - 1
    }

    fn p2(&self) -> usize {
        self.b.ncols() - 1
    }
}

/// Boolean support mask over the coefficient matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Support {
    pub p1: usize,
    pub p2: usize,
    /// Row-major `(p1+1) x (p2+1)` flags.
    pub cells: Vec<bool>,
}

impl Support {
    pub fn empty(p1: usize, p2: usize) -> Self {
        Self {
            p1,
            p2,
            cells: vec![false; (p1 + 1) * (p2 + 1)],
        }
    }

    pub fn full(p1: usize, p2: usize) -> Self {
        Self {
            p1,
            p2,
            cells: vec![true; (p1 + 1) * (p2 + 1)],
        }
    }

    /// Nonzero cells of `b` (intercept always included).
    pub fn from_nonzero(b: &CoefficientMatrix) -> Self {
        let mut s = Self::empty(b.p1(), b.p2());
        for j in 0..=b.p1() {
            for k in 0..=b.p2() {
                s.set(j, k, b[(j, k)] != 0.0);
            }
        }
        s.set(0, 0, true);
        s
    }

    pub fn get(&self, j: usize, k: usize) -> bool {
        self.cells[j * (self.p2 + 1) + k]
    }

    pub fn set(&mut self, j: usize, k: usize, v: bool) {
        self.cells[j * (self.p2 + 1) + k] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn interaction_count(&self) -> usize {
        (1..=self.p1)
            .flat_map(|j| (1..=self.p2).map(move |k| (j, k)))
            .filter(|&(j, k)| self.get(j, k))
            .count()
    }

    /// Interactions present without both of their main effects.
    pub fn heredity_violations(&self) -> Vec<(usize, usize)> {
        (1..=self.p1)
            .flat_map(|j| (1..=self.p2).map(move |k| (j, k)))
            .filter(|&(j, k)| self.get(j, k) && !(self.get(j, 0) && self.get(0, k)))
            .collect()
    }

    /// Zeroes every coefficient outside the support.
    pub fn mask(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(b.nrows(), b.ncols(), |j, k| if self.get(j, k) { b[(j, k)] } else { 0.0 })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub b_hat: CoefficientMatrix,
    pub support: Support,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub r_final: f64,
    pub s_final: f64,
    pub rho_final: f64,
    pub spec: PenaltySpec,
    /// Unpenalized fit on an underdetermined design: the solution is the
    /// minimum-norm interpolant.
    #[serde(default)]
    pub min_norm_interpolant: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<(usize, f64)>,
    /// Final iterate, kept for warm starts.
    #[serde(skip)]
    pub state: Option<AdmmState>,
}

impl FitResult {
    pub fn fitted(&self, design: &DesignTensor) -> Result<DVector<f64>> {
        predict(design, &self.b_hat)
    }
}

pub(crate) fn check_shapes(design: &DesignTensor, y: &DVector<f64>) -> Result<()> {
    if y.len() != design.n() {
        return Err(shape_mismatch("response length", design.n(), y.len()));
    }
    Ok(())
}

/// Penalty part of the objective.
pub fn penalty_value(b: &DMatrix<f64>, spec: &PenaltySpec) -> f64 {
    let (p1, p2) = (b.nrows() - 1, b.ncols() - 1);
    let mut total = 0.0;
    if spec.lambda1 != 0.0 {
        let mut row = vec![0.0; p2 + 1];
        let mut s = 0.0;
        for j in 1..=p1 {
            for k in 0..=p2 {
                row[k] = b[(j, k)];
            }
            s += norm_value(spec.row_kind, &row).unwrap_or(0.0);
        }
        total += spec.lambda1 * s;
    }
    if spec.lambda2 != 0.0 {
        let s: f64 = (1..=p2)
            .map(|k| norm_value(spec.col_kind, b.column(k).as_slice()).unwrap_or(0.0))
            .sum();
        total += spec.lambda2 * s;
    }
    if spec.lambda3 != 0.0 {
        let s: f64 = (1..=p1)
            .flat_map(|j| (1..=p2).map(move |k| (j, k)))
            .map(|idx| b[idx].abs())
            .sum();
        total += spec.lambda3 * s;
    }
    total
}

/// Penalized squared-error objective at `b`.
pub fn objective(
    b: &CoefficientMatrix,
    design: &DesignTensor,
    y: &DVector<f64>,
    spec: &PenaltySpec,
) -> Result<f64> {
    check_shapes(design, y)?;
    let resid = y - predict(design, b)?;
    let n = design.n() as f64;
    Ok(resid.norm_squared() / (2.0 * n) + penalty_value(b.as_matrix(), spec))
}

/// Objective of the weak-heredity formulation, evaluated for given `B^X`
/// (`p1 x (p2+1)`) and `B^Z` (`(p1+1) x p2`).
pub fn weak_objective(
    bx: &DMatrix<f64>,
    bz: &DMatrix<f64>,
    weak: &crate::design::WeakDesign,
    y: &DVector<f64>,
    spec: &PenaltySpec,
) -> Result<f64> {
    let (p1, p2) = (weak.p1, weak.p2);
    if bx.shape() != (p1, p2 + 1) {
        return Err(shape_mismatch("B^X", format!("{}x{}", p1, p2 + 1), format!("{:?}", bx.shape())));
    }
    if bz.shape() != (p1 + 1, p2) {
        return Err(shape_mismatch("B^Z", format!("{}x{}", p1 + 1, p2), format!("{:?}", bz.shape())));
    }
    if y.len() != weak.wx.nrows() {
        return Err(shape_mismatch("response length", weak.wx.nrows(), y.len()));
    }
    let vx = DVector::from_fn(p1 * (p2 + 1), |i, _| bx[(i / (p2 + 1), i % (p2 + 1))]);
    let vz = DVector::from_fn((p1 + 1) * p2, |i, _| bz[(i / p2, i % p2)]);
    let resid = y - &weak.wx * vx - &weak.wz * vz;
    let n = y.len() as f64;
    let rows: f64 = bx
        .row_iter()
        .map(|r| norm_value(spec.row_kind, &r.iter().copied().collect::<Vec<_>>()).unwrap_or(0.0))
        .sum();
    let cols: f64 = bz
        .column_iter()
        .map(|c| norm_value(spec.col_kind, c.as_slice()).unwrap_or(0.0))
        .sum();
    let inter: f64 = bx.columns(1, p2).iter().map(|v| v.abs()).sum::<f64>()
        + bz.rows(1, p1).iter().map(|v| v.abs()).sum::<f64>();
    Ok(resid.norm_squared() / (2.0 * n)
        + spec.lambda1 * rows
        + spec.lambda2 * cols
        + spec.lambda3 * inter)
}

/// Step 3(a): residual balancing of the penalty parameter.
pub fn update_rho(state: &AdmmState) -> f64 {
    let (r, s) = (state.r_primal, state.s_dual);
    if r > 10.0 * s {
        2.0 * state.rho
    } else if 10.0 * r < s {
        state.rho / 2.0
    } else {
        state.rho
    }
}

/// `3 rho M = rho (D+E+F) - (G1+G2+G3)`, the consensus target of the B-step scaled by `3 rho`.
pub fn consensus_target_scaled(state: &AdmmState) -> DMatrix<f64> {
    (&state.d + &state.e + &state.f) * state.rho - (&state.gamma1 + &state.gamma2 + &state.gamma3)
}

/// Step 3(b): exact minimizer of `(1/2n)||y - W*B||^2 + (3 rho/2)||M - B||_F^2`.
///
/// `wty_n` is `W'y/n` in flattened order.
pub fn update_b(state: &AdmmState, cache: &FactorCache, wty_n: &DVector<f64>) -> DMatrix<f64> {
    let (p1, p2) = (state.p1(), state.p2());
    let rhs = wty_n + flatten(&consensus_target_scaled(state));
    let x = cache.solve_shifted(&rhs, 1.0, 3.0 * state.rho);
    unflatten(p1, p2, x.as_slice())
}

/// Step 3(c): row-wise prox for `D` and column-wise prox for `E`.
pub fn update_de(state: &AdmmState, spec: &PenaltySpec) -> (DMatrix<f64>, DMatrix<f64>) {
    let (p1, p2) = (state.p1(), state.p2());
    let rho = state.rho;
    let mut d = &state.b + &state.gamma1 / rho;
    let mut e = &state.b + &state.gamma2 / rho;
    if spec.row_kind != PenaltyKind::None {
        let lam = spec.lambda1 / rho;
        let mut row = vec![0.0; p2 + 1];
        for j in 1..=p1 {
            for k in 0..=p2 {
                row[k] = d[(j, k)];
            }
            let out = prox(spec.row_kind, &row, lam);
            for k in 0..=p2 {
                d[(j, k)] = out[k];
            }
        }
    }
    if spec.col_kind != PenaltyKind::None {
        let lam = spec.lambda2 / rho;
        for k in 1..=p2 {
            let out = prox(spec.col_kind, e.column(k).as_slice(), lam);
            e.column_mut(k).copy_from_slice(&out);
        }
    }
    (d, e)
}

/// Step 3(d): soft-threshold the interior of `B + G3/rho`, copy the border.
pub fn update_f(state: &AdmmState, lambda3: f64) -> DMatrix<f64> {
    let mut f = &state.b + &state.gamma3 / state.rho;
    let t = lambda3 / state.rho;
    for j in 1..f.nrows() {
        for k in 1..f.ncols() {
            f[(j, k)] = soft_threshold(f[(j, k)], t);
        }
    }
    f
}

/// Step 3(e): dual ascent on the three consensus constraints.
pub fn update_duals(state: &AdmmState) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let rho = state.rho;
    (
        &state.gamma1 + (&state.b - &state.d) * rho,
        &state.gamma2 + (&state.b - &state.e) * rho,
        &state.gamma3 + (&state.b - &state.f) * rho,
    )
}

/// Primal residual `||(B|B|B) - (D|E|F)||_F` and dual residual
/// `rho ||(D|E|F) - (D|E|F)_prev||_F`, both at the state's current `rho`.
pub fn residuals(
    state: &AdmmState,
    prev_d: &DMatrix<f64>,
    prev_e: &DMatrix<f64>,
    prev_f: &DMatrix<f64>,
) -> (f64, f64) {
    let r = ((&state.b - &state.d).norm_squared()
        + (&state.b - &state.e).norm_squared()
        + (&state.b - &state.f).norm_squared())
    .sqrt();
    let s = state.rho
        * ((&state.d - prev_d).norm_squared()
            + (&state.e - prev_e).norm_squared()
            + (&state.f - prev_f).norm_squared())
        .sqrt();
    (r, s)
}

/// Support read off the split variables.
///
/// A main effect `(j,0)` is in the support when row `j` of `D` is not the zero
/// vector, `(0,k)` when column `k` of `E` is not, and an interaction needs both of
/// those plus `|F[j,k]| > tol_support`. For elementwise (`l1`) kinds the row/column
/// test is applied to the single entry instead of the whole group. Cells listed in
/// `masked` are never in the support.
///
/// A block whose Euclidean norm is at most `block_tol` counts as zero. When the
/// zero-check of a block holds with equality the iterates approach zero only
/// linearly and never reach it exactly, so a finished fit passes its primal
/// tolerance here; `0.0` gives the exact test.
pub fn extract_support(
    state: &AdmmState,
    spec: &PenaltySpec,
    tol_support: f64,
    block_tol: f64,
    masked: impl Fn(usize, usize) -> bool,
) -> Support {
    let (p1, p2) = (state.p1(), state.p2());
    let row_nonzero: Vec<bool> = (0..=p1)
        .map(|j| j == 0 || state.d.row(j).norm() > block_tol)
        .collect();
    let col_nonzero: Vec<bool> = (0..=p2)
        .map(|k| k == 0 || state.e.column(k).norm() > block_tol)
        .collect();
    let row_active = |j: usize, k: usize| {
        if spec.row_kind == PenaltyKind::L1 && j > 0 {
            state.d[(j, k)].abs() > block_tol
        } else {
            row_nonzero[j]
        }
    };
    let col_active = |j: usize, k: usize| {
        if spec.col_kind == PenaltyKind::L1 && k > 0 {
            state.e[(j, k)].abs() > block_tol
        } else {
            col_nonzero[k]
        }
    };
    let mut s = Support::empty(p1, p2);
    s.set(0, 0, true);
    for j in 1..=p1 {
        s.set(j, 0, row_active(j, 0) && !masked(j, 0));
    }
    for k in 1..=p2 {
        s.set(0, k, col_active(0, k) && !masked(0, k));
    }
    for j in 1..=p1 {
        for k in 1..=p2 {
            let on = row_active(j, k)
                && col_active(j, k)
                && state.f[(j, k)].abs() > tol_support
                && !masked(j, k);
            s.set(j, k, on);
        }
    }
    s
}

/// The B-step of a particular loss.
pub(crate) trait BStep {
    fn update(&mut self, state: &AdmmState) -> DMatrix<f64>;

    /// `false` when the update only decreases a surrogate. Convergence then also
    /// requires the B iterate to stop moving, since shrinking `rho` can drive both
    /// residuals to zero while B is still far from the optimum.
    fn exact(&self) -> bool {
        true
    }
}

struct SquaredLossStep<'a> {
    cache: &'a FactorCache,
    wty_n: DVector<f64>,
}

impl BStep for SquaredLossStep<'_> {
    fn update(&mut self, state: &AdmmState) -> DMatrix<f64> {
        update_b(state, self.cache, &self.wty_n)
    }
}

/// Runs the ADMM loop from `warm` (or zeros) until both residuals drop below tolerance
/// or the iteration budget runs out. Never fails; check `converged`.
pub(crate) fn run_admm(
    design: &DesignTensor,
    spec: &PenaltySpec,
    opts: &AdmmOptions,
    warm: Option<AdmmState>,
    step: &mut dyn BStep,
    objective_at: &dyn Fn(&CoefficientMatrix) -> f64,
) -> FitResult {
    let (p1, p2) = (design.p1(), design.p2());
    let (eps_pri, eps_dual) = opts.resolved_tolerances(p1, p2);
    let mut state = match warm {
        Some(mut s) if s.b.shape() == (p1 + 1, p2 + 1) => {
            s.iter = 0;
            s
        }
        _ => AdmmState::zeros(p1, p2, opts.rho0),
    };
    let mut trace = Vec::new();
    let mut converged = false;
    for it in 1..=opts.max_iter {
        if opts.rho_adapt {
            state.rho = update_rho(&state);
        }
        let new_b = step.update(&state);
        let movement = if step.exact() { 0.0 } else { (&new_b - &state.b).norm() };
        state.b = new_b;
        let (d, e) = update_de(&state, spec);
        let f = update_f(&state, spec.lambda3);
        let prev_d = std::mem::replace(&mut state.d, d);
        let prev_e = std::mem::replace(&mut state.e, e);
        let prev_f = std::mem::replace(&mut state.f, f);
        let (g1, g2, g3) = update_duals(&state);
        state.gamma1 = g1;
        state.gamma2 = g2;
        state.gamma3 = g3;
        let (r, s) = residuals(&state, &prev_d, &prev_e, &prev_f);
        state.r_primal = r;
        state.s_dual = s;
        state.iter = it;
        if let Some(every) = opts.trace_every {
            if it % every == 0 {
                let b = CoefficientMatrix::from_matrix(state.b.clone())
                    .unwrap_or_else(|_| CoefficientMatrix::zeros(p1, p2));
                trace.push((it, objective_at(&b)));
            }
        }
        if r <= eps_pri && s <= eps_dual && movement <= eps_pri {
            converged = true;
            break;
        }
        if !r.is_finite() || !s.is_finite() {
            break;
        }
    }
    finish(design, spec, opts, state, converged, trace, objective_at)
}

fn finish(
    design: &DesignTensor,
    spec: &PenaltySpec,
    opts: &AdmmOptions,
    state: AdmmState,
    converged: bool,
    objective_trace: Vec<(usize, f64)>,
    objective_at: &dyn Fn(&CoefficientMatrix) -> f64,
) -> FitResult {
    let (eps_pri, _) = opts.resolved_tolerances(design.p1(), design.p2());
    let support = extract_support(&state, spec, opts.tol_support, eps_pri, |j, k| design.is_masked(j, k));
    let masked = support.mask(&state.b);
    let b_hat = CoefficientMatrix::from_matrix(masked)
        .unwrap_or_else(|_| CoefficientMatrix::zeros(design.p1(), design.p2()));
    let objective = objective_at(&b_hat);
    FitResult {
        b_hat,
        support,
        objective,
        iterations: state.iter,
        converged,
        r_final: state.r_primal,
        s_final: state.s_dual,
        rho_final: state.rho,
        spec: *spec,
        min_norm_interpolant: spec.all_zero() && design.n() < design.n_columns(),
        objective_trace,
        state: Some(state),
    }
}

/// Intercept-only fit when the null model provably solves the problem, which the
/// iterations would otherwise only approach when a zero-check holds with equality.
/// Both losses share the null gradient `W'(y - ybar)/n`; `intercept` is the loss's
/// null-model intercept.
pub(crate) fn certified_null_fit(
    design: &DesignTensor,
    y: &DVector<f64>,
    spec: &PenaltySpec,
    opts: &AdmmOptions,
    intercept: f64,
    objective_at: &dyn Fn(&CoefficientMatrix) -> f64,
) -> Result<Option<FitResult>> {
    if spec.all_zero() || !intercept.is_finite() {
        return Ok(None);
    }
    let mut g = path::null_gradient(design, y)?;
    for j in 0..=design.p1() {
        for k in 0..=design.p2() {
            if design.is_masked(j, k) {
                g[(j, k)] = 0.0;
            }
        }
    }
    if !blockwise_zero(&g, spec) {
        return Ok(None);
    }
    let mut state = AdmmState::zeros(design.p1(), design.p2(), opts.rho0);
    for m in [&mut state.b, &mut state.d, &mut state.e, &mut state.f] {
        m[(0, 0)] = intercept;
    }
    Ok(Some(finish(design, spec, opts, state, true, Vec::new(), objective_at)))
}

/// `W'y / n` in flattened order.
pub(crate) fn design_cross(design: &DesignTensor, y: &DVector<f64>) -> DVector<f64> {
    design.data().tr_mul(y) / design.n() as f64
}

/// Fits the squared-error problem, reusing a prebuilt factorization.
///
/// Returns the result even when the iteration budget is exhausted; see
/// [`admm_fit`] for the strict variant.
pub fn admm_fit_cached(
    design: &DesignTensor,
    cache: &FactorCache,
    y: &DVector<f64>,
    spec: &PenaltySpec,
    opts: &AdmmOptions,
    warm: Option<AdmmState>,
) -> Result<FitResult> {
    check_shapes(design, y)?;
    opts.validate()?;
    if cache.n_columns() != design.n_columns() {
        return Err(shape_mismatch("factor cache columns", design.n_columns(), cache.n_columns()));
    }
    let obj = |b: &CoefficientMatrix| objective(b, design, y, spec).unwrap_or(f64::NAN);
    if spec.all_zero() {
        // Unpenalized: the fixed point from a zero start is the minimum-norm least-squares fit.
        let b = unflatten(design.p1(), design.p2(), cache.pseudo_inverse_solve(y).as_slice());
        let mut state = AdmmState::zeros(design.p1(), design.p2(), opts.rho0);
        state.d = b.clone();
        state.e = b.clone();
        state.f = b.clone();
        state.b = b;
        return Ok(finish(design, spec, opts, state, true, Vec::new(), &obj));
    }
    if let Some(fit) = certified_null_fit(design, y, spec, opts, y.mean(), &obj)? {
        return Ok(fit);
    }
    let mut step = SquaredLossStep {
        cache,
        wty_n: design_cross(design, y),
    };
    Ok(run_admm(design, spec, opts, warm, &mut step, &obj))
}

/// Fits the squared-error problem; non-convergence is an error carrying the partial fit.
pub fn admm_fit(
    design: &DesignTensor,
    y: &DVector<f64>,
    spec: &PenaltySpec,
    opts: &AdmmOptions,
    warm: Option<AdmmState>,
) -> Result<FitResult> {
    check_shapes(design, y)?;
    let cache = FactorCache::new(design)?;
    let fit = admm_fit_cached(design, &cache, y, spec, opts, warm)?;
    if fit.converged {
        Ok(fit)
    } else {
        Err(Error::NotConverged(Box::new(fit)))
    }
}

#[cfg(test)]
mod tests;
