use super::*;
use crate::design::{build_design, Dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_problem(seed: u64, n: usize, p1: usize, p2: usize) -> (DesignTensor, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p1, |_, _| rng.random_range(-1.0..1.0));
    let z = DMatrix::from_fn(n, p2, |_, _| rng.random_range(-1.0..1.0));
    let y = DVector::from_fn(n, |i, _| {
        1.0 + 2.0 * x[(i, 0)] - z[(i, 0)] + 1.5 * x[(i, 0)] * z[(i, 0)] + rng.random_range(-0.5..0.5)
    });
    (build_design(&Dataset::new(x, z, y.clone()).unwrap()), y)
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn random_state(seed: u64, p1: usize, p2: usize) -> AdmmState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = AdmmState::zeros(p1, p2, 0.7);
    s.b = random_matrix(&mut rng, p1 + 1, p2 + 1);
    s.d = random_matrix(&mut rng, p1 + 1, p2 + 1);
    s.e = random_matrix(&mut rng, p1 + 1, p2 + 1);
    s.f = random_matrix(&mut rng, p1 + 1, p2 + 1);
    s.gamma1 = random_matrix(&mut rng, p1 + 1, p2 + 1);
    s.gamma2 = random_matrix(&mut rng, p1 + 1, p2 + 1);
    s.gamma3 = random_matrix(&mut rng, p1 + 1, p2 + 1);
    s
}

fn ols_fitted(design: &DesignTensor, y: &DVector<f64>) -> DVector<f64> {
    let w = design.data();
    let beta = (w.tr_mul(w)).cholesky().unwrap().solve(&w.tr_mul(y));
    w * beta
}

#[test]
fn objective_at_zero_is_half_mean_square() {
    let (w, y) = random_problem(1, 20, 2, 2);
    let spec = PenaltySpec::new(PenaltyKind::GroupL2, 0.3, 0.2, 0.1).unwrap();
    let obj = objective(&CoefficientMatrix::zeros(2, 2), &w, &y, &spec).unwrap();
    assert!((obj - y.norm_squared() / 40.0).abs() < 1e-12);
}

#[test]
fn objective_matches_termwise_evaluation() {
    let (w, y) = random_problem(2, 15, 2, 2);
    let b = DMatrix::from_row_slice(3, 3, &[0.5, -1.0, 2.0, 0.3, 0.0, -0.4, 1.2, 0.7, 0.1]);
    let spec = PenaltySpec::new(PenaltyKind::GroupL2, 0.3, 0.2, 0.1).unwrap();
    let cm = CoefficientMatrix::from_matrix(b.clone()).unwrap();
    let mut fitted = DVector::zeros(15);
    let x = |i: usize, j: usize| w.data()[(i, w.column_index(j, 0))];
    let z = |i: usize, k: usize| w.data()[(i, w.column_index(0, k))];
    for i in 0..15 {
        let xi = [1.0, x(i, 1), x(i, 2)];
        let zi = [1.0, z(i, 1), z(i, 2)];
        for j in 0..3 {
            for k in 0..3 {
                fitted[i] += b[(j, k)] * xi[j] * zi[k];
            }
        }
    }
    let loss = (&y - fitted).norm_squared() / 30.0;
    let row = |j: usize| (0..3).map(|k| b[(j, k)].powi(2)).sum::<f64>().sqrt();
    let col = |k: usize| (0..3).map(|j| b[(j, k)].powi(2)).sum::<f64>().sqrt();
    let inter = b[(1, 1)].abs() + b[(1, 2)].abs() + b[(2, 1)].abs() + b[(2, 2)].abs();
    let expected = loss + 0.3 * (row(1) + row(2)) + 0.2 * (col(1) + col(2)) + 0.1 * inter;
    let got = objective(&cm, &w, &y, &spec).unwrap();
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
}

#[test]
fn objective_rejects_wrong_response_length() {
    let (w, _) = random_problem(3, 10, 2, 2);
    let spec = PenaltySpec::new(PenaltyKind::GroupL2, 0.0, 0.0, 0.0).unwrap();
    let err = objective(&CoefficientMatrix::zeros(2, 2), &w, &DVector::zeros(9), &spec);
    assert!(matches!(err, Err(Error::ShapeMismatch { .. })));
}

#[test]
fn rho_update_rules() {
    let mut s = AdmmState::zeros(1, 1, 1.0);
    s.r_primal = 1.0;
    s.s_dual = 0.05;
    assert_eq!(update_rho(&s), 2.0);
    s.s_dual = 1.0;
    assert_eq!(update_rho(&s), 1.0);
    s.r_primal = 0.01;
    assert_eq!(update_rho(&s), 0.5);
}

#[test]
fn b_update_matches_dense_solve() {
    let (w, y) = random_problem(4, 12, 2, 3);
    let cache = FactorCache::new(&w).unwrap();
    let state = random_state(5, 2, 3);
    let n = 12.0;
    let b = update_b(&state, &cache, &design_cross(&w, &y));
    let m = flatten(&consensus_target_scaled(&state));
    let a = w.data().tr_mul(w.data()) / n + DMatrix::identity(w.n_columns(), w.n_columns()) * (3.0 * state.rho);
    let direct = a.lu().solve(&(w.data().tr_mul(&y) / n + m)).unwrap();
    let rel = (flatten(&b) - &direct).norm() / direct.norm();
    assert!(rel < 1e-8, "{rel}");
}

#[test]
fn b_update_limits() {
    let (w, y) = random_problem(6, 60, 2, 2);
    let cache = FactorCache::new(&w).unwrap();
    let wty = design_cross(&w, &y);
    let mut state = random_state(7, 2, 2);
    state.rho = 1e9;
    let target = consensus_target_scaled(&state) / (3.0 * state.rho);
    let b = update_b(&state, &cache, &wty);
    assert!((&b - &target).amax() < 1e-6);

    state.rho = 1e-12;
    state.gamma1.fill(0.0);
    state.gamma2.fill(0.0);
    state.gamma3.fill(0.0);
    let b = update_b(&state, &cache, &wty);
    let w_d = w.data();
    let ols = (w_d.tr_mul(w_d)).cholesky().unwrap().solve(&w_d.tr_mul(&y));
    assert!((flatten(&b) - ols).amax() < 1e-4);
}

#[test]
fn de_update_passes_through_at_zero_lambda() {
    let state = random_state(8, 3, 2);
    let spec = PenaltySpec::new(PenaltyKind::Linf, 0.0, 0.0, 0.0).unwrap();
    let (d, e) = update_de(&state, &spec);
    assert!((&d - (&state.b + &state.gamma1 / state.rho)).amax() < 1e-15);
    assert!((&e - (&state.b + &state.gamma2 / state.rho)).amax() < 1e-15);
}

#[test]
fn de_update_zeroes_rows_under_the_dual_test() {
    let mut state = random_state(9, 2, 2);
    state.gamma1.fill(0.0);
    state.b.row_mut(1).copy_from_slice(&[0.1, -0.05, 0.02]);
    let lam1 = 0.5;
    let spec = PenaltySpec::new(PenaltyKind::GroupL2, lam1, 0.0, 0.0).unwrap();
    let (d, _) = update_de(&state, &spec);
    assert!(d.row(1).iter().all(|v| *v == 0.0));
    // pass-through row 0 and each row solves its own prox
    assert_eq!(d.row(0), state.b.row(0));
    let y: Vec<f64> = state.b.row(2).iter().copied().collect();
    let expect = prox(PenaltyKind::GroupL2, &y, lam1 / state.rho);
    let got: Vec<f64> = d.row(2).iter().copied().collect();
    assert_eq!(got, expect);
}

#[test]
fn hybrid_rows_lead_with_main_effect() {
    let mut state = random_state(10, 2, 3);
    state.gamma2.fill(0.0);
    let spec = PenaltySpec::new(PenaltyKind::HybridL1Linf, 0.0, 0.3, 0.0).unwrap();
    let (_, e) = update_de(&state, &spec);
    for k in 1..=3 {
        let y: Vec<f64> = state.b.column(k).iter().copied().collect();
        let expect = prox_hybrid_ref(&y, 0.3 / state.rho);
        assert_eq!(e.column(k).as_slice(), expect.as_slice());
    }
}

fn prox_hybrid_ref(y: &[f64], lam: f64) -> Vec<f64> {
    crate::penalty::prox_hybrid(y, lam)
}

#[test]
fn f_update_is_elementwise_soft_threshold() {
    let state = random_state(11, 3, 3);
    let f = update_f(&state, 0.4);
    let v = &state.b + &state.gamma3 / state.rho;
    for j in 0..4 {
        for k in 0..4 {
            let expect = if j == 0 || k == 0 {
                v[(j, k)]
            } else {
                soft_threshold(v[(j, k)], 0.4 / state.rho)
            };
            assert_eq!(f[(j, k)], expect);
        }
    }
    let f0 = update_f(&state, 0.0);
    assert_eq!(f0, v);
}

#[test]
fn dual_update_formula() {
    let state = random_state(12, 2, 2);
    let (g1, g2, g3) = update_duals(&state);
    assert_eq!(g1, &state.gamma1 + (&state.b - &state.d) * state.rho);
    assert_eq!(g2, &state.gamma2 + (&state.b - &state.e) * state.rho);
    assert_eq!(g3, &state.gamma3 + (&state.b - &state.f) * state.rho);
    let mut same = state.clone();
    same.d = same.b.clone();
    same.e = same.b.clone();
    same.f = same.b.clone();
    let (h1, h2, h3) = update_duals(&same);
    assert_eq!((h1, h2, h3), (same.gamma1, same.gamma2, same.gamma3));
}

#[test]
fn residual_definitions() {
    let mut s = AdmmState::zeros(2, 2, 1.0);
    s.b = DMatrix::from_element(3, 3, 2.0);
    let z = DMatrix::zeros(3, 3);
    let (r, sd) = residuals(&s, &z, &z, &z);
    assert!((r - 3f64.sqrt() * s.b.norm()).abs() < 1e-12);
    assert_eq!(sd, 0.0);

    let st = random_state(13, 2, 3);
    let prev = random_state(14, 2, 3);
    let (r, sd) = residuals(&st, &prev.d, &prev.e, &prev.f);
    let direct_r = ((&st.b - &st.d).norm_squared() + (&st.b - &st.e).norm_squared() + (&st.b - &st.f).norm_squared()).sqrt();
    let direct_s = st.rho
        * ((&st.d - &prev.d).norm_squared() + (&st.e - &prev.e).norm_squared() + (&st.f - &prev.f).norm_squared()).sqrt();
    assert!((r - direct_r).abs() < 1e-12 && (sd - direct_s).abs() < 1e-12);
}

#[test]
fn support_rules() {
    let spec = PenaltySpec::new(PenaltyKind::GroupL2, 1.0, 1.0, 1.0).unwrap();
    let mut s = random_state(15, 2, 2);
    let full = extract_support(&s, &spec, 1e-8, 0.0, |_, _| false);
    assert_eq!(full, Support::full(2, 2));
    s.d.row_mut(1).fill(0.0);
    let sup = extract_support(&s, &spec, 1e-8, 0.0, |_, _| false);
    for k in 0..=2 {
        assert!(!sup.get(1, k));
    }
    assert!(sup.get(2, 1) && sup.get(0, 0));
    s.f[(2, 2)] = 1e-9;
    let sup = extract_support(&s, &spec, 1e-8, 0.0, |_, _| false);
    assert!(!sup.get(2, 2));
    let sup = extract_support(&s, &spec, 1e-8, 0.0, |j, k| j == k && j > 0);
    assert!(!sup.get(2, 2) && !sup.get(1, 1));
}

#[test]
fn blocks_below_block_tolerance_are_zero() {
    let spec = PenaltySpec::new(PenaltyKind::GroupL2, 1.0, 1.0, 1.0).unwrap();
    let mut s = random_state(17, 2, 2);
    let shrink = 1e-6 / s.e.column(2).norm();
    s.e.column_mut(2).scale_mut(shrink);
    assert!(extract_support(&s, &spec, 1e-8, 0.0, |_, _| false).get(0, 2));
    let sup = extract_support(&s, &spec, 1e-8, 2e-6, |_, _| false);
    assert!(!sup.get(0, 2) && !sup.get(1, 2) && sup.get(0, 1));
}

#[test]
fn null_model_is_returned_exactly_at_lambda_max() {
    let (w, y) = random_problem(18, 60, 3, 3);
    for kind in [PenaltyKind::GroupL2, PenaltyKind::Linf, PenaltyKind::HybridL1Linf] {
        let lmax = lambda_max(&w, &y, kind, 0.5).unwrap();
        let at = PenaltySpec::reparametrized(kind, 0.5, lmax, 3, 3).unwrap();
        let fit = admm_fit(&w, &y, &at, &AdmmOptions::default(), None).unwrap();
        assert_eq!(fit.support.count(), 1);
        assert_eq!(fit.iterations, 0);
        assert!((fit.b_hat.as_matrix()[(0, 0)] - y.mean()).abs() < 1e-12);
        let below = PenaltySpec::reparametrized(kind, 0.5, 0.9 * lmax, 3, 3).unwrap();
        assert!(admm_fit(&w, &y, &below, &AdmmOptions::default(), None).unwrap().iterations > 0);
    }
}

#[test]
fn unpenalized_fit_reproduces_least_squares() {
    let (w, y) = random_problem(16, 50, 2, 3);
    let spec = PenaltySpec::new(PenaltyKind::GroupL2, 0.0, 0.0, 0.0).unwrap();
    let fit = admm_fit(&w, &y, &spec, &AdmmOptions::default(), None).unwrap();
    let diff = (fit.fitted(&w).unwrap() - ols_fitted(&w, &y)).amax();
    assert!(diff < 1e-5, "{diff}");
    assert!(!fit.min_norm_interpolant);
}

#[test]
fn iterative_solve_with_tiny_penalty_approaches_least_squares() {
    let (w, y) = random_problem(17, 50, 2, 2);
    let spec = PenaltySpec::new(PenaltyKind::GroupL2, 1e-9, 1e-9, 1e-9).unwrap();
    let fit = admm_fit(&w, &y, &spec, &AdmmOptions::with_tolerance(1e-8), None).unwrap();
    let diff = (fit.fitted(&w).unwrap() - ols_fitted(&w, &y)).amax();
    assert!(diff < 1e-5, "{diff}");
}

#[test]
fn underdetermined_unpenalized_fit_interpolates() {
    let (w, y) = random_problem(18, 8, 3, 3);
    let spec = PenaltySpec::new(PenaltyKind::GroupL2, 0.0, 0.0, 0.0).unwrap();
    let fit = admm_fit(&w, &y, &spec, &AdmmOptions::default(), None).unwrap();
    assert!(fit.min_norm_interpolant);
    assert!((fit.fitted(&w).unwrap() - &y).amax() < 1e-8);
}

#[test]
fn converged_fits_reach_consensus_and_heredity() {
    let (w, y) = random_problem(19, 60, 3, 3);
    for kind in [PenaltyKind::GroupL2, PenaltyKind::Linf, PenaltyKind::HybridL1Linf] {
        let spec = PenaltySpec::new(kind, 0.1, 0.1, 0.05).unwrap();
        let opts = AdmmOptions::default();
        let fit = admm_fit(&w, &y, &spec, &opts, None).unwrap();
        let st = fit.state.as_ref().unwrap();
        let (eps, _) = opts.resolved_tolerances(3, 3);
        let worst = (&st.b - &st.d).norm().max((&st.b - &st.e).norm()).max((&st.b - &st.f).norm());
        assert!(worst <= eps);
        assert!(fit.support.heredity_violations().is_empty());
        let zero = objective(&CoefficientMatrix::zeros(3, 3), &w, &y, &spec).unwrap();
        assert!(fit.objective <= zero);
    }
}

#[test]
fn fits_are_bitwise_reproducible() {
    let (w, y) = random_problem(20, 40, 3, 2);
    let spec = PenaltySpec::new(PenaltyKind::Linf, 0.05, 0.05, 0.02).unwrap();
    let a = admm_fit(&w, &y, &spec, &AdmmOptions::default(), None).unwrap();
    let b = admm_fit(&w, &y, &spec, &AdmmOptions::default(), None).unwrap();
    assert_eq!(a.b_hat, b.b_hat);
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn tighter_tolerance_moves_fitted_values_little() {
    let (w, y) = random_problem(21, 60, 3, 3);
    let spec = PenaltySpec::new(PenaltyKind::GroupL2, 0.05, 0.05, 0.02).unwrap();
    let eps = 1e-5;
    let a = admm_fit(&w, &y, &spec, &AdmmOptions::with_tolerance(eps), None).unwrap();
    let b = admm_fit(&w, &y, &spec, &AdmmOptions::with_tolerance(eps / 10.0), None).unwrap();
    let moved = (a.fitted(&w).unwrap() - b.fitted(&w).unwrap()).amax();
    assert!(moved < 10.0 * eps, "{moved}");
}

#[test]
fn path_singleton_matches_direct_fit() {
    let (w, y) = random_problem(22, 40, 2, 2);
    let spec = PenaltySpec::reparametrized(PenaltyKind::GroupL2, 0.5, 0.05, 2, 2).unwrap();
    let opts = AdmmOptions::default();
    let path = fit_path(&w, &y, &[spec], &opts).unwrap();
    let direct = admm_fit(&w, &y, &spec, &opts, None).unwrap();
    assert_eq!(path[0].b_hat, direct.b_hat);
}

#[test]
fn warm_and_cold_starts_agree() {
    let (w, y) = random_problem(23, 60, 3, 3);
    let lmax = lambda_max(&w, &y, PenaltyKind::GroupL2, 0.5).unwrap();
    let grid: Vec<PenaltySpec> = lambda_grid(lmax, 6, 1e-2)
        .into_iter()
        .rev()
        .map(|l| PenaltySpec::reparametrized(PenaltyKind::GroupL2, 0.5, l, 3, 3).unwrap())
        .collect();
    let opts = AdmmOptions::with_tolerance(1e-7);
    let path = fit_path(&w, &y, &grid, &opts).unwrap();
    for (spec, warm) in grid.iter().zip(&path) {
        assert_eq!(warm.spec, *spec);
        let cold = admm_fit(&w, &y, spec, &opts, None).unwrap();
        let rel = (warm.objective - cold.objective).abs() / cold.objective.abs();
        assert!(rel < 1e-5, "{rel}");
    }
}

#[test]
fn lambda_max_gives_intercept_only_model() {
    let (w, y) = random_problem(24, 50, 3, 3);
    for kind in [PenaltyKind::GroupL2, PenaltyKind::Linf, PenaltyKind::HybridL1Linf, PenaltyKind::L1] {
        let lmax = lambda_max(&w, &y, kind, 0.3).unwrap();
        let spec = PenaltySpec::reparametrized(kind, 0.3, lmax * 1.001, 3, 3).unwrap();
        let fit = admm_fit(&w, &y, &spec, &AdmmOptions::with_tolerance(1e-7), None).unwrap();
        assert_eq!(fit.support.count(), 1, "{kind}");
        assert!((fit.b_hat[(0, 0)] - y.mean()).abs() < 1e-5);
        let below = PenaltySpec::reparametrized(kind, 0.3, lmax * 0.7, 3, 3).unwrap();
        let fit = admm_fit(&w, &y, &below, &AdmmOptions::default(), None).unwrap();
        assert!(fit.support.count() > 1, "{kind}");
    }
}

#[test]
fn grids_have_expected_shape() {
    let a = alpha_grid();
    assert_eq!(a.len(), 10);
    assert!((a[0] - 0.05).abs() < 1e-12 && (a[9] - 0.95).abs() < 1e-12);
    let l = lambda_grid(2.0, 50, 1e-3);
    assert_eq!(l.len(), 50);
    assert_eq!(l[0], 2.0);
    assert!((l[49] - 2e-3).abs() < 1e-15);
}

#[test]
fn fit_result_serializes() {
    let (w, y) = random_problem(25, 30, 2, 2);
    let spec = PenaltySpec::new(PenaltyKind::GroupL2, 0.1, 0.1, 0.1).unwrap();
    let fit = admm_fit(&w, &y, &spec, &AdmmOptions::default(), None).unwrap();
    let json = serde_json::to_value(&fit).unwrap();
    for key in ["b_hat", "support", "objective", "iterations", "r_final", "s_final", "spec"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

#[test]
fn non_convergence_is_reported_with_partial_fit() {
    let (w, y) = random_problem(26, 30, 2, 2);
    let spec = PenaltySpec::new(PenaltyKind::GroupL2, 0.1, 0.1, 0.1).unwrap();
    let opts = AdmmOptions {
        max_iter: 2,
        ..AdmmOptions::with_tolerance(1e-12)
    };
    match admm_fit(&w, &y, &spec, &opts, None) {
        Err(Error::NotConverged(fit)) => assert_eq!(fit.iterations, 2),
        other => panic!("expected NotConverged, got {other:?}"),
    }
}
