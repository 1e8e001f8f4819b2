//! Small-scale checks of the fitting routines against independent references.

mod common;

use common::{gaussian_matrix, gaussian_vector, model_objective, ols_fitted, raw_fitted};
use heredity::glm::{admm_fit_logistic, Family};
use heredity::postfit::relax_refit;
use heredity::solver::{lambda_grid, lambda_max};
use heredity::{admm_fit, build_design, AdmmOptions, Dataset, PenaltyKind, PenaltySpec};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, n: usize, p1: usize, p2: usize) -> (Dataset, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian_matrix(n, p1, &mut rng);
    let z = gaussian_matrix(n, p2, &mut rng);
    let noise = gaussian_vector(n, &mut rng);
    let y = DVector::from_fn(n, |i, _| 1.0 + 2.0 * x[(i, 0)] - z[(i, 0)] + 1.5 * x[(i, 0)] * z[(i, 0)] + 0.5 * noise[i]);
    (Dataset::new(x, z, y.clone()).unwrap(), y)
}

#[test]
fn unpenalized_fit_reproduces_least_squares() {
    let (data, y) = instance(1, 60, 2, 3);
    let w = build_design(&data);
    let spec = PenaltySpec::new(PenaltyKind::GroupL2, 0.0, 0.0, 0.0).unwrap();
    let fit = admm_fit(&w, &y, &spec, &AdmmOptions::with_tolerance(1e-9), None).unwrap();
    assert!(fit.converged);
    let diff = (fit.fitted(&w).unwrap() - ols_fitted(w.data(), &y)).amax();
    assert!(diff < 1e-6, "{diff}");
}

#[test]
fn fits_are_not_improved_by_small_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (i, name) in ["l2", "linf", "hybrid", "l1"].iter().enumerate() {
        let (data, y) = instance(10 + i as u64, 50, 3, 3);
        let w = build_design(&data);
        let kind: PenaltyKind = name.parse().unwrap();
        let spec = PenaltySpec::new(kind, 0.1, 0.15, 0.05).unwrap();
        let fit = admm_fit(&w, &y, &spec, &AdmmOptions::with_tolerance(1e-9), None).unwrap();
        assert!(fit.converged, "{name}");
        let b = fit.b_hat.as_matrix();
        let at = |m: &nalgebra::DMatrix<f64>| model_objective(m, &data.x, &data.z, &y, name, 0.1, 0.15, 0.05);
        let base = at(b);
        for _ in 0..500 {
            let scale = 10f64.powf(rng.random_range(-6.0..-1.0));
            let trial = b.map(|v| v + scale * rng.random_range(-1.0..1.0));
            assert!(at(&trial) >= base - 1e-9, "{name}: perturbation lowers the objective");
        }
        assert!((fit.objective - base).abs() < 1e-9 * (1.0 + base));
    }
}

#[test]
fn fitted_values_are_stable_across_tolerances() {
    let (data, y) = instance(3, 80, 4, 4);
    let w = build_design(&data);
    let spec = PenaltySpec::new(PenaltyKind::GroupL2, 0.05, 0.05, 0.02).unwrap();
    let eps = 1e-6;
    let coarse = admm_fit(&w, &y, &spec, &AdmmOptions::with_tolerance(eps), None).unwrap();
    let fine = admm_fit(&w, &y, &spec, &AdmmOptions::with_tolerance(eps / 10.0), None).unwrap();
    let moved = (coarse.fitted(&w).unwrap() - fine.fitted(&w).unwrap()).amax();
    assert!(moved < 10.0 * eps, "{moved}");
}

#[test]
fn path_starts_at_the_null_model_and_keeps_heredity() {
    let (data, y) = instance(4, 70, 4, 4);
    let w = build_design(&data);
    for kind in [PenaltyKind::GroupL2, PenaltyKind::Linf, PenaltyKind::HybridL1Linf] {
        let lmax = lambda_max(&w, &y, kind, 0.5).unwrap();
        let grid: Vec<PenaltySpec> = lambda_grid(lmax, 12, 0.01)
            .into_iter()
            .map(|l| PenaltySpec::reparametrized(kind, 0.5, l, 4, 4).unwrap())
            .collect();
        let fits = heredity::solver::fit_path(&w, &y, &grid, &AdmmOptions::default()).unwrap();
        assert_eq!(fits[0].support.count(), 1, "{kind}");
        assert!(fits.last().unwrap().support.count() > 1, "{kind}");
        for f in &fits {
            for j in 1..=4 {
                for k in 1..=4 {
                    if f.support.get(j, k) {
                        assert!(f.support.get(j, 0) && f.support.get(0, k), "{kind}");
                    }
                }
            }
        }
    }
}

#[test]
fn relaxed_refit_leaves_residuals_orthogonal_to_the_support() {
    let (data, y) = instance(5, 60, 3, 3);
    let w = build_design(&data);
    let spec = PenaltySpec::reparametrized(PenaltyKind::GroupL2, 0.5, 0.1, 3, 3).unwrap();
    let fit = admm_fit(&w, &y, &spec, &AdmmOptions::default(), None).unwrap();
    let refit = relax_refit(&w, &y, &fit.support, Family::Gaussian).unwrap();
    let resid = &y - raw_fitted(refit.b.as_matrix(), &data.x, &data.z);
    for j in 0..=3 {
        for k in 0..=3 {
            if fit.support.get(j, k) {
                let col = w.data().column(w.column_index(j, k));
                assert!(col.dot(&resid).abs() < 1e-8 * y.len() as f64, "({j},{k})");
            } else {
                assert_eq!(refit.b.as_matrix()[(j, k)], 0.0);
            }
        }
    }
}

#[test]
fn logistic_fit_with_huge_penalty_is_the_null_model() {
    let (data, y) = instance(6, 80, 3, 3);
    let labels = y.map(|v| if v > 1.0 { 1.0 } else { 0.0 });
    let w = build_design(&data.with_response(labels.clone()).unwrap());
    let spec = PenaltySpec::new(PenaltyKind::GroupL2, 1e3, 1e3, 1e3).unwrap();
    let fit = admm_fit_logistic(&w, &labels, &spec, &AdmmOptions::with_tolerance(1e-8), None).unwrap();
    let mean = labels.mean();
    let logit = (mean / (1.0 - mean)).ln();
    assert!((fit.b_hat.as_matrix()[(0, 0)] - logit).abs() < 1e-4);
    assert_eq!(fit.support.count(), 1);
}
