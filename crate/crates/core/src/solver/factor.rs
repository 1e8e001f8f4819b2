use nalgebra::{DMatrix, DVector};

use crate::design::DesignTensor;
use crate::error::{Error, Result};

/// Thin SVD of the flattened design, computed once and reused for every
/// shifted solve `(kappa W'W/n + shift I) x = rhs`.
///
/// With `W = U S V'` the system matrix is `V diag(kappa s^2/n) V' + shift I`, whose
/// inverse by the Woodbury identity is
/// `V diag(1 / (kappa s_i^2/n + shift)) V' + (I - V V') / shift`.
#[derive(Debug, Clone)]
pub struct FactorCache {
    n: usize,
    u: DMatrix<f64>,
    singular_values: DVector<f64>,
    v: DMatrix<f64>,
}

impl FactorCache {
    pub fn new(design: &DesignTensor) -> Result<Self> {
        let w = design.data();
        let n = w.nrows();
        let svd = w.clone().svd(true, true);
        let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
            return Err(Error::InvalidInput("SVD of the design failed".into()));
        };
        let s = svd.singular_values;
        let s_max = s.iter().fold(0.0f64, |m, v| m.max(*v));
        let cutoff = s_max * (w.nrows().max(w.ncols()) as f64) * f64::EPSILON;
        let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > cutoff).collect();
        let u = u.select_columns(&keep);
        let v = v_t.select_rows(&keep).transpose();
        let singular_values = DVector::from_iterator(keep.len(), keep.iter().map(|&i| s[i]));
        Ok(Self {
            n,
            u,
            singular_values,
            v,
        })
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn n_columns(&self) -> usize {
        self.v.nrows()
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    /// `||W - U S V'||_F / ||W||_F`.
    pub fn reconstruction_error(&self, design: &DesignTensor) -> f64 {
        let mut us = self.u.clone();
        for (i, mut col) in us.column_iter_mut().enumerate() {
            col *= self.singular_values[i];
        }
        let rebuilt = us * self.v.transpose();
        let w = design.data();
        (w - rebuilt).norm() / w.norm().max(f64::MIN_POSITIVE)
    }

    /// Solves `(kappa W'W/n + shift I) x = rhs` for `shift > 0`.
    ///
    /// The range of `V` is solved with the shifted eigenvalues directly and only the
    /// orthogonal complement is divided by `shift`, which keeps tiny shifts accurate.
    pub fn solve_shifted(&self, rhs: &DVector<f64>, kappa: f64, shift: f64) -> DVector<f64> {
        debug_assert!(shift > 0.0);
        let t = self.v.tr_mul(rhs);
        let n = self.n as f64;
        let mut scaled = t.clone();
        for (ti, s) in scaled.iter_mut().zip(self.singular_values.iter()) {
            *ti /= kappa * s * s / n + shift;
        }
        let mut x = &self.v * scaled;
        if self.rank() < self.n_columns() {
            let mut complement = rhs.clone();
            complement.gemv(-1.0, &self.v, &t, 1.0);
            x.axpy(1.0 / shift, &complement, 1.0);
        }
        x
    }

    /// Minimum-norm least-squares coefficients `W^+ y`.
    pub fn pseudo_inverse_solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut t = self.u.tr_mul(y);
        for (ti, s) in t.iter_mut().zip(self.singular_values.iter()) {
            *ti /= s;
        }
        &self.v * t
    }
}
