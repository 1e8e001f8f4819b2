//! The `(p1+1) x (p2+1)` coefficient matrix and its flattened layout.
//!
//! Row 0 holds the intercept and the main effects of the second covariate
//! block, column 0 holds the intercept and the main effects of the first
//! block, and the interior holds the interaction coefficients.
//!
//! Flattened vectors (design columns, vectorized coefficients) use the order
//! `(0,0)`, then `(j,0)` for `j = 1..=p1`, then `(0,k)` for `k = 1..=p2`, then the
//! interactions `(j,k)` in row-major order.

use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{shape_mismatch, Error, Result};

/// Position of cell `(j, k)` in the flattened layout.
#[inline]
pub fn flat_index(p1: usize, p2: usize, j: usize, k: usize) -> usize {
    match (j, k) {
        (0, 0) => 0,
        (j, 0) => j,
        (0, k) => p1 + k,
        (j, k) => 1 + p1 + p2 + (j - 1) * p2 + (k - 1),
    }
}

/// Inverse of [`flat_index`].
#[inline]
pub fn cell_of(p1: usize, p2: usize, idx: usize) -> (usize, usize) {
    if idx == 0 {
        (0, 0)
    } else if idx <= p1 {
        (idx, 0)
    } else if idx <= p1 + p2 {
        (0, idx - p1)
    } else {
        let t = idx - 1 - p1 - p2;
        (1 + t / p2, 1 + t % p2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix(DMatrix<f64>);

impl CoefficientMatrix {
    pub fn zeros(p1: usize, p2: usize) -> Self {
        Self(DMatrix::zeros(p1 + 1, p2 + 1))
    }

    /// Wraps a `(p1+1) x (p2+1)` matrix.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 2 || values.ncols() < 2 {
            return Err(shape_mismatch(
                "coefficient matrix",
                "at least 2x2",
                format!("{}x{}", values.nrows(), values.ncols()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficient matrix"));
        }
        Ok(Self(values))
    }

    pub fn p1(&self) -> usize {
        self.0.nrows() - 1
    }

    pub fn p2(&self) -> usize {
        self.0.ncols() - 1
    }

    pub fn n_coefficients(&self) -> usize {
        self.0.len()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn as_matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Flattens into design-column order.
    pub fn to_flat(&self) -> DVector<f64> {
        flatten(&self.0)
    }

    pub fn from_flat(p1: usize, p2: usize, v: &DVector<f64>) -> Result<Self> {
        let len = (p1 + 1) * (p2 + 1);
        if v.len() != len {
            return Err(shape_mismatch("flat coefficients", len, v.len()));
        }
        Ok(Self(unflatten(p1, p2, v.as_slice())))
    }

    /// Number of nonzero interior (interaction) cells.
    pub fn count_interactions(&self) -> usize {
        let (p1, p2) = (self.p1(), self.p2());
        (1..=p1)
            .flat_map(|j| (1..=p2).map(move |k| (j, k)))
            .filter(|&(j, k)| self.0[(j, k)] != 0.0)
            .count()
    }
}

impl Index<(usize, usize)> for CoefficientMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for CoefficientMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut f64 {
        &mut self.0[idx]
    }
}

pub(crate) fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    let (p1, p2) = (m.nrows() - 1, m.ncols() - 1);
    let mut out = DVector::zeros(m.len());
    flatten_into(m, out.as_mut_slice());
    debug_assert_eq!(out.len(), (p1 + 1) * (p2 + 1));
    out
}

pub(crate) fn flatten_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let (p1, p2) = (m.nrows() - 1, m.ncols() - 1);
    out[0] = m[(0, 0)];
    for j in 1..=p1 {
        out[j] = m[(j, 0)];
    }
    for k in 1..=p2 {
        out[p1 + k] = m[(0, k)];
    }
    let base = 1 + p1 + p2;
    for j in 1..=p1 {
        let row = base + (j - 1) * p2;
        for k in 1..=p2 {
            out[row + k - 1] = m[(j, k)];
        }
    }
}

pub(crate) fn unflatten(p1: usize, p2: usize, v: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p1 + 1, p2 + 1);
    unflatten_into(v, &mut m);
    m
}

pub(crate) fn unflatten_into(v: &[f64], m: &mut DMatrix<f64>) {
    let (p1, p2) = (m.nrows() - 1, m.ncols() - 1);
    m[(0, 0)] = v[0];
    for j in 1..=p1 {
        m[(j, 0)] = v[j];
    }
    for k in 1..=p2 {
        m[(0, k)] = v[p1 + k];
    }
    let base = 1 + p1 + p2;
    for j in 1..=p1 {
        let row = base + (j - 1) * p2;
        for k in 1..=p2 {
            m[(j, k)] = v[row + k - 1];
        }
    }
}

/// Serialized as `{ "p1", "p2", "values": [row-major] }`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowMajor {
    p1: usize,
    p2: usize,
    values: Vec<f64>,
}

impl Serialize for CoefficientMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (r, c) = self.0.shape();
        let values = (0..r)
            .flat_map(|i| (0..c).map(move |j| (i, j)))
            .map(|idx| self.0[idx])
            .collect();
        RowMajor {
            p1: r - 1,
            p2: c - 1,
            values,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoefficientMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RowMajor::deserialize(d)?;
        let (r, c) = (raw.p1 + 1, raw.p2 + 1);
        if raw.values.len() != r * c {
            return Err(serde::de::Error::custom(format!(
                "expected {} values for a {}x{} matrix, got {}",
                r * c,
                r,
                c,
                raw.values.len()
            )));
        }
        CoefficientMatrix::from_matrix(DMatrix::from_row_slice(r, c, &raw.values))
            .map_err(serde::de::Error::custom)
    }
}
