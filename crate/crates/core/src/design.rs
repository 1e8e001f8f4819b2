//! Covariate ingestion, standardization and the interaction design array.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coef::{flat_index, CoefficientMatrix};
use crate::error::{shape_mismatch, Error, Result};

/// Two covariate blocks and a response.
///
/// When `symmetric` is set the two blocks are the same matrix, which is the
/// usual all-pairs interaction setting.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub y: DVector<f64>,
    pub symmetric: bool,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, z: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let data = Self {
            x,
            z,
            y,
            symmetric: false,
        };
        data.validate()?;
        Ok(data)
    }

    /// A dataset whose second block is a copy of the first.
    pub fn symmetric(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let data = Self {
            z: x.clone(),
            x,
            y,
            symmetric: true,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p1(&self) -> usize {
        self.x.ncols()
    }

    pub fn p2(&self) -> usize {
        self.z.ncols()
    }

    fn validate(&self) -> Result<()> {
        let n = self.x.nrows();
        if n == 0 || self.x.ncols() == 0 || self.z.ncols() == 0 {
            return Err(Error::InvalidInput(
                "dataset needs at least one row and one column per block".into(),
            ));
        }
        if self.z.nrows() != n {
            return Err(shape_mismatch("Z rows", n, self.z.nrows()));
        }
        if self.y.len() != n {
            return Err(shape_mismatch("response length", n, self.y.len()));
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("X"));
        }
        if self.z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Z"));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("y"));
        }
        if self.symmetric && self.x != self.z {
            return Err(Error::InvalidInput(
                "symmetric dataset must have identical X and Z".into(),
            ));
        }
        Ok(())
    }

    /// Rows `rows` of every block.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let x = self.x.select_rows(rows);
        let z = if self.symmetric {
            x.clone()
        } else {
            self.z.select_rows(rows)
        };
        Dataset {
            x,
            z,
            y: self.y.select_rows(rows),
            symmetric: self.symmetric,
        }
    }

    pub fn with_response(&self, y: DVector<f64>) -> Result<Dataset> {
        if y.len() != self.n() {
            return Err(shape_mismatch("response length", self.n(), y.len()));
        }
        Ok(Dataset { y, ..self.clone() })
    }
}

/// Column means and standard deviations used to standardize a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardizer {
    pub x_means: Vec<f64>,
    pub x_sds: Vec<f64>,
    pub z_means: Vec<f64>,
    pub z_sds: Vec<f64>,
    pub y_mean: f64,
}

fn column_stats(m: &DMatrix<f64>, block: char) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = m.nrows();
    let mut means = Vec::with_capacity(m.ncols());
    let mut sds = Vec::with_capacity(m.ncols());
    for (j, col) in m.column_iter().enumerate() {
        let mean = col.sum() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
        // relative check so that columns like 1e6 + noise in the last ulp count as constant
        let scale = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(sd > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::ConstantColumn { block, index: j });
        }
        means.push(mean);
        sds.push(sd);
    }
    Ok((means, sds))
}

fn apply_stats(m: &DMatrix<f64>, means: &[f64], sds: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.apply(|v| *v = (*v - means[j]) / sds[j]);
    }
    out
}

impl Standardizer {
    /// Standardizes another dataset (test or validation split) with these statistics.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.p1() != self.x_means.len() || data.p2() != self.z_means.len() {
            return Err(shape_mismatch(
                "standardizer columns",
                format!("{}+{}", self.x_means.len(), self.z_means.len()),
                format!("{}+{}", data.p1(), data.p2()),
            ));
        }
        let x = apply_stats(&data.x, &self.x_means, &self.x_sds);
        let z = if data.symmetric {
            x.clone()
        } else {
            apply_stats(&data.z, &self.z_means, &self.z_sds)
        };
        Ok(Dataset {
            x,
            z,
            y: data.y.clone(),
            symmetric: data.symmetric,
        })
    }

    /// Maps coefficients fitted on the standardized scale back to the raw covariates.
    ///
    /// Each standardized column is `a_j x_j + c_j` with `a_j = 1/sd_j` and
    /// `c_j = -mean_j/sd_j`; the intercept "column" has `a = 0, c = 1`. Expanding the
    /// products `(a_j x_j + c_j)(b_k z_k + d_k)` distributes every coefficient over
    /// four cells of the raw-scale matrix.
    pub fn to_original_scale(&self, b: &CoefficientMatrix) -> Result<CoefficientMatrix> {
        let (p1, p2) = (self.x_means.len(), self.z_means.len());
        if b.p1() != p1 || b.p2() != p2 {
            return Err(shape_mismatch(
                "coefficient matrix",
                format!("{}x{}", p1 + 1, p2 + 1),
                format!("{}x{}", b.p1() + 1, b.p2() + 1),
            ));
        }
        let affine = |means: &[f64], sds: &[f64], j: usize| -> (f64, f64) {
            if j == 0 {
                (0.0, 1.0)
            } else {
                (1.0 / sds[j - 1], -means[j - 1] / sds[j - 1])
            }
        };
        let mut out = CoefficientMatrix::zeros(p1, p2);
        for j in 0..=p1 {
            let (a, c) = affine(&self.x_means, &self.x_sds, j);
            for k in 0..=p2 {
                let coef = b[(j, k)];
                if coef == 0.0 {
                    continue;
                }
                let (bb, d) = affine(&self.z_means, &self.z_sds, k);
                out[(j, k)] += a * bb * coef;
                out[(j, 0)] += a * d * coef;
                out[(0, k)] += c * bb * coef;
                out[(0, 0)] += c * d * coef;
            }
        }
        Ok(out)
    }
}

/// Centers and scales every covariate column to mean 0 and sample variance 1.
pub fn standardize(data: &Dataset) -> Result<(Dataset, Standardizer)> {
    let (x_means, x_sds) = column_stats(&data.x, 'X')?;
    let (z_means, z_sds) = if data.symmetric {
        (x_means.clone(), x_sds.clone())
    } else {
        column_stats(&data.z, 'Z')?
    };
    let st = Standardizer {
        x_means,
        x_sds,
        z_means,
        z_sds,
        y_mean: data.y.mean(),
    };
    Ok((st.apply(data)?, st))
}

/// Subtracts column means from both blocks and from the response.
pub fn center(data: &Dataset) -> Dataset {
    let c = |m: &DMatrix<f64>| {
        let mut out = m.clone();
        for mut col in out.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        out
    };
    let x = c(&data.x);
    let z = if data.symmetric { x.clone() } else { c(&data.z) };
    let y_mean = data.y.mean();
    Dataset {
        x,
        z,
        y: data.y.add_scalar(-y_mean),
        symmetric: data.symmetric,
    }
}

/// Options for building the design.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignOptions {
    /// In the symmetric case, replace the squared-term columns `(j,j)` by zeros so
    /// that their coefficients are never selected.
    #[serde(default)]
    pub zero_diagonal: bool,
}

/// The `n x (p1+1)(p2+1)` flattened interaction array.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignTensor {
    data: DMatrix<f64>,
    p1: usize,
    p2: usize,
    symmetric: bool,
    zero_diagonal: bool,
}

impl DesignTensor {
    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    pub fn n_columns(&self) -> usize {
        self.data.ncols()
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn zero_diagonal(&self) -> bool {
        self.zero_diagonal
    }

    /// Column index of cell `(j, k)`.
    pub fn column_index(&self, j: usize, k: usize) -> usize {
        flat_index(self.p1, self.p2, j, k)
    }

    /// Whether cell `(j, k)` is structurally excluded (a zeroed squared term).
    pub fn is_masked(&self, j: usize, k: usize) -> bool {
        self.zero_diagonal && j == k && j > 0
    }

    /// Cell that carries the same column as `(j, k)` in the symmetric case.
    pub fn mirror(&self, j: usize, k: usize) -> Option<(usize, usize)> {
        if !self.symmetric || j == k {
            return None;
        }
        Some((k, j))
    }

    fn check_coef(&self, b: &CoefficientMatrix) -> Result<()> {
        if b.p1() != self.p1 || b.p2() != self.p2 {
            return Err(shape_mismatch(
                "coefficient matrix",
                format!("{}x{}", self.p1 + 1, self.p2 + 1),
                format!("{}x{}", b.p1() + 1, b.p2() + 1),
            ));
        }
        Ok(())
    }
}

/// Builds the flattened design with the column order documented in [`crate::coef`].
pub fn build_design(data: &Dataset) -> DesignTensor {
    build_design_with(data, DesignOptions::default())
}

pub fn build_design_with(data: &Dataset, opts: DesignOptions) -> DesignTensor {
    let (n, p1, p2) = (data.n(), data.p1(), data.p2());
    let zero_diagonal = opts.zero_diagonal && data.symmetric;
    let mut w = DMatrix::zeros(n, (p1 + 1) * (p2 + 1));
    w.column_mut(0).fill(1.0);
    for j in 1..=p1 {
        w.column_mut(flat_index(p1, p2, j, 0)).copy_from(&data.x.column(j - 1));
    }
    for k in 1..=p2 {
        w.column_mut(flat_index(p1, p2, 0, k)).copy_from(&data.z.column(k - 1));
    }
    for j in 1..=p1 {
        let xj = data.x.column(j - 1);
        for k in 1..=p2 {
            if zero_diagonal && j == k {
                continue;
            }
            let col = xj.component_mul(&data.z.column(k - 1));
            w.column_mut(flat_index(p1, p2, j, k)).copy_from(&col);
        }
    }
    DesignTensor {
        data: w,
        p1,
        p2,
        symmetric: data.symmetric,
        zero_diagonal,
    }
}

/// Linear predictor `W * B`.
pub fn predict(design: &DesignTensor, b: &CoefficientMatrix) -> Result<DVector<f64>> {
    design.check_coef(b)?;
    Ok(&design.data * b.to_flat())
}

/// Combined main effects and interactions when both blocks are the same covariates.
///
/// Returns `main[j-1] = B[0,j] + B[j,0]` and the symmetric `p x p` interaction matrix
/// with off-diagonal entries `B[j,k] + B[k,j]` and diagonal `B[j,j]`.
pub fn combine_symmetric(b: &CoefficientMatrix) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (p1, p2) = (b.p1(), b.p2());
    if p1 != p2 {
        return Err(Error::NotSymmetricProblem { p1, p2 });
    }
    let p = p1;
    let main = DVector::from_fn(p, |j, _| b[(0, j + 1)] + b[(j + 1, 0)]);
    let inter = DMatrix::from_fn(p, p, |j, k| {
        if j == k {
            b[(j + 1, j + 1)]
        } else {
            b[(j + 1, k + 1)] + b[(k + 1, j + 1)]
        }
    });
    Ok((main, inter))
}

/// Design arrays for the weak-heredity formulation.
///
/// `wx` has columns `(j,k)` for `j = 1..=p1`, `k = 0..=p2` in row-major order; `wz` has
/// columns `(j,k)` for `j = 0..=p1`, `k = 1..=p2` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakDesign {
    pub wx: DMatrix<f64>,
    pub wz: DMatrix<f64>,
    pub p1: usize,
    pub p2: usize,
}

impl WeakDesign {
    pub fn wx_index(&self, j: usize, k: usize) -> usize {
        (j - 1) * (self.p2 + 1) + k
    }

    pub fn wz_index(&self, j: usize, k: usize) -> usize {
        j * self.p2 + (k - 1)
    }
}

/// Builds the weak-heredity arrays. The covariates are expected to be centered
/// already (see [`center`]); no intercept column is formed.
pub fn build_weak_design(data: &Dataset) -> WeakDesign {
    let (n, p1, p2) = (data.n(), data.p1(), data.p2());
    let mut wx = DMatrix::zeros(n, p1 * (p2 + 1));
    let mut wz = DMatrix::zeros(n, (p1 + 1) * p2);
    for j in 1..=p1 {
        let xj = data.x.column(j - 1);
        wx.column_mut((j - 1) * (p2 + 1)).copy_from(&xj);
        for k in 1..=p2 {
            let prod = xj.component_mul(&data.z.column(k - 1));
            wx.column_mut((j - 1) * (p2 + 1) + k).copy_from(&prod);
            wz.column_mut(j * p2 + (k - 1)).copy_from(&prod);
        }
    }
    for k in 1..=p2 {
        wz.column_mut(k - 1).copy_from(&data.z.column(k - 1));
    }
    WeakDesign { wx, wz, p1, p2 }
}

/// Column selection for CSV ingestion.
#[derive(Debug, Clone, Default)]
pub struct CsvColumns {
    /// Response column; `None` reads covariates only and sets the response to zero.
    pub response: Option<String>,
    /// Columns of the first block; all non-response columns when `None`.
    pub x: Option<Vec<String>>,
    /// Columns of the second block; when `None` the dataset is symmetric.
    pub z: Option<Vec<String>>,
}

/// A dataset read from CSV plus the column names of each block.
#[derive(Debug, Clone)]
pub struct CsvData {
    pub dataset: Dataset,
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
}

/// Reads a headed CSV file. Empty or non-numeric fields are rejected.
pub fn read_csv(path: impl AsRef<Path>, cols: &CsvColumns) -> Result<CsvData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let y_idx = cols.response.as_deref().map(find).transpose()?;
    let x_names: Vec<String> = match &cols.x {
        Some(names) => names.clone(),
        None => header
            .iter()
            .filter(|h| cols.response.as_ref() != Some(*h))
            .filter(|h| cols.z.as_ref().is_none_or(|z| !z.contains(h)))
            .cloned()
            .collect(),
    };
    if x_names.is_empty() {
        return Err(Error::InvalidInput("no covariate columns".into()));
    }
    let x_idx: Vec<usize> = x_names.iter().map(|n| find(n)).collect::<Result<_>>()?;
    let z_idx: Option<Vec<usize>> = match &cols.z {
        Some(names) => Some(names.iter().map(|n| find(n)).collect::<Result<_>>()?),
        None => None,
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut vals = Vec::with_capacity(rec.len());
        for (c, field) in rec.iter().enumerate() {
            let field = field.trim();
            if field.is_empty() || field.eq_ignore_ascii_case("na") {
                return Err(Error::InvalidInput(format!(
                    "missing value at data row {}, column '{}'",
                    line + 1,
                    header.get(c).map(String::as_str).unwrap_or("?")
                )));
            }
            let v: f64 = field.parse().map_err(|_| {
                Error::InvalidInput(format!(
                    "non-numeric value '{}' at data row {}, column '{}'",
                    field,
                    line + 1,
                    header.get(c).map(String::as_str).unwrap_or("?")
                ))
            })?;
            vals.push(v);
        }
        rows.push(vals);
    }
    let n = rows.len();
    let take = |idx: &[usize]| DMatrix::from_fn(n, idx.len(), |i, j| rows[i][idx[j]]);
    let y = DVector::from_fn(n, |i, _| y_idx.map_or(0.0, |c| rows[i][c]));
    let x = take(&x_idx);
    let (dataset, z_names) = match z_idx {
        Some(zi) => (
            Dataset::new(x, take(&zi), y)?,
            cols.z.clone().unwrap_or_default(),
        ),
        None => (Dataset::symmetric(x, y)?, x_names.clone()),
    };
    Ok(CsvData {
        dataset,
        x_names,
        z_names,
    })
}
