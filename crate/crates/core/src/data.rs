//! Observation matrices and probability weight vectors.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x k` matrix of finite observations stored row-major; one row per
/// observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "data matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::InvalidInput(format!(
                    "ragged row {i}: expected {cols} columns, got {}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, values)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            if i >= self.rows {
                return Err(Error::InvalidInput(format!("row index {i} out of range")));
            }
            values.extend_from_slice(self.row(i));
        }
        Self::new(idx.len(), self.cols, values)
    }

    pub fn select_columns(&self, idx: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(idx.len() * self.rows);
        for r in self.rows() {
            for &j in idx {
                let v = r.get(j).ok_or_else(|| {
                    Error::InvalidInput(format!("column index {j} out of range"))
                })?;
                values.push(*v);
            }
        }
        Self::new(self.rows, idx.len(), values)
    }

    /// Applies `x -> a x + b` to every row.
    pub fn affine_map(&self, a: &DMatrix<f64>, b: &[f64]) -> Result<Self> {
        let k = self.cols;
        if a.nrows() != k || a.ncols() != k || b.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: a.nrows(),
            });
        }
        let mut values = Vec::with_capacity(self.values.len());
        for r in self.rows() {
            for i in 0..k {
                let mut s = b[i];
                for (j, x) in r.iter().enumerate() {
                    s += a[(i, j)] * x;
                }
                values.push(s);
            }
        }
        Self::new(self.rows, k, values)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for r in self.rows() {
            for (a, x) in m.iter_mut().zip(r) {
                *a += x;
            }
        }
        let n = self.rows as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Unbiased sample covariance (divisor `n - 1`).
    pub fn sample_covariance(&self) -> Result<DMatrix<f64>> {
        if self.rows < 2 {
            return Err(Error::InsufficientData(
                "sample covariance needs at least two rows".into(),
            ));
        }
        let m = self.mean();
        let k = self.cols;
        let mut s = DMatrix::<f64>::zeros(k, k);
        for r in self.rows() {
            for i in 0..k {
                let di = r[i] - m[i];
                for j in 0..=i {
                    s[(i, j)] += di * (r[j] - m[j]);
                }
            }
        }
        let d = (self.rows - 1) as f64;
        for i in 0..k {
            for j in 0..=i {
                let v = s[(i, j)] / d;
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        Ok(s)
    }

    /// Rank of the centered data, judged from the eigenvalues of the scatter
    /// matrix relative to the largest one.
    pub fn centered_rank(&self) -> usize {
        if self.rows < 2 {
            return 0;
        }
        let m = self.mean();
        let k = self.cols;
        let mut s = DMatrix::<f64>::zeros(k, k);
        for r in self.rows() {
            for i in 0..k {
                for j in 0..k {
                    s[(i, j)] += (r[i] - m[i]) * (r[j] - m[j]);
                }
            }
        }
        let ev = SymmetricEigen::new(s).eigenvalues;
        let max = ev.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            return 0;
        }
        ev.iter().filter(|&&l| l > 1e-12 * max).count()
    }

    /// True when every row equals the first one.
    pub fn all_rows_equal(&self) -> bool {
        let first = self.row(0);
        self.rows().all(|r| r == first)
    }
}

/// Nonnegative probability weights over the rows of a [`DataMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub const SUM_TOL: f64 = 1e-12;

    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidInput("empty weight vector".into()));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "weights must sum to one, got {s}"
            )));
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Normalizes positive masses to a probability vector.
    pub fn normalized(mass: Vec<f64>) -> Result<Self> {
        let s: f64 = mass.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidInput("weights have no positive mass".into()));
        }
        Self::new(mass.into_iter().map(|m| m / s).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Serde adapter writing a matrix as an array of rows.
pub mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != nc) {
            return None;
        }
        Some(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).ok_or_else(|| serde::de::Error::custom("ragged matrix rows"))
    }
}
