//! Row-major dense storage with `NaN` marking a missing cell.
//!
//! Every learner in the crate consumes this type. Sparse-aware learners
//! (trees, forests, boosting) read `NaN` as MISSING and route it by a learned
//! default direction; dense-only learners require an imputed matrix and check
//! it with [`Matrix::has_missing`].

use serde::{Deserialize, Serialize};

use crate::error::{Result, TriageError};

/// Marker value for a missing cell.
pub const MISSING: f64 = f64::NAN;

#[inline]
pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(TriageError::schema(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    /// Builds a matrix from equal-length rows. `cols` is needed for the empty case.
    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(TriageError::schema(format!(
                    "row {i} has {} values, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |r| self.row(r))
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |r| self.get(r, c))
    }

    /// Observed (non-missing) values of a column, in row order.
    pub fn observed_column(&self, c: usize) -> Vec<f64> {
        self.column(c).filter(|v| !is_missing(*v)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn has_missing(&self) -> bool {
        self.data.iter().any(|v| is_missing(*v))
    }

    pub fn missing_count(&self) -> usize {
        self.data.iter().filter(|v| is_missing(**v)).count()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(TriageError::schema(format!(
                "row has {} values, expected {}",
                row.len(),
                self.cols
            )));
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    /// Bitwise equality, treating two `NaN` cells as equal.
    pub fn bit_eq(&self, other: &Matrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()))
    }

    pub fn ensure_dense(&self, what: &str) -> Result<()> {
        if self.has_missing() {
            return Err(TriageError::domain(format!(
                "{what} requires a dense matrix; impute missing cells first"
            )));
        }
        Ok(())
    }
}

/// Per-column mean and standard deviation over observed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Zero-variance columns get scale 1 so they map to 0.
    pub fn fit(x: &Matrix) -> Self {
        let mut means = Vec::with_capacity(x.n_cols());
        let mut scales = Vec::with_capacity(x.n_cols());
        for c in 0..x.n_cols() {
            let obs = x.observed_column(c);
            if obs.is_empty() {
                means.push(0.0);
                scales.push(1.0);
                continue;
            }
            let n = obs.len() as f64;
            let m = obs.iter().sum::<f64>() / n;
            let var = obs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            means.push(m);
            scales.push(if sd > 1e-12 { sd } else { 1.0 });
        }
        Self { means, scales }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..out.n_rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.means[c]) / self.scales[c];
            }
        }
        out
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(c, v)| (v - self.means[c]) / self.scales[c])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, MISSING]], 2).unwrap();
        assert_eq!(m.get(1, 0), 3.0);
        assert!(m.has_missing());
        assert_eq!(m.observed_column(1), vec![2.0]);
        assert_eq!(m.select_rows(&[1]).row(0)[0], 3.0);
    }

    #[test]
    fn standardizer_constant_column_maps_to_zero() {
        let m = Matrix::from_rows(&[vec![5.0, 1.0], vec![5.0, 3.0]], 2).unwrap();
        let s = Standardizer::fit(&m);
        let t = s.transform(&m);
        assert_eq!(t.get(0, 0), 0.0);
        assert_eq!(t.get(0, 1), -1.0);
        assert_eq!(t.get(1, 1), 1.0);
    }
}
