use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `f64` matrix. Houses token activations, Q/K/V blocks and
/// expert weights alike; values are checked finite on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl TokenMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TokenMatrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::domain(format!(
                "matrix data length {} does not match {}x{}",
                values.len(),
                rows,
                cols
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("matrix contains non-finite value {v}")));
        }
        Ok(TokenMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::domain("ragged rows in matrix literal".to_string()));
        }
        Self::from_vec(r, c, rows.into_iter().flatten().collect())
    }

    /// Uniform values in `[-scale, scale)`; handy for seeded test data.
    pub fn random(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let values = (0..rows * cols)
            .map(|_| rng.gen_range(-scale..scale))
            .collect();
        TokenMatrix { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn add_assign(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] += v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy of columns `[start, start+len)`, e.g. one attention head's slice.
    pub fn column_block(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.cols {
            return Err(Error::domain(format!(
                "column block {}..{} out of range for {} cols",
                start,
                start + len,
                self.cols
            )));
        }
        let mut out = TokenMatrix::zeros(self.rows, len);
        for r in 0..self.rows {
            for c in 0..len {
                out.set(r, c, self.get(r, start + c));
            }
        }
        Ok(out)
    }

    /// Copy of the given rows, in the given order.
    pub fn gather_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut out = TokenMatrix::zeros(idx.len(), self.cols);
        for (i, &r) in idx.iter().enumerate() {
            if r >= self.rows {
                return Err(Error::domain(format!("row index {r} out of range")));
            }
            out.row_mut(i).copy_from_slice(self.row(r));
        }
        Ok(out)
    }

    /// Naive triple-loop product; reference-path use only.
    pub fn matmul(&self, other: &TokenMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::domain(format!(
                "matmul shape mismatch: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = TokenMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    out.add_assign(i, j, a * other.get(k, j));
                }
            }
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        TokenMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &TokenMatrix) -> f64 {
        assert_eq!(self.rows, other.rows, "max_abs_diff row mismatch");
        assert_eq!(self.cols, other.cols, "max_abs_diff col mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
