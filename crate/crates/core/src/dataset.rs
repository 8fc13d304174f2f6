//! Dense binary matrix shared by the encoder and the learners.

use serde::{Deserialize, Serialize};

/// Row-major 0/1 matrix. One-hot encoded rulings, bootstrap views, and
/// support vectors all use this representation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<u8>,
}

impl BinMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        BinMatrix { n_rows, n_cols, data: vec![0; n_rows * n_cols] }
    }

    /// Builds from explicit rows; all rows must share one width.
    pub fn from_rows(rows: &[Vec<u8>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        BinMatrix { n_rows, n_cols, data }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [u8] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.n_cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u8) {
        self.data[i * self.n_cols + j] = v;
    }

    /// Copies the given rows (repeats allowed) into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        BinMatrix { n_rows: rows.len(), n_cols: self.n_cols, data }
    }

    /// Copies the given columns, preserving their listed order.
    pub fn select_cols(&self, cols: &[usize]) -> Self {
        let mut out = BinMatrix::zeros(self.n_rows, cols.len());
        for i in 0..self.n_rows {
            let src = self.row(i);
            for (jj, &j) in cols.iter().enumerate() {
                out.data[i * cols.len() + jj] = src[j];
            }
        }
        out
    }

    /// Fraction of ones over all entries.
    pub fn density(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let ones: u64 = self.data.iter().map(|&v| v as u64).sum();
        ones as f64 / self.data.len() as f64
    }
}
