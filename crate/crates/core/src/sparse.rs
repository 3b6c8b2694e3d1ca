//! Compressed-row sparse matrices.
//!
//! This is the carrier for every propagation matrix in the crate: the
//! self-loop-augmented adjacency, the Markov transition matrix, the k-step
//! walk states and the meta-path adjacencies. Values are `f64`, column
//! indices are strictly increasing within a row, and no explicit zeros are
//! stored once a matrix is built.

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRowMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRowMatrix {
    /// Build from per-row `(column, value)` lists. Each list must be sorted
    /// by strictly increasing column index; zero values are dropped.
    pub fn from_rows(n_rows: usize, n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        assert_eq!(rows.len(), n_rows, "row list length must equal n_rows");
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &rows {
            let mut last: Option<usize> = None;
            for &(col, val) in row {
                assert!(col < n_cols, "column {col} out of bounds ({n_cols})");
                if let Some(prev) = last {
                    assert!(col > prev, "columns must be strictly increasing");
                }
                last = Some(col);
                if val != 0.0 {
                    col_idx.push(col);
                    values.push(val);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn iter_row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (cols, vals) = self.row(i);
        cols.iter().copied().zip(vals.iter().copied())
    }

    /// All stored entries as `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.iter_row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        let (_, vals) = self.row(i);
        vals.iter().sum()
    }

    /// Row-by-row product with a fixed per-row accumulation order: entries
    /// of the left row are visited in column order, each scattering into a
    /// dense accumulator, and the result row is gathered in sorted column
    /// order. Exact zeros (including cancellations) are not stored.
    pub fn multiply(&self, other: &SparseRowMatrix) -> Result<SparseRowMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch {
                left_rows: self.n_rows,
                left_cols: self.n_cols,
                right_rows: other.n_rows,
                right_cols: other.n_cols,
            });
        }
        let mut acc = vec![0.0f64; other.n_cols];
        let mut stamp = vec![0u32; other.n_cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut generation = 0u32;

        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);

        for u in 0..self.n_rows {
            generation += 1;
            touched.clear();
            for (k, a_val) in self.iter_row(u) {
                for (j, b_val) in other.iter_row(k) {
                    if stamp[j] != generation {
                        stamp[j] = generation;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a_val * b_val;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j] != 0.0 {
                    col_idx.push(j);
                    values.push(acc[j]);
                }
            }
            row_ptr.push(col_idx.len());
        }

        Ok(SparseRowMatrix {
            n_rows: self.n_rows,
            n_cols: other.n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for (r, c, v) in self.iter() {
            out[[r, c]] = v;
        }
        out
    }

    /// `self * dense`.
    pub fn mul_dense(&self, dense: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.n_cols, dense.nrows(), "inner dimensions must agree");
        let mut out = Array2::zeros((self.n_rows, dense.ncols()));
        for u in 0..self.n_rows {
            let mut out_row = out.row_mut(u);
            for (v, val) in self.iter_row(u) {
                out_row.scaled_add(val, &dense.row(v));
            }
        }
        out
    }

    /// `self^T * dense`, without materializing the transpose.
    pub fn tr_mul_dense(&self, dense: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.n_rows, dense.nrows(), "inner dimensions must agree");
        let mut out = Array2::zeros((self.n_cols, dense.ncols()));
        for u in 0..self.n_rows {
            let dense_row = dense.row(u);
            for (v, val) in self.iter_row(u) {
                out.row_mut(v).scaled_add(val, &dense_row);
            }
        }
        out
    }
}
