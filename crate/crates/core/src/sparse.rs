//! Minimal CSR storage for the symmetric matrices the pipeline builds.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Compressed sparse row matrix over `f64`, square and structurally
/// symmetric. Column indices within each row are strictly ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from unsorted (row, col, value) triplets. Duplicate entries are
    /// rejected; the triplet list must already contain both (i, j) and (j, i)
    /// for a symmetric matrix.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if n > u32::MAX as usize {
            return Err(Error::invalid("matrix dimension exceeds u32 index range"));
        }
        let mut counts = vec![0usize; n + 1];
        for &(r, c, _) in triplets {
            if r >= n || c >= n {
                return Err(Error::invalid("triplet index out of range"));
            }
            counts[r + 1] += 1;
        }
        let mut row_ptr = counts;
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let nnz = row_ptr[n];
        let mut col_idx = vec![0u32; nnz];
        let mut values = vec![0.0; nnz];
        let mut cursor = row_ptr.clone();
        for &(r, c, v) in triplets {
            let slot = cursor[r];
            col_idx[slot] = c as u32;
            values[slot] = v;
            cursor[r] += 1;
        }
        // Sort each row by column.
        for r in 0..n {
            let lo = row_ptr[r];
            let hi = row_ptr[r + 1];
            let mut order: Vec<usize> = (lo..hi).collect();
            order.sort_by_key(|&i| col_idx[i]);
            let sorted_cols: Vec<u32> = order.iter().map(|&i| col_idx[i]).collect();
            let sorted_vals: Vec<f64> = order.iter().map(|&i| values[i]).collect();
            for (k, (c, v)) in sorted_cols.into_iter().zip(sorted_vals).enumerate() {
                col_idx[lo + k] = c;
                values[lo + k] = v;
            }
            for w in col_idx[lo..hi].windows(2) {
                if w[0] == w[1] {
                    return Err(Error::invalid("duplicate entry in triplet list"));
                }
            }
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Build from per-row adjacency lists whose column indices are already
    /// strictly ascending.
    pub fn from_sorted_rows(n: usize, rows: &[Vec<(u32, f64)>]) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::invalid("row list length does not match dimension"));
        }
        if n > u32::MAX as usize {
            return Err(Error::invalid("matrix dimension exceeds u32 index range"));
        }
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            let mut prev: Option<u32> = None;
            for &(c, v) in row {
                if c as usize >= n {
                    return Err(Error::invalid("column index out of range"));
                }
                if prev.is_some_and(|p| p >= c) {
                    return Err(Error::invalid("row columns must be strictly ascending"));
                }
                prev = Some(c);
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c as usize];
            }
            y[r] = acc;
        }
    }

    /// Row sums (the degree vector when `self` is a weight matrix).
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|r| self.row(r).1.iter().sum())
            .collect()
    }

    /// Largest absolute asymmetry `max |a_ij - a_ji|`. Zero for matrices
    /// built symmetrically.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let vt = self.get(c as usize, r).unwrap_or(0.0);
                worst = worst.max((v - vt).abs());
            }
        }
        worst
    }

    /// Entry (r, c), None if structurally zero.
    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        let (cols, vals) = self.row(r);
        cols.binary_search(&(c as u32)).ok().map(|i| vals[i])
    }

    /// Dense copy, for small oracles and tests.
    pub fn to_dense(&self) -> crate::Mat {
        let mut out = crate::Mat::zeros(self.n, self.n);
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[(r, c as usize)] = v;
            }
        }
        out
    }
}
