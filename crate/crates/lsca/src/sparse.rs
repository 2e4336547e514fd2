//! Compressed sparse row matrix used for counts and weighted counts.
//!
//! The corpora here are small (thousands of documents, ten-thousands of
//! terms) but far too sparse to keep dense everywhere. All mutating
//! construction happens through [`SparseRowMatrix::from_rows`]; after that
//! the matrix is immutable and safe to share.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Immutable CSR matrix of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRowMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseRowMatrix {
    /// Build from per-row `(column, value)` pairs. Pairs must be sorted by
    /// column within each row and contain no duplicates or zeros.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for (i, row) in rows.iter().enumerate() {
            let mut last: Option<u32> = None;
            for &(c, v) in row {
                if c as usize >= cols {
                    return Err(Error::DimensionMismatch {
                        expected: cols,
                        got: c as usize + 1,
                        context: format!("column index in row {i}"),
                    });
                }
                if let Some(p) = last {
                    if c <= p {
                        return Err(Error::InvalidInput(format!(
                            "row {i}: columns not strictly increasing ({p} then {c})"
                        )));
                    }
                }
                if v == 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "row {i}: explicit zero at column {c}"
                    )));
                }
                last = Some(c);
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseRowMatrix {
            rows: rows.len(),
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// All stored values, row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = (&[u32], &[f64])> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn row_sq_norms(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).1.iter().map(|v| v * v).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for (c, v) in self.col_idx.iter().zip(&self.values) {
            sums[*c as usize] += *v;
        }
        sums
    }

    /// Number of rows with a nonzero entry in each column.
    pub fn col_support(&self) -> Vec<u32> {
        let mut support = vec![0u32; self.cols];
        for &c in &self.col_idx {
            support[c as usize] += 1;
        }
        support
    }

    /// Per-row transform of values; `f(row, col, value)` must not return zero.
    pub fn map_values(&self, mut f: impl FnMut(usize, u32, f64) -> f64) -> SparseRowMatrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            for p in a..b {
                out.values[p] = f(i, self.col_idx[p], self.values[p]);
            }
        }
        out
    }

    /// New matrix containing `keep` rows in the given order.
    pub fn select_rows(&self, keep: &[usize]) -> Result<SparseRowMatrix> {
        let mut rows = Vec::with_capacity(keep.len());
        for &i in keep {
            if i >= self.rows {
                return Err(Error::IndexOutOfBounds {
                    index: i,
                    len: self.rows,
                    what: "rows".into(),
                });
            }
            let (cs, vs) = self.row(i);
            rows.push(cs.iter().copied().zip(vs.iter().copied()).collect());
        }
        SparseRowMatrix::from_rows(self.cols, rows)
    }

    /// Drop all-zero columns. Returns the compacted matrix plus the list of
    /// retained original column indices (ascending).
    pub fn drop_empty_columns(&self) -> (SparseRowMatrix, Vec<u32>) {
        let support = self.col_support();
        let kept: Vec<u32> = (0..self.cols as u32)
            .filter(|&c| support[c as usize] > 0)
            .collect();
        if kept.len() == self.cols {
            return (self.clone(), kept);
        }
        let mut remap = vec![u32::MAX; self.cols];
        for (new, &old) in kept.iter().enumerate() {
            remap[old as usize] = new as u32;
        }
        let mut out = self.clone();
        out.cols = kept.len();
        for c in out.col_idx.iter_mut() {
            *c = remap[*c as usize];
        }
        (out, kept)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut dense = Array2::zeros((self.rows, self.cols));
        for i in 0..self.rows {
            let (cs, vs) = self.row(i);
            for (c, v) in cs.iter().zip(vs) {
                dense[[i, *c as usize]] = *v;
            }
        }
        dense
    }

    /// Dot product of row `i` with a sparse vector (sorted by column).
    pub fn row_dot(&self, i: usize, cols: &[u32], vals: &[f64]) -> f64 {
        let (rc, rv) = self.row(i);
        let mut acc = 0.0;
        let (mut a, mut b) = (0usize, 0usize);
        while a < rc.len() && b < cols.len() {
            match rc[a].cmp(&cols[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += rv[a] * vals[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseRowMatrix {
        SparseRowMatrix::from_rows(
            4,
            vec![
                vec![(0, 1.0), (2, 2.0)],
                vec![],
                vec![(1, 3.0), (3, 4.0)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn shape_and_access() {
        let m = sample();
        assert_eq!((m.rows(), m.cols(), m.nnz()), (3, 4, 4));
        assert_eq!(m.row(1), (&[][..], &[][..]));
        assert_eq!(m.row(2).1, &[3.0, 4.0]);
        assert_eq!(m.total(), 10.0);
        assert_eq!(m.col_sums(), vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(m.col_support(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn rejects_unsorted_and_zero() {
        assert!(SparseRowMatrix::from_rows(3, vec![vec![(1, 1.0), (0, 1.0)]]).is_err());
        assert!(SparseRowMatrix::from_rows(3, vec![vec![(1, 0.0)]]).is_err());
        assert!(SparseRowMatrix::from_rows(2, vec![vec![(2, 1.0)]]).is_err());
    }

    #[test]
    fn select_and_compact() {
        let m = sample();
        let s = m.select_rows(&[2, 0]).unwrap();
        assert_eq!(s.row(0).1, &[3.0, 4.0]);
        assert_eq!(s.row(1).1, &[1.0, 2.0]);

        let only = m.select_rows(&[0]).unwrap();
        let (c, kept) = only.drop_empty_columns();
        assert_eq!(kept, vec![0, 2]);
        assert_eq!(c.cols(), 2);
        assert_eq!(c.row(0), (&[0u32, 1][..], &[1.0, 2.0][..]));
    }

    #[test]
    fn sparse_dot() {
        let m = sample();
        assert_eq!(m.row_dot(0, &[2, 3], &[5.0, 7.0]), 10.0);
        assert_eq!(m.row_dot(1, &[0], &[1.0]), 0.0);
    }

    #[test]
    fn dense_round_trip() {
        let m = sample();
        let d = m.to_dense();
        assert_eq!(d[[0, 2]], 2.0);
        assert_eq!(d[[1, 1]], 0.0);
        assert_eq!(d.sum(), 10.0);
    }
}
