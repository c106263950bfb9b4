//! Compressed sparse row storage.
//!
//! A [`CsrMatrix`] is always kept in canonical form: columns within a row are
//! strictly increasing and every column index is below `ncols`. Constructors
//! that accept raw parts check this; [`CsrMatrix::validate`] reports every
//! violation for parts that came from elsewhere.

mod mtx;

use std::fmt;

use serde::Serialize;

pub use mtx::{parse_matrix_market, read_matrix_market, write_matrix_market, MAX_DIM};

/// Sparse matrix in CSR layout with 32-bit column indices and `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

/// A single broken CSR invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub row: Option<usize>,
    pub rule: Rule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rule {
    RowPtrLength,
    RowPtrStart,
    RowPtrOrder { at: usize },
    RowPtrEnd,
    ValuesLength,
    UnsortedColumn,
    ColumnOutOfRange,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = self.row.unwrap_or(0);
        match self.rule {
            Rule::RowPtrLength => write!(f, "row_ptr length is not nrows+1"),
            Rule::RowPtrStart => write!(f, "row_ptr[0] is not 0"),
            Rule::RowPtrOrder { at } => write!(f, "row_ptr not non-decreasing at {at}"),
            Rule::RowPtrEnd => write!(f, "row_ptr[nrows] does not equal nnz"),
            Rule::ValuesLength => write!(f, "values length differs from col_idx length"),
            Rule::UnsortedColumn => write!(f, "duplicate/unsorted column in row {row}"),
            Rule::ColumnOutOfRange => write!(f, "column out of range in row {row}"),
        }
    }
}

/// Returned by [`CsrMatrix::from_parts`] when the parts are not canonical.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid CSR parts: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct InvalidCsr(pub Vec<Violation>);

impl CsrMatrix {
    /// Builds a matrix from raw parts, rejecting anything non-canonical.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self, InvalidCsr> {
        let m = Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        };
        let violations = m.validate();
        if violations.is_empty() {
            Ok(m)
        } else {
            Err(InvalidCsr(violations))
        }
    }

    /// Builds a matrix without checking invariants. Callers that produce
    /// canonical output by construction use this; tests use it to build
    /// broken matrices for [`validate`](Self::validate).
    pub fn from_parts_unchecked(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        values: Vec<f64>,
    ) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_parts_unchecked(nrows, ncols, vec![0; nrows + 1], Vec::new(), Vec::new())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_parts_unchecked(
            n,
            n,
            (0..=n).collect(),
            (0..n as u32).collect(),
            vec![1.0; n],
        )
    }

    /// Assembles a canonical matrix from unordered `(row, col, value)`
    /// entries. Duplicate coordinates are summed.
    ///
    /// Panics if an entry lies outside `nrows x ncols`.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(u32, u32, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(
                (r as usize) < nrows && (c as usize) < ncols,
                "triplet ({r}, {c}) outside {nrows}x{ncols}"
            );
            counts[r as usize + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // bucket by row, then sort and merge each row
        let mut next = counts.clone();
        let mut cols = vec![0u32; triplets.len()];
        let mut vals = vec![0f64; triplets.len()];
        for &(r, c, v) in triplets {
            let slot = &mut next[r as usize];
            cols[*slot] = c;
            vals[*slot] = v;
            *slot += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut out_cols = Vec::with_capacity(triplets.len());
        let mut out_vals = Vec::with_capacity(triplets.len());
        let mut pairs: Vec<(u32, f64)> = Vec::new();
        for i in 0..nrows {
            pairs.clear();
            pairs.extend(
                cols[counts[i]..counts[i + 1]]
                    .iter()
                    .copied()
                    .zip(vals[counts[i]..counts[i + 1]].iter().copied()),
            );
            // stable: duplicates are summed in input order
            pairs.sort_by_key(|&(c, _)| c);
            for &(c, v) in &pairs {
                if out_cols.len() > row_ptr[i] && *out_cols.last().unwrap() == c {
                    *out_vals.last_mut().unwrap() += v;
                } else {
                    out_cols.push(c);
                    out_vals.push(v);
                }
            }
            row_ptr.push(out_cols.len());
        }
        Self::from_parts_unchecked(nrows, ncols, row_ptr, out_cols, out_vals)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    #[inline]
    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    #[inline]
    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn into_parts(self) -> (usize, usize, Vec<usize>, Vec<u32>, Vec<f64>) {
        (self.nrows, self.ncols, self.row_ptr, self.col_idx, self.values)
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Lists every broken invariant; empty means the matrix is canonical.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let global = |rule| Violation { row: None, rule };
        if self.row_ptr.len() != self.nrows + 1 {
            out.push(global(Rule::RowPtrLength));
            return out;
        }
        if self.row_ptr[0] != 0 {
            out.push(global(Rule::RowPtrStart));
        }
        let mut ordered = true;
        for i in 1..self.row_ptr.len() {
            if self.row_ptr[i] < self.row_ptr[i - 1] {
                out.push(Violation {
                    row: Some(i - 1),
                    rule: Rule::RowPtrOrder { at: i },
                });
                ordered = false;
            }
        }
        if self.row_ptr[self.nrows] != self.col_idx.len() {
            out.push(global(Rule::RowPtrEnd));
        }
        if self.values.len() != self.col_idx.len() {
            out.push(global(Rule::ValuesLength));
        }
        if !ordered || self.row_ptr.iter().any(|&p| p > self.col_idx.len()) {
            return out;
        }
        for i in 0..self.nrows {
            let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                out.push(Violation {
                    row: Some(i),
                    rule: Rule::UnsortedColumn,
                });
            }
            if cols.iter().any(|&c| c as usize >= self.ncols) {
                out.push(Violation {
                    row: Some(i),
                    rule: Rule::ColumnOutOfRange,
                });
            }
        }
        out
    }

    /// Canonical CSR of the transpose, via a counting pass over columns.
    pub fn transpose(&self) -> CsrMatrix {
        let mut row_ptr = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            row_ptr[c as usize + 1] += 1;
        }
        for j in 0..self.ncols {
            row_ptr[j + 1] += row_ptr[j];
        }
        let mut next = row_ptr[..self.ncols].to_vec();
        let mut col_idx = vec![0u32; self.nnz()];
        let mut values = vec![0f64; self.nnz()];
        // rows visited in order, so each output row comes out sorted
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = &mut next[c as usize];
                col_idx[*slot] = i as u32;
                values[*slot] = v;
                *slot += 1;
            }
        }
        CsrMatrix::from_parts_unchecked(self.ncols, self.nrows, row_ptr, col_idx, values)
    }

    /// Same sparsity pattern and bit-identical values.
    pub fn bitwise_eq(&self, other: &CsrMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Same sparsity pattern (dimensions, row pointers and columns).
    pub fn same_structure(&self, other: &CsrMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_matrix_has_no_violations() {
        let m = CsrMatrix::from_triplets(3, 3, &[(0, 1, 1.0), (2, 0, 2.0), (2, 2, 3.0)]);
        assert!(m.validate().is_empty());
    }

    #[test]
    fn decreasing_row_ptr_is_reported() {
        let m = CsrMatrix::from_parts_unchecked(2, 3, vec![0, 2, 1], vec![0], vec![1.0]);
        let msgs: Vec<String> = m.validate().iter().map(|v| v.to_string()).collect();
        assert!(msgs.contains(&"row_ptr not non-decreasing at 2".to_string()), "{msgs:?}");
    }

    #[test]
    fn repeated_column_is_reported() {
        let m = CsrMatrix::from_parts_unchecked(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 1.0]);
        let msgs: Vec<String> = m.validate().iter().map(|v| v.to_string()).collect();
        assert_eq!(msgs, vec!["duplicate/unsorted column in row 0"]);
    }

    #[test]
    fn out_of_range_column_and_bad_lengths() {
        let m = CsrMatrix::from_parts_unchecked(1, 2, vec![0, 1], vec![5], vec![]);
        let rules: Vec<Rule> = m.validate().iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::ValuesLength));
        assert!(rules.contains(&Rule::ColumnOutOfRange));
        assert!(CsrMatrix::from_parts(1, 2, vec![0, 1], vec![5], vec![]).is_err());
    }

    #[test]
    fn transpose_of_row_vector() {
        let m = CsrMatrix::from_triplets(1, 2, &[(0, 0, 2.0), (0, 1, 3.0)]);
        let t = m.transpose();
        assert_eq!((t.nrows(), t.ncols()), (2, 1));
        assert_eq!(t.row_ptr(), &[0, 1, 2]);
        assert_eq!(t.col_idx(), &[0, 0]);
        assert_eq!(t.values(), &[2.0, 3.0]);
    }

    #[test]
    fn identity_is_its_own_transpose() {
        let id = CsrMatrix::identity(7);
        assert!(id.transpose().bitwise_eq(&id));
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, &[(1, 1, 2.0), (0, 0, 1.0), (1, 1, 3.0)]);
        assert_eq!(m.row(1), (&[1u32][..], &[5.0][..]));
    }
}
