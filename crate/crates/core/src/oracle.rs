//! Slow reference implementations used to check the engine.
//!
//! Nothing here shares code with the accumulators or the prediction passes:
//! products are gathered into ordered maps and read back in column order.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::csr::CsrMatrix;
use crate::error::DimensionMismatch;

/// Unordered coordinate list; duplicates allowed until converted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripletList {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl TripletList {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn from_csr(m: &CsrMatrix) -> Self {
        let mut t = Self::new(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            let (cols, vals) = m.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                t.entries.push((i, c as usize, v));
            }
        }
        t
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    /// Swaps row and column of every entry.
    pub fn transposed(&self) -> Self {
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            entries: self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect(),
        }
    }

    /// Sorts by (row, col), sums duplicates in their original order and emits CSR.
    pub fn into_csr(mut self) -> CsrMatrix {
        // stable sort keeps duplicate summation in input order
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut cols: Vec<u32> = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c as u32);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix::from_parts_unchecked(self.nrows, self.ncols, row_ptr, cols, vals)
    }
}

fn check_dims(a: &CsrMatrix, b: &CsrMatrix) -> Result<(), DimensionMismatch> {
    if a.ncols() != b.nrows() {
        return Err(DimensionMismatch {
            left_rows: a.nrows(),
            left_cols: a.ncols(),
            right_rows: b.nrows(),
            right_cols: b.ncols(),
        });
    }
    Ok(())
}

/// Row-by-row product through an ordered column map.
pub fn reference_spgemm(a: &CsrMatrix, b: &CsrMatrix) -> Result<CsrMatrix, DimensionMismatch> {
    check_dims(a, b)?;
    let mut row_ptr = vec![0usize];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for i in 0..a.nrows() {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        let (a_cols, a_vals) = a.row(i);
        for (&k, &av) in a_cols.iter().zip(a_vals) {
            let (b_cols, b_vals) = b.row(k as usize);
            for (&j, &bv) in b_cols.iter().zip(b_vals) {
                *acc.entry(j).or_insert(0.0) += av * bv;
            }
        }
        for (j, v) in acc {
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(CsrMatrix::from_parts_unchecked(
        a.nrows(),
        b.ncols(),
        row_ptr,
        cols,
        vals,
    ))
}

/// Exact distinct output columns per row of `A·B`.
pub fn reference_row_nnz(a: &CsrMatrix, b: &CsrMatrix) -> Result<Vec<usize>, DimensionMismatch> {
    check_dims(a, b)?;
    Ok((0..a.nrows())
        .map(|i| {
            let mut set = BTreeSet::new();
            for &k in a.row(i).0 {
                set.extend(b.row(k as usize).0.iter().copied());
            }
            set.len()
        })
        .collect())
}

/// Intermediate products per row, by nested loops.
pub fn reference_row_products(a: &CsrMatrix, b: &CsrMatrix) -> Vec<u64> {
    (0..a.nrows())
        .map(|i| {
            let mut n = 0u64;
            for &k in a.row(i).0 {
                for _ in b.row(k as usize).0 {
                    n += 1;
                }
            }
            n
        })
        .collect()
}

pub fn exact_distinct_count(keys: &[u32]) -> usize {
    keys.iter().collect::<HashSet<_>>().len()
}

/// Identical structure and every value within `rel_tol` relative error.
pub fn matrices_match(actual: &CsrMatrix, expected: &CsrMatrix, rel_tol: f64) -> Result<(), String> {
    if actual.nrows() != expected.nrows() || actual.ncols() != expected.ncols() {
        return Err(format!(
            "shape {}x{} vs {}x{}",
            actual.nrows(),
            actual.ncols(),
            expected.nrows(),
            expected.ncols()
        ));
    }
    if actual.row_ptr() != expected.row_ptr() {
        let row = (0..actual.nrows())
            .find(|&i| actual.row_nnz(i) != expected.row_nnz(i))
            .unwrap_or(0);
        return Err(format!(
            "row {row}: {} entries vs {}",
            actual.row_nnz(row),
            expected.row_nnz(row)
        ));
    }
    if actual.col_idx() != expected.col_idx() {
        return Err("column structure differs".into());
    }
    for (idx, (&x, &y)) in actual.values().iter().zip(expected.values()).enumerate() {
        if x != y && (x - y).abs() > rel_tol * x.abs().max(y.abs()) {
            return Err(format!("value {idx}: {x} vs {y}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2_pair() -> (CsrMatrix, CsrMatrix) {
        // row of A selects B rows 0..=2; products (2,a)(4,b)(2,c)(9,d)
        let a = CsrMatrix::from_triplets(1, 3, &[(0, 0, 1.0), (0, 1, 1.0), (0, 2, 1.0)]);
        let b = CsrMatrix::from_triplets(
            3,
            10,
            &[(0, 2, 1.5), (0, 4, 2.0), (1, 2, 3.25), (2, 9, 4.0)],
        );
        (a, b)
    }

    #[test]
    fn identity_times_b() {
        let b = CsrMatrix::from_triplets(3, 4, &[(0, 1, 2.0), (2, 3, -1.0), (2, 0, 5.0)]);
        let c = reference_spgemm(&CsrMatrix::identity(3), &b).unwrap();
        assert!(c.bitwise_eq(&b));
        assert_eq!(reference_row_nnz(&CsrMatrix::identity(3), &b).unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn accumulates_shared_columns() {
        let (a, b) = fig2_pair();
        let c = reference_spgemm(&a, &b).unwrap();
        assert_eq!(c.col_idx(), &[2, 4, 9]);
        assert_eq!(c.values(), &[1.5 + 3.25, 2.0, 4.0]);
    }

    #[test]
    fn empty_a_gives_zero_counts() {
        let b = CsrMatrix::identity(4);
        assert_eq!(reference_row_nnz(&CsrMatrix::zeros(3, 4), &b).unwrap(), vec![0; 3]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(reference_spgemm(&CsrMatrix::zeros(2, 3), &CsrMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn distinct_count() {
        assert_eq!(exact_distinct_count(&[]), 0);
        assert_eq!(exact_distinct_count(&[1, 1, 2]), 2);
    }

    #[test]
    fn triplets_round_trip() {
        let mut t = TripletList::new(2, 3);
        t.push(1, 2, 1.0);
        t.push(0, 0, 2.0);
        t.push(1, 2, 0.5);
        let m = t.into_csr();
        assert_eq!(m.row_ptr(), &[0, 1, 2]);
        assert_eq!(m.values(), &[2.0, 1.5]);
    }
}
