use super::RowResult;
use crate::csr::CsrMatrix;

/// Expands every product into `buf`, sorts by column (stable, so equal
/// columns keep product order) and compacts adjacent duplicates in place.
/// Returns the number of distinct columns, held in `buf[..n]`.
pub(crate) fn expand_sort_compact(a_row: (&[u32], &[f64]), b: &CsrMatrix, buf: &mut Vec<(u32, f64)>) -> usize {
    buf.clear();
    let (a_cols, a_vals) = a_row;
    for (&k, &av) in a_cols.iter().zip(a_vals) {
        let (b_cols, b_vals) = b.row(k as usize);
        buf.extend(b_cols.iter().zip(b_vals).map(|(&j, &bv)| (j, av * bv)));
    }
    buf.sort_by_key(|p| p.0);
    let mut n = 0;
    for t in 0..buf.len() {
        let (j, v) = buf[t];
        if n > 0 && buf[n - 1].0 == j {
            buf[n - 1].1 += v;
        } else {
            buf[n] = (j, 0.0 + v);
            n += 1;
        }
    }
    n
}

/// Expand-sort-compact accumulation; output sorted, never overflows.
pub fn esc_accumulate(a_row: (&[u32], &[f64]), b: &CsrMatrix) -> RowResult {
    let mut buf = Vec::new();
    let n = expand_sort_compact(a_row, b, &mut buf);
    RowResult {
        cols: buf[..n].iter().map(|p| p.0).collect(),
        vals: buf[..n].iter().map(|p| p.1).collect(),
        overflowed: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compacts_shared_columns() {
        let a = CsrMatrix::from_triplets(1, 3, &[(0, 0, 1.0), (0, 1, 1.0), (0, 2, 1.0)]);
        let b = CsrMatrix::from_triplets(3, 10, &[(0, 2, 1.5), (0, 4, 2.0), (1, 2, 3.25), (2, 9, 4.0)]);
        let r = esc_accumulate(a.row(0), &b);
        assert_eq!(r.cols, vec![2, 4, 9]);
        assert_eq!(r.vals, vec![1.5 + 3.25, 2.0, 4.0]);
    }

    #[test]
    fn empty_row() {
        let a = CsrMatrix::zeros(1, 3);
        let r = esc_accumulate(a.row(0), &CsrMatrix::identity(3));
        assert_eq!(r.count(), 0);
        assert!(!r.overflowed);
    }
}
