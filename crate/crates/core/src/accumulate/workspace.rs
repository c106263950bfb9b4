use super::dense::DenseArea;
use super::esc::expand_sort_compact;
use super::hash::HashTable;
use super::sort::RowSorter;
use super::{AccumulatorKind, RowPlan, RowResult};
use crate::csr::CsrMatrix;
use crate::error::SortError;

/// What happened to one row during accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowOutcome {
    pub count: usize,
    pub overflowed: bool,
}

impl RowOutcome {
    const OVERFLOW: RowOutcome = RowOutcome {
        count: 0,
        overflowed: true,
    };
}

/// Per-worker scratch space for every accumulator kind.
#[derive(Debug, Default)]
pub struct Workspace {
    hash: HashTable,
    dense: DenseArea,
    esc: Vec<(u32, f64)>,
    sorter: RowSorter,
    cursors: Vec<usize>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accumulates one row with the planned accumulator, writing sorted
    /// entries to the front of `out_cols`/`out_vals` (whose length is the
    /// row's allocation). `span` is the row's reachable column range.
    #[allow(clippy::too_many_arguments)]
    pub fn accumulate(
        &mut self,
        plan: &RowPlan,
        a_row: (&[u32], &[f64]),
        b: &CsrMatrix,
        span: (u32, u32),
        bitmap_query: bool,
        fallback_chunk: usize,
        out_cols: &mut [u32],
        out_vals: &mut [f64],
    ) -> Result<RowOutcome, SortError> {
        let alloc = out_cols.len();
        if a_row.0.is_empty() || (alloc == 0 && plan.kind != AccumulatorKind::Fallback) {
            // rows without products have alloc 0; anything else here is an
            // allocation miss that the fallback resolves
            let empty = a_row.0.iter().all(|&k| b.row_nnz(k as usize) == 0);
            return Ok(if empty {
                RowOutcome {
                    count: 0,
                    overflowed: false,
                }
            } else {
                RowOutcome::OVERFLOW
            });
        }
        let (lo, hi) = span;
        match plan.kind {
            AccumulatorKind::Esc => {
                let n = expand_sort_compact(a_row, b, &mut self.esc);
                if n > alloc {
                    return Ok(RowOutcome::OVERFLOW);
                }
                for (t, &(c, v)) in self.esc[..n].iter().enumerate() {
                    out_cols[t] = c;
                    out_vals[t] = v;
                }
                Ok(RowOutcome {
                    count: n,
                    overflowed: false,
                })
            }
            AccumulatorKind::Hash | AccumulatorKind::EnhancedHash => {
                if !self.hash.accumulate(a_row, b, plan.capacity) {
                    return Ok(RowOutcome::OVERFLOW);
                }
                let n = self.hash.len();
                if n > alloc {
                    self.hash.reset();
                    return Ok(RowOutcome::OVERFLOW);
                }
                self.hash.drain_into(&mut out_cols[..n], &mut out_vals[..n]);
                self.sorter.sort(&mut out_cols[..n], &mut out_vals[..n], hi)?;
                Ok(RowOutcome {
                    count: n,
                    overflowed: false,
                })
            }
            AccumulatorKind::Dense => {
                let width = (hi - lo) as usize + 1;
                self.dense.accumulate(a_row, b, lo, width, bitmap_query);
                let n = self.dense.count(width);
                if n > alloc {
                    self.dense.clear(width);
                    return Ok(RowOutcome::OVERFLOW);
                }
                self.dense.drain_into(lo, width, out_cols, out_vals);
                Ok(RowOutcome {
                    count: n,
                    overflowed: false,
                })
            }
            AccumulatorKind::Fallback => {
                let n = self.fallback(a_row, b, span, fallback_chunk, out_cols, out_vals);
                Ok(RowOutcome {
                    count: n,
                    overflowed: false,
                })
            }
        }
    }

    /// Dense accumulation over the whole span in windows of `chunk` columns.
    /// `out` must hold at least as many slots as the row has products.
    pub(crate) fn fallback(
        &mut self,
        a_row: (&[u32], &[f64]),
        b: &CsrMatrix,
        span: (u32, u32),
        chunk: usize,
        out_cols: &mut [u32],
        out_vals: &mut [f64],
    ) -> usize {
        let (a_cols, a_vals) = a_row;
        let (lo, hi) = span;
        let chunk = chunk.max(64);
        self.dense.ensure(chunk);
        self.cursors.clear();
        self.cursors.extend(a_cols.iter().map(|&k| b.row_ptr()[k as usize]));

        let mut n = 0;
        let mut start = lo as u64;
        while start <= hi as u64 {
            let end = (start + chunk as u64).min(hi as u64 + 1);
            for (t, (&k, &av)) in a_cols.iter().zip(a_vals).enumerate() {
                let row_end = b.row_ptr()[k as usize + 1];
                let mut pos = self.cursors[t];
                while pos < row_end && (b.col_idx()[pos] as u64) < end {
                    let x = (b.col_idx()[pos] as u64 - start) as usize;
                    self.dense.add(x, av * b.values()[pos], false);
                    pos += 1;
                }
                self.cursors[t] = pos;
            }
            let width = (end - start) as usize;
            n += self
                .dense
                .drain_into(start as u32, width, &mut out_cols[n..], &mut out_vals[n..]);
            start = end;
        }
        n
    }
}

/// Chunked dense accumulation of an arbitrarily long row; exact and sorted.
/// Works through the row's column range `chunk` columns at a time.
pub fn fallback_accumulate(a_row: (&[u32], &[f64]), b: &CsrMatrix, chunk: usize) -> RowResult {
    let mut products = 0usize;
    let mut lo = u32::MAX;
    let mut hi = 0;
    for &k in a_row.0 {
        let cols = b.row(k as usize).0;
        if let (Some(&f), Some(&l)) = (cols.first(), cols.last()) {
            products += cols.len();
            lo = lo.min(f);
            hi = hi.max(l);
        }
    }
    if products == 0 {
        return RowResult::default();
    }
    let mut cols = vec![0; products];
    let mut vals = vec![0.0; products];
    let n = Workspace::new().fallback(a_row, b, (lo, hi), chunk, &mut cols, &mut vals);
    cols.truncate(n);
    vals.truncate(n);
    RowResult {
        cols,
        vals,
        overflowed: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    #[test]
    fn fallback_spans_many_chunks() {
        let a = crate::synth::uniform(20, 40, 0.2, 1);
        let b = crate::synth::uniform(40, 5000, 0.05, 2);
        let c = oracle::reference_spgemm(&a, &b).unwrap();
        for i in 0..a.nrows() {
            let r = fallback_accumulate(a.row(i), &b, 64);
            assert_eq!(r.cols, c.row(i).0);
            assert_eq!(r.vals, c.row(i).1);
        }
    }

    #[test]
    fn fallback_distinct_products() {
        let a = CsrMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]);
        let b = CsrMatrix::from_triplets(2, 300, &[(0, 0, 1.0), (0, 299, 2.0), (1, 150, 3.0)]);
        let r = fallback_accumulate(a.row(0), &b, 64);
        assert_eq!(r.count(), 3);
        assert_eq!(r.cols, vec![0, 150, 299]);
        assert_eq!(fallback_accumulate(CsrMatrix::zeros(1, 2).row(0), &b, 64).count(), 0);
    }
}
