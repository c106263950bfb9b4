use super::RowResult;
use crate::csr::CsrMatrix;

/// Dense value array plus occupancy bitmap over a column window.
#[derive(Debug, Default)]
pub(crate) struct DenseArea {
    vals: Vec<f64>,
    bits: Vec<u64>,
}

impl DenseArea {
    pub(crate) fn ensure(&mut self, width: usize) {
        if self.vals.len() < width {
            self.vals.resize(width, 0.0);
            self.bits.resize(width.div_ceil(64), 0);
        }
    }

    /// Adds one product at window offset `x`.
    #[inline(always)]
    pub(crate) fn add(&mut self, x: usize, v: f64, bitmap_query: bool) {
        let (w, mask) = (x >> 6, 1u64 << (x & 63));
        if bitmap_query {
            if self.bits[w] & mask == 0 {
                self.bits[w] |= mask;
            }
        } else {
            self.bits[w] |= mask;
        }
        self.vals[x] += v;
    }

    /// Accumulates a row whose output columns all lie in `[lo, lo + width)`.
    pub(crate) fn accumulate(
        &mut self,
        a_row: (&[u32], &[f64]),
        b: &CsrMatrix,
        lo: u32,
        width: usize,
        bitmap_query: bool,
    ) {
        self.ensure(width);
        let (a_cols, a_vals) = a_row;
        for (&k, &av) in a_cols.iter().zip(a_vals) {
            let (b_cols, b_vals) = b.row(k as usize);
            for (&j, &bv) in b_cols.iter().zip(b_vals) {
                self.add((j - lo) as usize, av * bv, bitmap_query);
            }
        }
    }

    pub(crate) fn count(&self, width: usize) -> usize {
        self.bits[..width.div_ceil(64)]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    /// Writes occupied entries in column order and clears the window.
    /// Returns the number written.
    pub(crate) fn drain_into(&mut self, lo: u32, width: usize, cols: &mut [u32], vals: &mut [f64]) -> usize {
        let mut n = 0;
        for w in 0..width.div_ceil(64) {
            let mut word = self.bits[w];
            while word != 0 {
                let x = (w << 6) | word.trailing_zeros() as usize;
                cols[n] = lo + x as u32;
                vals[n] = self.vals[x];
                self.vals[x] = 0.0;
                n += 1;
                word &= word - 1;
            }
            self.bits[w] = 0;
        }
        n
    }

    /// Clears the window without emitting anything.
    pub(crate) fn clear(&mut self, width: usize) {
        for w in 0..width.div_ceil(64) {
            let mut word = self.bits[w];
            while word != 0 {
                let x = (w << 6) | word.trailing_zeros() as usize;
                self.vals[x] = 0.0;
                word &= word - 1;
            }
            self.bits[w] = 0;
        }
    }
}

/// Dense accumulation over the column window `[span_lo, span_hi]`. Output is
/// sorted; the row is flagged as overflowed (with no entries) when it holds
/// more than `alloc` entries.
pub fn dense_accumulate(
    a_row: (&[u32], &[f64]),
    b: &CsrMatrix,
    span_lo: u32,
    span_hi: u32,
    bitmap_query: bool,
    alloc: usize,
) -> RowResult {
    let width = (span_hi - span_lo) as usize + 1;
    let mut area = DenseArea::default();
    area.accumulate(a_row, b, span_lo, width, bitmap_query);
    let n = area.count(width);
    if n > alloc {
        return RowResult::overflow();
    }
    let mut out = RowResult {
        cols: vec![0; n],
        vals: vec![0.0; n],
        overflowed: false,
    };
    area.drain_into(span_lo, width, &mut out.cols, &mut out.vals);
    out
}
