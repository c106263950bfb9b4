//! Indirect sorting of accumulated rows.
//!
//! Columns are sorted together with the slot index of their value, and the
//! values are gathered once at the end. When the column fits in 18 bits and
//! the row has at most 2^14 entries, column and slot are packed into one
//! `u32` and radix-sorted on the column bits only.

use crate::error::SortError;

const SLOT_BITS: u32 = 14;
const SLOT_MASK: u32 = (1 << SLOT_BITS) - 1;
const DIGIT_BITS: u32 = 9;
const BUCKETS: usize = 1 << DIGIT_BITS;

/// Columns must be strictly below this for the packed path.
pub const PACKED_MAX_COL: u32 = 1 << (32 - SLOT_BITS);
/// Rows may hold at most this many entries for the packed path.
pub const PACKED_MAX_COUNT: usize = 1 << SLOT_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortPath {
    /// `(col << 14) | slot` keys, radix sort over the column bits.
    Packed,
    /// `(col, slot)` pairs, comparison sort.
    Pairs,
}

/// Path taken for a row of `count` entries whose largest column is `max_col`.
pub fn sort_path(count: usize, max_col: u32) -> SortPath {
    if max_col < PACKED_MAX_COL && count <= PACKED_MAX_COUNT {
        SortPath::Packed
    } else {
        SortPath::Pairs
    }
}

/// Reusable buffers for row sorting.
#[derive(Debug, Default)]
pub struct RowSorter {
    keys: Vec<u32>,
    scratch: Vec<u32>,
    pairs: Vec<(u32, u32)>,
    vals: Vec<f64>,
}

impl RowSorter {
    pub fn sort(&mut self, cols: &mut [u32], vals: &mut [f64], max_col: u32) -> Result<(), SortError> {
        self.sort_with(sort_path(cols.len(), max_col), cols, vals, max_col)
    }

    /// Sorts with an explicit path. `Packed` requires the packed preconditions.
    pub fn sort_with(
        &mut self,
        path: SortPath,
        cols: &mut [u32],
        vals: &mut [f64],
        max_col: u32,
    ) -> Result<(), SortError> {
        if cols.len() != vals.len() {
            return Err(SortError::LengthMismatch(cols.len(), vals.len()));
        }
        if cols.len() < 2 {
            return Ok(());
        }
        self.vals.clear();
        self.vals.extend_from_slice(vals);
        match path {
            SortPath::Packed => {
                assert!(max_col < PACKED_MAX_COL && cols.len() <= PACKED_MAX_COUNT);
                self.packed(cols, vals, max_col);
            }
            SortPath::Pairs => self.pairs(cols, vals),
        }
        match cols.windows(2).find(|w| w[0] == w[1]) {
            Some(w) => Err(SortError::DuplicateColumn(w[0])),
            None => Ok(()),
        }
    }

    fn packed(&mut self, cols: &mut [u32], vals: &mut [f64], max_col: u32) {
        let n = cols.len();
        self.keys.clear();
        self.keys
            .extend(cols.iter().enumerate().map(|(slot, &c)| (c << SLOT_BITS) | slot as u32));
        self.scratch.resize(n, 0);

        let col_bits = 32 - max_col.leading_zeros();
        let passes = col_bits.div_ceil(DIGIT_BITS);
        let mut counts = [0usize; BUCKETS];
        for pass in 0..passes {
            let shift = SLOT_BITS + pass * DIGIT_BITS;
            counts.fill(0);
            for &k in &self.keys {
                counts[((k >> shift) as usize) & (BUCKETS - 1)] += 1;
            }
            let mut sum = 0;
            for c in counts.iter_mut() {
                let t = *c;
                *c = sum;
                sum += t;
            }
            for &k in &self.keys {
                let d = ((k >> shift) as usize) & (BUCKETS - 1);
                self.scratch[counts[d]] = k;
                counts[d] += 1;
            }
            std::mem::swap(&mut self.keys, &mut self.scratch);
        }

        for (n, &k) in self.keys.iter().enumerate() {
            cols[n] = k >> SLOT_BITS;
            vals[n] = self.vals[(k & SLOT_MASK) as usize];
        }
    }

    fn pairs(&mut self, cols: &mut [u32], vals: &mut [f64]) {
        self.pairs.clear();
        self.pairs
            .extend(cols.iter().enumerate().map(|(slot, &c)| (c, slot as u32)));
        self.pairs.sort_unstable();
        for (n, &(c, slot)) in self.pairs.iter().enumerate() {
            cols[n] = c;
            vals[n] = self.vals[slot as usize];
        }
    }
}

/// Sorts a row of distinct columns in place, permuting values alike.
pub fn sort_row(cols: &mut [u32], vals: &mut [f64], max_col: u32) -> Result<(), SortError> {
    RowSorter::default().sort(cols, vals, max_col)
}

pub fn sort_row_with(path: SortPath, cols: &mut [u32], vals: &mut [f64], max_col: u32) -> Result<(), SortError> {
    RowSorter::default().sort_with(path, cols, vals, max_col)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_permutes_values() {
        let mut cols = vec![9, 2, 4];
        let mut vals = vec![0.9, 0.2, 0.4];
        sort_row(&mut cols, &mut vals, 9).unwrap();
        assert_eq!(cols, vec![2, 4, 9]);
        assert_eq!(vals, vec![0.2, 0.4, 0.9]);
    }

    #[test]
    fn path_boundaries() {
        assert_eq!(sort_path(10, (1 << 18) - 1), SortPath::Packed);
        assert_eq!(sort_path(10, 1 << 18), SortPath::Pairs);
        assert_eq!(sort_path(1 << 14, 5), SortPath::Packed);
        assert_eq!(sort_path((1 << 14) + 1, 5), SortPath::Pairs);
    }

    #[test]
    fn duplicates_are_an_error() {
        let mut cols = vec![3, 1, 3];
        let mut vals = vec![0.0; 3];
        assert_eq!(sort_row(&mut cols, &mut vals, 3), Err(SortError::DuplicateColumn(3)));
        let mut cols = vec![3, 1, 3];
        assert_eq!(
            sort_row_with(SortPath::Pairs, &mut cols, &mut vals, 3),
            Err(SortError::DuplicateColumn(3))
        );
    }

    #[test]
    fn mismatched_lengths() {
        assert!(sort_row(&mut [1, 2], &mut [0.0], 2).is_err());
    }
}
