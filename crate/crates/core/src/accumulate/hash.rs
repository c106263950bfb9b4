use super::RowResult;
use crate::csr::CsrMatrix;
use crate::hll::hash64;

/// Fraction of slots a table may fill before the row counts as overflowed.
pub const HASH_LOAD_LIMIT: f64 = 0.8;

const EMPTY: u32 = u32::MAX;

#[inline]
pub(crate) fn load_limit(capacity: usize) -> usize {
    (capacity as f64 * HASH_LOAD_LIMIT).floor() as usize
}

/// Open-addressing table with linear probing, reused across rows.
#[derive(Debug, Default)]
pub(crate) struct HashTable {
    keys: Vec<u32>,
    vals: Vec<f64>,
    /// Occupied slots in insertion order.
    used: Vec<u32>,
}

impl HashTable {
    /// Accumulates the row into a table of `capacity` slots. Returns `false`
    /// when the row needs more entries than the load limit allows; the table
    /// is left empty in that case.
    pub(crate) fn accumulate(&mut self, a_row: (&[u32], &[f64]), b: &CsrMatrix, capacity: usize) -> bool {
        if self.keys.len() < capacity {
            self.keys.resize(capacity, EMPTY);
            self.vals.resize(capacity, 0.0);
        }
        let limit = load_limit(capacity);
        let pow2 = capacity.is_power_of_two();
        let mask = capacity.wrapping_sub(1);
        let (a_cols, a_vals) = a_row;
        for (&k, &av) in a_cols.iter().zip(a_vals) {
            let (b_cols, b_vals) = b.row(k as usize);
            for (&j, &bv) in b_cols.iter().zip(b_vals) {
                let h = hash64(j);
                let mut slot = if pow2 {
                    h as usize & mask
                } else {
                    ((h as u128 * capacity as u128) >> 64) as usize
                };
                loop {
                    let key = self.keys[slot];
                    if key == j {
                        self.vals[slot] += av * bv;
                        break;
                    }
                    if key == EMPTY {
                        if self.used.len() == limit {
                            self.reset();
                            return false;
                        }
                        self.keys[slot] = j;
                        self.vals[slot] = 0.0 + av * bv;
                        self.used.push(slot as u32);
                        break;
                    }
                    slot += 1;
                    if slot == capacity {
                        slot = 0;
                    }
                }
            }
        }
        true
    }

    pub(crate) fn len(&self) -> usize {
        self.used.len()
    }

    /// Moves entries (in insertion order) into the output slices and clears
    /// the table.
    pub(crate) fn drain_into(&mut self, cols: &mut [u32], vals: &mut [f64]) {
        for (n, &slot) in self.used.iter().enumerate() {
            let s = slot as usize;
            cols[n] = self.keys[s];
            vals[n] = self.vals[s];
            self.keys[s] = EMPTY;
        }
        self.used.clear();
    }

    pub(crate) fn reset(&mut self) {
        for &slot in &self.used {
            self.keys[slot as usize] = EMPTY;
        }
        self.used.clear();
    }
}

/// Hash-table accumulation of one output row. The result is unsorted and
/// flagged as overflowed (with no entries) once more than 80% of `capacity`
/// would be occupied.
pub fn hash_accumulate(a_row: (&[u32], &[f64]), b: &CsrMatrix, capacity: usize) -> RowResult {
    let mut table = HashTable::default();
    if !table.accumulate(a_row, b, capacity) {
        return RowResult::overflow();
    }
    let n = table.len();
    let mut out = RowResult {
        cols: vec![0; n],
        vals: vec![0.0; n],
        overflowed: false,
    };
    table.drain_into(&mut out.cols, &mut out.vals);
    out
}
