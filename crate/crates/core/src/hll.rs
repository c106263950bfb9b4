//! HyperLogLog sketches over 32-bit column indices.
//!
//! Register index comes from the low `p` bits of the hash, the rank from the
//! remaining `64 - p` high bits. Registers are one byte each and the rank is
//! naturally capped at `64 - p + 1`.

use std::sync::atomic::{AtomicU8, Ordering};

use crate::error::HllError;

/// Largest supported register count.
pub const MAX_REGISTERS: usize = 128;

/// Deterministic 64-bit avalanche finalizer applied to column indices.
#[inline]
pub fn hash64(key: u32) -> u64 {
    let mut z = (key as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Register slot and rank for a hashed key at precision `p`.
#[inline]
fn slot_and_rank(hash: u64, p: u8) -> (usize, u8) {
    let idx = (hash & ((1u64 << p) - 1)) as usize;
    let w = hash >> p;
    // top p bits of w are zero, so leading_zeros counts them too
    let rank = (w.leading_zeros() as u8 - p) + 1;
    (idx, rank)
}

fn bias_constant(m: usize) -> f64 {
    match m {
        32 => 0.697,
        64 => 0.709,
        _ => 0.7213 / (1.0 + 1.079 / m as f64),
    }
}

/// Precision bits for a register count of 32, 64 or 128.
pub fn precision_for_registers(m: usize) -> Result<u8, HllError> {
    match m {
        32 => Ok(5),
        64 => Ok(6),
        128 => Ok(7),
        _ => Err(HllError::InvalidPrecision(m.trailing_zeros() as u8)),
    }
}

/// Fixed-size HyperLogLog sketch with `2^p` one-byte registers.
///
/// Storage is inline so sketches are `Copy` and can be passed between
/// workers freely.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct HllSketch {
    p: u8,
    registers: [u8; MAX_REGISTERS],
}

impl std::fmt::Debug for HllSketch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HllSketch")
            .field("p", &self.p)
            .field("registers", &self.registers())
            .finish()
    }
}

impl HllSketch {
    pub fn new(p: u8) -> Result<Self, HllError> {
        if !(5..=7).contains(&p) {
            return Err(HllError::InvalidPrecision(p));
        }
        Ok(Self {
            p,
            registers: [0; MAX_REGISTERS],
        })
    }

    pub fn with_registers(m: usize) -> Result<Self, HllError> {
        Self::new(precision_for_registers(m)?)
    }

    /// Sketch of every key in `keys`.
    pub fn from_keys<I: IntoIterator<Item = u32>>(p: u8, keys: I) -> Result<Self, HllError> {
        let mut s = Self::new(p)?;
        for k in keys {
            s.insert(k);
        }
        Ok(s)
    }

    #[inline]
    pub fn precision(&self) -> u8 {
        self.p
    }

    #[inline]
    pub fn num_registers(&self) -> usize {
        1 << self.p
    }

    #[inline]
    pub fn registers(&self) -> &[u8] {
        &self.registers[..self.num_registers()]
    }

    pub fn is_empty(&self) -> bool {
        self.registers().iter().all(|&r| r == 0)
    }

    /// Inserts a key. Repeated keys leave the sketch unchanged.
    #[inline]
    pub fn insert(&mut self, key: u32) {
        self.insert_hash(hash64(key));
    }

    #[inline]
    pub fn insert_hash(&mut self, hash: u64) {
        let (idx, rank) = slot_and_rank(hash, self.p);
        let r = &mut self.registers[idx];
        if rank > *r {
            *r = rank;
        }
    }

    /// Register-wise maximum of two sketches of equal precision.
    pub fn merge(&self, other: &HllSketch) -> Result<HllSketch, HllError> {
        let mut out = *self;
        out.merge_from(other)?;
        Ok(out)
    }

    pub fn merge_from(&mut self, other: &HllSketch) -> Result<(), HllError> {
        if self.p != other.p {
            return Err(HllError::PrecisionMismatch(self.p, other.p));
        }
        self.merge_unchecked(other);
        Ok(())
    }

    /// Merge without the precision check; callers guarantee equal `p`.
    #[inline]
    pub(crate) fn merge_unchecked(&mut self, other: &HllSketch) {
        let m = self.num_registers();
        for (a, &b) in self.registers[..m].iter_mut().zip(&other.registers[..m]) {
            *a = (*a).max(b);
        }
    }

    /// Cardinality estimate with linear counting for the small range.
    pub fn estimate(&self) -> f64 {
        let m = self.num_registers();
        let mf = m as f64;
        let mut sum = 0.0;
        let mut zeros = 0usize;
        for &r in self.registers() {
            sum += f64::exp2(-(r as f64));
            if r == 0 {
                zeros += 1;
            }
        }
        let raw = bias_constant(m) * mf * mf / sum;
        if raw <= 2.5 * mf && zeros > 0 {
            mf * (mf / zeros as f64).ln()
        } else {
            raw
        }
    }

    pub fn clear(&mut self) {
        self.registers = [0; MAX_REGISTERS];
    }
}

/// Sketch that several threads can update at once. Each register only ever
/// grows, so updates commute and a relaxed `fetch_max` suffices.
pub struct AtomicHllSketch {
    p: u8,
    registers: Box<[AtomicU8]>,
}

impl AtomicHllSketch {
    pub fn new(p: u8) -> Result<Self, HllError> {
        HllSketch::new(p)?;
        Ok(Self {
            p,
            registers: (0..1usize << p).map(|_| AtomicU8::new(0)).collect(),
        })
    }

    #[inline]
    pub fn insert(&self, key: u32) {
        let (idx, rank) = slot_and_rank(hash64(key), self.p);
        self.registers[idx].fetch_max(rank, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> HllSketch {
        let mut s = HllSketch::new(self.p).expect("precision checked at construction");
        for (dst, src) in s.registers.iter_mut().zip(self.registers.iter()) {
            *dst = src.load(Ordering::Relaxed);
        }
        s
    }
}
