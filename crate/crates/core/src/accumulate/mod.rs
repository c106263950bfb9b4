//! Numeric accumulation with a hybrid accumulator family.
//!
//! Every output row is binned to one accumulator: a tiered open-addressing
//! hash table, an oversized "enhanced" hash table for long rows, a dense
//! array over the row's reachable column span, expand-sort-compact for very
//! short rows, or the chunked dense fallback for anything else (and for rows
//! that overflowed their planned tier).

mod dense;
mod esc;
mod hash;
mod sort;
mod workspace;

use serde::Serialize;

pub use dense::dense_accumulate;
pub use esc::esc_accumulate;
pub use hash::{hash_accumulate, HASH_LOAD_LIMIT};
pub use sort::{sort_path, sort_row, sort_row_with, RowSorter, SortPath, PACKED_MAX_COL, PACKED_MAX_COUNT};
pub use workspace::{fallback_accumulate, RowOutcome, Workspace};

use crate::analysis::{RowStats, WorkflowChoice, WorkflowKind};
use crate::predict::{PredictionKind, SizePrediction};

/// Accumulator tiers and binning coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TierConfig {
    /// Hash table slot counts, ascending powers of two.
    pub hash_capacities: Vec<usize>,
    pub enhanced_hash_capacity: usize,
    /// Dense accumulator widths, ascending.
    pub dense_spans: Vec<usize>,
    /// Rows with fewer products use ESC under the upper-bound workflow.
    pub esc_max_products: u64,
    pub expansion_coef: f64,
    /// Coefficient used instead of `expansion_coef` with 32-register sketches.
    pub low_precision_coef: f64,
    /// Dense accumulators query the bitmap before writing above this CR.
    pub bitmap_query_threshold: f64,
}

impl Default for TierConfig {
    fn default() -> Self {
        let hash_capacities = vec![256, 512, 1024, 2048, 4096];
        Self {
            enhanced_hash_capacity: 3 * hash_capacities[hash_capacities.len() - 1],
            hash_capacities,
            dense_spans: vec![1024, 2048, 4096, 8192, 16384],
            esc_max_products: 64,
            expansion_coef: 1.5,
            low_precision_coef: 2.0,
            bitmap_query_threshold: 2.0,
        }
    }
}

impl TierConfig {
    /// Expansion coefficient for sketches with `registers` registers.
    pub fn coef_for(&self, registers: usize) -> f64 {
        if registers == 32 {
            self.low_precision_coef
        } else {
            self.expansion_coef
        }
    }

    /// Uses `coef` at every precision.
    pub fn with_coef(mut self, coef: f64) -> Self {
        self.expansion_coef = coef;
        self.low_precision_coef = coef;
        self
    }

    pub fn largest_dense_span(&self) -> usize {
        self.dense_spans.last().copied().unwrap_or(0)
    }

    pub fn largest_hash_capacity(&self) -> usize {
        self.hash_capacities.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), String> {
        let ascending = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]);
        if self.hash_capacities.is_empty() || self.dense_spans.is_empty() {
            return Err("tier lists must not be empty".into());
        }
        if !ascending(&self.hash_capacities) || !ascending(&self.dense_spans) {
            return Err("tier lists must be strictly ascending".into());
        }
        if self.hash_capacities.iter().any(|c| !c.is_power_of_two()) {
            return Err("hash capacities must be powers of two".into());
        }
        if self.enhanced_hash_capacity < self.largest_hash_capacity() {
            return Err("enhanced capacity must not be below the largest hash tier".into());
        }
        if self.expansion_coef < 1.0 || self.low_precision_coef < 1.0 {
            return Err("expansion coefficients must be at least 1".into());
        }
        Ok(())
    }

    /// Smallest tier output size at or above `target`; `target` itself when
    /// it exceeds every tier.
    fn round_up_to_bin(&self, target: u64) -> u64 {
        self.hash_capacities
            .iter()
            .copied()
            .chain(std::iter::once(self.enhanced_hash_capacity))
            .map(|c| c as u64)
            .find(|&c| c >= target)
            .unwrap_or(target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AccumulatorKind {
    Hash,
    EnhancedHash,
    Dense,
    Esc,
    Fallback,
}

/// Binning decision for one output row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RowPlan {
    pub kind: AccumulatorKind,
    /// Hash slots or dense width of the chosen tier.
    pub capacity: usize,
    /// Tier index within its family; ties in resources share an index.
    pub tier: usize,
    /// Output slots reserved for the row.
    pub alloc: usize,
}

impl RowPlan {
    /// Resource rank used for binning order. Hash and dense tiers with the
    /// same index cost the same; the enhanced tier matches the largest
    /// normal tier; ESC is cheapest and the fallback most expensive.
    pub fn resource_rank(&self, tiers: &TierConfig) -> usize {
        match self.kind {
            AccumulatorKind::Esc => 0,
            AccumulatorKind::Hash | AccumulatorKind::Dense => self.tier + 1,
            AccumulatorKind::EnhancedHash => tiers.hash_capacities.len(),
            AccumulatorKind::Fallback => tiers.hash_capacities.len().max(tiers.dense_spans.len()) + 1,
        }
    }
}

/// Bins every row of the output to an accumulator tier.
pub fn plan_rows(
    pred: &SizePrediction,
    stats: &RowStats,
    workflow: WorkflowChoice,
    tiers: &TierConfig,
) -> Vec<RowPlan> {
    let coef = match workflow.kind {
        WorkflowKind::UpperBound => tiers.expansion_coef,
        _ => tiers.coef_for(workflow.registers),
    };
    (0..stats.nrows())
        .map(|i| plan_row(pred.kind, pred.per_row[i], stats.products[i], stats.span_width(i), workflow.kind, coef, tiers))
        .collect()
}

/// Binning rule for a single row.
pub fn plan_row(
    kind: PredictionKind,
    pred: f64,
    products: u64,
    span: usize,
    workflow: WorkflowKind,
    coef: f64,
    tiers: &TierConfig,
) -> RowPlan {
    if products == 0 {
        return RowPlan {
            kind: AccumulatorKind::Dense,
            capacity: 0,
            tier: 0,
            alloc: 0,
        };
    }
    if workflow == WorkflowKind::UpperBound && products < tiers.esc_max_products {
        return RowPlan {
            kind: AccumulatorKind::Esc,
            capacity: products as usize,
            tier: 0,
            alloc: products as usize,
        };
    }

    let mut target = (pred.max(0.0) * coef).ceil().max(1.0) as u64;
    if kind != PredictionKind::Estimated {
        // a true bound must fit under the hash load limit at any coefficient
        target = target.max((pred.max(0.0) / HASH_LOAD_LIMIT).ceil() as u64);
    }
    let hash_tier = tiers.hash_capacities.iter().position(|&c| c as u64 >= target);
    let enhanced_fits = target <= tiers.enhanced_hash_capacity as u64;
    let dense_tier = tiers.dense_spans.iter().position(|&w| w >= span);

    // (kind, capacity, tier)
    let hash_choice = match hash_tier {
        Some(h) => Some((AccumulatorKind::Hash, tiers.hash_capacities[h], h)),
        None if enhanced_fits => Some((
            AccumulatorKind::EnhancedHash,
            tiers.enhanced_hash_capacity,
            tiers.hash_capacities.len() - 1,
        )),
        None => None,
    };
    let (acc, capacity, tier) = match (dense_tier, hash_choice) {
        (Some(d), Some((hk, hc, ht))) => {
            // dense wins ties except against the enhanced tier
            if d < ht || (d == ht && hk == AccumulatorKind::Hash) {
                (AccumulatorKind::Dense, tiers.dense_spans[d], d)
            } else {
                (hk, hc, ht)
            }
        }
        (Some(d), None) => (AccumulatorKind::Dense, tiers.dense_spans[d], d),
        (None, Some(h)) => h,
        (None, None) => (AccumulatorKind::Fallback, tiers.largest_dense_span(), tiers.dense_spans.len()),
    };

    let alloc = match (kind, acc) {
        (_, AccumulatorKind::Fallback) | (PredictionKind::UpperBound, _) => products,
        (PredictionKind::Exact, _) => pred.round() as u64,
        (PredictionKind::Estimated, AccumulatorKind::Dense) => {
            tiers.round_up_to_bin(target).min(span as u64).min(products)
        }
        (PredictionKind::Estimated, _) => (capacity as u64).min(products),
    };
    RowPlan {
        kind: acc,
        capacity,
        tier,
        alloc: alloc as usize,
    }
}

/// Whether the true row size would overflow the planned accumulator: hash
/// tables past their load limit, everything else past its allocation.
pub fn would_overflow(plan: &RowPlan, true_count: usize) -> bool {
    match plan.kind {
        AccumulatorKind::Hash | AccumulatorKind::EnhancedHash => {
            true_count > hash::load_limit(plan.capacity) || true_count > plan.alloc
        }
        AccumulatorKind::Dense => true_count > plan.alloc,
        AccumulatorKind::Esc | AccumulatorKind::Fallback => false,
    }
}

/// Accumulated output of one row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RowResult {
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
    pub overflowed: bool,
}

impl RowResult {
    pub fn count(&self) -> usize {
        self.cols.len()
    }

    pub(crate) fn overflow() -> Self {
        Self {
            cols: Vec::new(),
            vals: Vec::new(),
            overflowed: true,
        }
    }

    /// Pairs sorted by column, for comparing unsorted outputs.
    pub fn sorted_pairs(&self) -> Vec<(u32, f64)> {
        let mut v: Vec<(u32, f64)> = self.cols.iter().copied().zip(self.vals.iter().copied()).collect();
        v.sort_by_key(|p| p.0);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_predictions_never_overflow_at_unit_coef() {
        let tiers = TierConfig::default().with_coef(1.0);
        for kind in [PredictionKind::Exact, PredictionKind::UpperBound] {
            for n in [1u64, 64, 205, 256, 3277, 4096, 9830, 12288] {
                let plan = plan_row(kind, n as f64, n, 1 << 20, WorkflowKind::Symbolic, 1.0, &tiers);
                assert!(!would_overflow(&plan, n as usize), "{kind:?} {n} {plan:?}");
            }
        }
    }

    fn est(pred: f64, products: u64, span: usize) -> RowPlan {
        plan_row(
            PredictionKind::Estimated,
            pred,
            products,
            span,
            WorkflowKind::HllEstimation,
            1.5,
            &TierConfig::default(),
        )
    }

    #[test]
    fn default_tiers_are_valid() {
        let t = TierConfig::default();
        t.validate().unwrap();
        assert_eq!(t.enhanced_hash_capacity, 12288);
        assert_eq!(t.coef_for(32), 2.0);
        assert_eq!(t.coef_for(64), 1.5);
    }

    #[test]
    fn small_estimate_goes_to_smallest_hash() {
        let p = est(100.0, 100_000, 50_000);
        assert_eq!((p.kind, p.capacity, p.alloc), (AccumulatorKind::Hash, 256, 256));
    }

    #[test]
    fn wide_long_row_prefers_dense_over_fallback() {
        // target 15000 exceeds the enhanced tier, span fits the widest dense tier
        let p = est(10_000.0, 1_000_000, 12_000);
        assert_eq!((p.kind, p.capacity), (AccumulatorKind::Dense, 16384));
        // target 12000 fits the enhanced tier, which wins the tie at the top rank
        let q = est(8000.0, 1_000_000, 12_000);
        assert_eq!((q.kind, q.capacity), (AccumulatorKind::EnhancedHash, 12288));
        let r = est(10_000.0, 1_000_000, 20_000);
        assert_eq!(r.kind, AccumulatorKind::Fallback);
        assert_eq!(r.alloc, 1_000_000);
    }

    #[test]
    fn dense_preferred_on_equal_rank() {
        let p = est(100.0, 1000, 900);
        assert_eq!((p.kind, p.capacity), (AccumulatorKind::Dense, 1024));
        assert_eq!(p.alloc, 256);
        let q = est(100.0, 1000, 1500);
        assert_eq!(q.kind, AccumulatorKind::Hash);
    }

    #[test]
    fn esc_only_for_short_upper_bound_rows() {
        let t = TierConfig::default();
        let ub = plan_row(PredictionKind::UpperBound, 50.0, 50, 10_000, WorkflowKind::UpperBound, 1.5, &t);
        assert_eq!((ub.kind, ub.alloc), (AccumulatorKind::Esc, 50));
        let long = plan_row(PredictionKind::UpperBound, 64.0, 64, 100_000, WorkflowKind::UpperBound, 1.5, &t);
        assert_eq!((long.kind, long.alloc), (AccumulatorKind::Hash, 64));
        let sym = plan_row(PredictionKind::Exact, 10.0, 50, 100_000, WorkflowKind::Symbolic, 1.5, &t);
        assert_eq!((sym.kind, sym.alloc), (AccumulatorKind::Hash, 10));
    }

    #[test]
    fn empty_rows_reserve_nothing() {
        let p = est(0.0, 0, 0);
        assert_eq!(p.alloc, 0);
    }

    #[test]
    fn larger_prediction_never_lowers_rank() {
        let t = TierConfig::default();
        for span in [1, 900, 3000, 9000, 16_384, 40_000] {
            let mut last = 0;
            for pred in (1..20_000).step_by(37) {
                let p = plan_row(PredictionKind::Estimated, pred as f64, 1 << 40, span, WorkflowKind::HllEstimation, 1.5, &t);
                let rank = p.resource_rank(&t);
                assert!(rank >= last, "span {span} pred {pred}: {rank} < {last}");
                last = rank;
            }
        }
    }

    #[test]
    fn overflow_rule() {
        let h = RowPlan { kind: AccumulatorKind::Hash, capacity: 256, tier: 0, alloc: 256 };
        assert!(!would_overflow(&h, 204));
        assert!(would_overflow(&h, 205));
        let d = RowPlan { kind: AccumulatorKind::Dense, capacity: 1024, tier: 0, alloc: 300 };
        assert!(!would_overflow(&d, 300));
        assert!(would_overflow(&d, 301));
    }
}
