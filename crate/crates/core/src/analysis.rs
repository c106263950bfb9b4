//! Lightweight pre-multiplication analysis.
//!
//! Gathers per-row intermediate-product counts and column spans, the input
//! expansion ratio (products per nonzero of A), per-row sketches of B and a
//! sampled output compression ratio. Those numbers drive register-count and
//! workflow selection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::csr::CsrMatrix;
use crate::error::DimensionMismatch;
use crate::hll::HllSketch;

/// Register count used below this expansion ratio is 32, at or above it 64.
pub const REGISTER_ER_THRESHOLD: f64 = 48.0;
/// Average products per row below which no size prediction is run.
pub const UPPER_BOUND_AVG_PRODUCTS: f64 = 64.0;
pub const ESTIMATION_MIN_ER: f64 = 8.0;
pub const ESTIMATION_MIN_CR: f64 = 8.0;

/// Per-row metadata of B: length and first/last column.
#[derive(Debug, Clone, Default)]
pub struct BRowMeta {
    pub nnz: Vec<u32>,
    pub first: Vec<u32>,
    pub last: Vec<u32>,
}

impl BRowMeta {
    pub fn new(b: &CsrMatrix) -> Self {
        let n = b.nrows();
        let mut meta = BRowMeta {
            nnz: Vec::with_capacity(n),
            first: Vec::with_capacity(n),
            last: Vec::with_capacity(n),
        };
        for k in 0..n {
            let cols = b.row(k).0;
            meta.nnz.push(cols.len() as u32);
            meta.first.push(cols.first().copied().unwrap_or(u32::MAX));
            meta.last.push(cols.last().copied().unwrap_or(0));
        }
        meta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowStats {
    /// Intermediate products per row of A.
    pub products: Vec<u64>,
    pub total_products: u64,
    /// Input expansion ratio, `total_products / nnz(A)`.
    pub er: f64,
    /// Smallest and largest reachable output column per row; both 0 for rows
    /// without products.
    pub span_lo: Vec<u32>,
    pub span_hi: Vec<u32>,
}

impl RowStats {
    pub fn nrows(&self) -> usize {
        self.products.len()
    }

    pub fn avg_products(&self) -> f64 {
        if self.products.is_empty() {
            0.0
        } else {
            self.total_products as f64 / self.products.len() as f64
        }
    }

    /// Width of the reachable column range of row `i` (0 when empty).
    #[inline]
    pub fn span_width(&self, i: usize) -> usize {
        if self.products[i] == 0 {
            0
        } else {
            (self.span_hi[i] - self.span_lo[i]) as usize + 1
        }
    }
}

pub(crate) fn check_dims(a: &CsrMatrix, b: &CsrMatrix) -> Result<(), DimensionMismatch> {
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

pub fn compute_row_stats(a: &CsrMatrix, b: &CsrMatrix) -> Result<RowStats, DimensionMismatch> {
    check_dims(a, b)?;
    Ok(compute_row_stats_with(a, &BRowMeta::new(b)))
}

/// Row statistics from precomputed B metadata.
pub fn compute_row_stats_with(a: &CsrMatrix, meta: &BRowMeta) -> RowStats {
    let per_row: Vec<(u64, u32, u32)> = (0..a.nrows())
        .into_par_iter()
        .map(|i| {
            let mut products = 0u64;
            let mut lo = u32::MAX;
            let mut hi = 0u32;
            for &k in a.row(i).0 {
                let k = k as usize;
                let n = meta.nnz[k];
                if n > 0 {
                    products += n as u64;
                    lo = lo.min(meta.first[k]);
                    hi = hi.max(meta.last[k]);
                }
            }
            if products == 0 {
                (0, 0, 0)
            } else {
                (products, lo, hi)
            }
        })
        .collect();

    let total_products: u64 = per_row.iter().map(|r| r.0).sum();
    let er = if a.nnz() > 0 {
        total_products as f64 / a.nnz() as f64
    } else {
        0.0
    };
    RowStats {
        products: per_row.iter().map(|r| r.0).collect(),
        total_products,
        er,
        span_lo: per_row.iter().map(|r| r.1).collect(),
        span_hi: per_row.iter().map(|r| r.2).collect(),
    }
}

/// One sketch per row of B holding exactly that row's column indices.
pub fn build_b_sketches(b: &CsrMatrix, p: u8) -> Vec<HllSketch> {
    let empty = HllSketch::new(p).expect("precision must be 5, 6 or 7");
    (0..b.nrows())
        .into_par_iter()
        .map(|k| {
            let mut s = empty;
            for &c in b.row(k).0 {
                s.insert(c);
            }
            s
        })
        .collect()
}

/// Merge of the B-row sketches selected by row `i` of A.
#[inline]
pub fn merged_row_sketch(a: &CsrMatrix, b_sketches: &[HllSketch], i: usize, empty: HllSketch) -> HllSketch {
    let mut s = empty;
    for &k in a.row(i).0 {
        s.merge_unchecked(&b_sketches[k as usize]);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingParams {
    pub ratio: f64,
    pub min_rows: usize,
    pub max_rows: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            ratio: 0.03,
            min_rows: 600,
            max_rows: 10_000,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(format!("sample ratio {} is outside (0, 1]", self.ratio));
        }
        if self.min_rows == 0 || self.max_rows < self.min_rows {
            return Err(format!("sample bounds {}..{} are invalid", self.min_rows, self.max_rows));
        }
        Ok(())
    }

    /// Rows to sample out of `nrows`.
    pub fn sample_size(&self, nrows: usize) -> usize {
        if nrows <= self.min_rows {
            return nrows;
        }
        let n = (self.ratio * nrows as f64).round() as usize;
        n.clamp(self.min_rows, self.max_rows.max(self.min_rows)).min(nrows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledCr {
    /// Ratio-of-sums estimate: sampled products over sampled estimates.
    pub cr_hat: f64,
    pub mean_row_cr: f64,
    /// Population standard deviation of per-row ratios.
    pub std_row_cr: f64,
    pub n_sampled: usize,
    pub seed: u64,
}

/// Estimates the output compression ratio from a uniform sample of rows.
///
/// `b_sketches` must all share one precision.
pub fn sample_cr(
    a: &CsrMatrix,
    b_sketches: &[HllSketch],
    stats: &RowStats,
    params: &SamplingParams,
    seed: u64,
) -> SampledCr {
    let nrows = a.nrows();
    let n = params.sample_size(nrows);
    let rows: Vec<usize> = if n == nrows {
        (0..nrows).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, nrows, n).into_vec();
        idx.sort_unstable();
        idx
    };

    let empty = match b_sketches.first() {
        Some(s) => HllSketch::new(s.precision()).expect("valid sketch precision"),
        None => HllSketch::new(6).expect("valid precision"),
    };

    let per_row: Vec<(u64, f64)> = rows
        .par_iter()
        .map(|&i| {
            let est = if stats.products[i] == 0 {
                0.0
            } else {
                merged_row_sketch(a, b_sketches, i, empty).estimate()
            };
            (stats.products[i], est)
        })
        .collect();

    let sum_products: u64 = per_row.iter().map(|r| r.0).sum();
    let sum_est: f64 = per_row.iter().map(|r| r.1).sum();
    let cr_hat = sum_products as f64 / sum_est.max(1.0);

    let ratios: Vec<f64> = per_row
        .iter()
        .map(|&(p, est)| if p == 0 { 1.0 } else { p as f64 / est.max(1.0) })
        .collect();
    let (mean, std) = mean_and_std(&ratios);

    SampledCr {
        cr_hat,
        mean_row_cr: mean,
        std_row_cr: std,
        n_sampled: rows.len(),
        seed,
    }
}

/// Mean and population standard deviation; zeros for an empty slice.
pub fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn select_registers(er: f64) -> usize {
    if er < REGISTER_ER_THRESHOLD {
        32
    } else {
        64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkflowKind {
    /// Allocate by intermediate-product counts; no size prediction.
    UpperBound,
    /// Per-row sizes from merged sketches, with overflow fallback.
    HllEstimation,
    /// Exact per-row sizes from a symbolic pass.
    Symbolic,
}

impl WorkflowKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            WorkflowKind::UpperBound => "upper_bound",
            WorkflowKind::HllEstimation => "hll_estimation",
            WorkflowKind::Symbolic => "symbolic",
        }
    }
}

impl std::fmt::Display for WorkflowKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WorkflowChoice {
    pub kind: WorkflowKind,
    pub registers: usize,
}

pub fn select_workflow(avg_products: f64, er: f64, cr_hat: f64) -> WorkflowKind {
    if avg_products < UPPER_BOUND_AVG_PRODUCTS {
        WorkflowKind::UpperBound
    } else if er >= ESTIMATION_MIN_ER && cr_hat >= ESTIMATION_MIN_CR {
        WorkflowKind::HllEstimation
    } else {
        WorkflowKind::Symbolic
    }
}

/// Relative variance of the sampled `1/CR`: `(ε² + CV²(1 + ε²)) / n` with
/// `ε = 1.04 / √m`.
pub fn cr_variance_bound(cv: f64, registers: usize, n_sampled: usize) -> f64 {
    let eps2 = 1.04 * 1.04 / registers as f64;
    (eps2 + cv * cv * (1.0 + eps2)) / n_sampled as f64
}

/// Everything the analysis step learned about a multiplication.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    #[serde(skip)]
    pub stats: RowStats,
    pub nnz_a: usize,
    pub total_products: u64,
    pub er: f64,
    pub avg_products: f64,
    pub sampled: Option<SampledCr>,
    pub choice: WorkflowChoice,
}

/// Full analysis: stats, sketches at the selected register count, sampled CR
/// and the workflow decision. Returns the sketches so a caller can reuse them.
pub fn analyze(
    a: &CsrMatrix,
    b: &CsrMatrix,
    params: &SamplingParams,
    seed: u64,
    registers_override: Option<usize>,
) -> Result<(AnalysisReport, Vec<HllSketch>), DimensionMismatch> {
    let stats = compute_row_stats(a, b)?;
    let registers = registers_override.unwrap_or_else(|| select_registers(stats.er));
    let p = crate::hll::precision_for_registers(registers).expect("32, 64 or 128 registers");
    let sketches = build_b_sketches(b, p);
    let sampled = sample_cr(a, &sketches, &stats, params, seed);
    let kind = select_workflow(stats.avg_products(), stats.er, sampled.cr_hat);
    let report = AnalysisReport {
        nnz_a: a.nnz(),
        total_products: stats.total_products,
        er: stats.er,
        avg_products: stats.avg_products(),
        sampled: Some(sampled),
        choice: WorkflowChoice { kind, registers },
        stats,
    };
    Ok((report, sketches))
}
