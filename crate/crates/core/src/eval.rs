//! Estimation-quality measurements: per-row relative error of the sketch
//! estimates, the share of rows that would overflow their planned
//! accumulator, and the error of the sampled compression ratio.

use serde::Serialize;

use crate::accumulate::{plan_row, would_overflow, TierConfig};
use crate::analysis::{build_b_sketches, check_dims, compute_row_stats, sample_cr, RowStats, SamplingParams, WorkflowKind};
use crate::csr::CsrMatrix;
use crate::engine::EstimationError;
use crate::error::{DimensionMismatch, HllError};
use crate::hll::precision_for_registers;
use crate::predict::{estimate_pass, symbolic_pass, PredictionKind};

/// Exact per-row sizes of one product, computed once and shared by every
/// evaluated configuration.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub stats: RowStats,
    pub row_nnz: Vec<usize>,
    pub nnz_c: usize,
}

impl GroundTruth {
    pub fn new(a: &CsrMatrix, b: &CsrMatrix) -> Result<Self, DimensionMismatch> {
        check_dims(a, b)?;
        let stats = compute_row_stats(a, b)?;
        let exact = symbolic_pass(a, b, &stats, &TierConfig::default(), 1.0).prediction;
        let row_nnz: Vec<usize> = exact.per_row.iter().map(|&x| x as usize).collect();
        Ok(Self {
            nnz_c: row_nnz.iter().sum(),
            row_nnz,
            stats,
        })
    }

    pub fn cr_true(&self) -> f64 {
        if self.nnz_c == 0 {
            0.0
        } else {
            self.stats.total_products as f64 / self.nnz_c as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationEval {
    pub registers: usize,
    pub coef: f64,
    pub mean_rel_err: f64,
    pub std_rel_err: f64,
    /// Rows with a nonempty output.
    pub rows: usize,
    pub overflow_rows: usize,
    /// `overflow_rows / rows`.
    pub overflow_ratio: f64,
    pub cr_true: f64,
    pub cr_sampled: f64,
    /// `|cr_sampled − cr_true| / cr_true`.
    pub cr_rel_err: f64,
}

/// Evaluates sketch estimates at one register count. `coef` overrides the
/// binning coefficient, otherwise the precision's default applies.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    a: &CsrMatrix,
    b: &CsrMatrix,
    truth: &GroundTruth,
    registers: usize,
    coef: Option<f64>,
    tiers: &TierConfig,
    sampling: &SamplingParams,
    seed: u64,
) -> Result<EstimationEval, HllError> {
    let p = precision_for_registers(registers)?;
    let sketches = build_b_sketches(b, p);
    let pred = estimate_pass(a, &sketches);
    let coef = coef.unwrap_or_else(|| tiers.coef_for(registers));
    let err = EstimationError::measure(&pred.per_row, &truth.row_nnz);

    let stats = &truth.stats;
    let overflow_rows = (0..stats.nrows())
        .filter(|&i| {
            let plan = plan_row(
                PredictionKind::Estimated,
                pred.per_row[i],
                stats.products[i],
                stats.span_width(i),
                WorkflowKind::HllEstimation,
                coef,
                tiers,
            );
            would_overflow(&plan, truth.row_nnz[i])
        })
        .count();

    let sampled = sample_cr(a, &sketches, stats, sampling, seed);
    let cr_true = truth.cr_true();
    let cr_rel_err = if cr_true > 0.0 {
        (sampled.cr_hat - cr_true).abs() / cr_true
    } else {
        0.0
    };
    Ok(EstimationEval {
        registers,
        coef,
        mean_rel_err: err.mean_rel_err,
        std_rel_err: err.std_rel_err,
        rows: err.rows,
        overflow_rows,
        overflow_ratio: if err.rows > 0 {
            overflow_rows as f64 / err.rows as f64
        } else {
            0.0
        },
        cr_true,
        cr_sampled: sampled.cr_hat,
        cr_rel_err,
    })
}
