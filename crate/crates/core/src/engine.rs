//! End-to-end multiplication pipeline.
//!
//! analysis → (sketches) → size prediction and binning → numeric
//! accumulation → overflow fallback → compaction. Every stage is row
//! parallel and separated from the next by a barrier.

use std::borrow::Cow;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::accumulate::{plan_rows, AccumulatorKind, RowOutcome, RowPlan, TierConfig, Workspace};
use crate::analysis::{
    build_b_sketches, check_dims, compute_row_stats_with, mean_and_std, sample_cr, select_registers,
    select_workflow, BRowMeta, SampledCr, SamplingParams, WorkflowChoice, WorkflowKind,
    UPPER_BOUND_AVG_PRODUCTS,
};
use crate::csr::CsrMatrix;
use crate::error::EngineError;
use crate::hll::precision_for_registers;
use crate::predict::{
    conservative_cr_with_margin, estimate_pass, symbolic_pass, upper_bound_pass, PredictionKind,
    SizePrediction, CONSERVATIVE_CR_MARGIN,
};

/// Forces a particular size-prediction workflow.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkflowOverride {
    #[default]
    Auto,
    ForceSymbolic,
    ForceEstimate,
    ForceUpperBound,
}

impl WorkflowOverride {
    pub const ALL: [WorkflowOverride; 4] = [
        WorkflowOverride::Auto,
        WorkflowOverride::ForceSymbolic,
        WorkflowOverride::ForceEstimate,
        WorkflowOverride::ForceUpperBound,
    ];
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub workflow: WorkflowOverride,
    /// 32, 64 or 128; chosen from the expansion ratio when unset.
    pub registers: Option<usize>,
    pub tiers: TierConfig,
    pub sampling: SamplingParams,
    pub seed: u64,
    /// Worker threads; 0 uses the ambient rayon pool.
    pub workers: usize,
    /// Standard deviations subtracted from the sampled mean CR when sizing
    /// symbolic hash sets.
    pub conservative_margin: f64,
    /// Checked between stages.
    pub deadline: Option<Instant>,
    /// Refuse to stage more than this many bytes of output.
    pub staging_limit_bytes: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            workflow: WorkflowOverride::Auto,
            registers: None,
            tiers: TierConfig::default(),
            sampling: SamplingParams::default(),
            seed: 0,
            workers: 0,
            conservative_margin: CONSERVATIVE_CR_MARGIN,
            deadline: None,
            staging_limit_bytes: None,
        }
    }
}

/// Wall-clock milliseconds per pipeline stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageTimes {
    pub analysis_ms: f64,
    pub sketch_ms: f64,
    pub predict_ms: f64,
    pub numeric_ms: f64,
    pub fallback_ms: f64,
    pub compact_ms: f64,
    pub total_ms: f64,
}

impl StageTimes {
    pub fn stage_sum(&self) -> f64 {
        self.analysis_ms + self.sketch_ms + self.predict_ms + self.numeric_ms + self.fallback_ms + self.compact_ms
    }
}

/// Rows assigned to each accumulator kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PlanCounts {
    pub hash: usize,
    pub enhanced_hash: usize,
    pub dense: usize,
    pub esc: usize,
    pub fallback: usize,
}

impl PlanCounts {
    fn from_plans(plans: &[RowPlan]) -> Self {
        let mut c = PlanCounts::default();
        for p in plans {
            match p.kind {
                AccumulatorKind::Hash => c.hash += 1,
                AccumulatorKind::EnhancedHash => c.enhanced_hash += 1,
                AccumulatorKind::Dense => c.dense += 1,
                AccumulatorKind::Esc => c.esc += 1,
                AccumulatorKind::Fallback => c.fallback += 1,
            }
        }
        c
    }
}

/// Per-row relative error of the size estimates against the final counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationError {
    pub mean_rel_err: f64,
    pub std_rel_err: f64,
    pub rows: usize,
}

impl EstimationError {
    /// Rows with an empty true output are skipped.
    pub fn measure(predicted: &[f64], truth: &[usize]) -> Self {
        let errs: Vec<f64> = predicted
            .iter()
            .zip(truth)
            .filter(|(_, &t)| t > 0)
            .map(|(&p, &t)| (p - t as f64).abs() / t as f64)
            .collect();
        let (mean, std) = mean_and_std(&errs);
        Self {
            mean_rel_err: mean,
            std_rel_err: std,
            rows: errs.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub workflow: WorkflowKind,
    pub workflow_override: WorkflowOverride,
    /// Sketch registers; `None` when no sketches were built.
    pub registers: Option<usize>,
    pub expansion_coef: f64,
    pub nrows: usize,
    pub ncols: usize,
    pub nnz_a: usize,
    pub nnz_b: usize,
    pub nnz_c: usize,
    pub total_products: u64,
    pub flops: u64,
    pub er: f64,
    pub avg_products: f64,
    pub sampled: Option<SampledCr>,
    /// `total_products / nnz_c`; 0 for an empty product.
    pub cr_true: f64,
    pub conservative_cr: Option<f64>,
    pub bitmap_query: bool,
    pub plan_counts: PlanCounts,
    pub staged_slots: usize,
    pub overflow_rows: usize,
    pub symbolic_retries: usize,
    pub estimation: Option<EstimationError>,
    pub timings: StageTimes,
}

/// Over-allocated per-row output: row `i` owns
/// `cols[offsets[i]..offsets[i] + allocs[i]]` of which the first `counts[i]`
/// are filled.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StagedOutput {
    pub offsets: Vec<usize>,
    pub allocs: Vec<usize>,
    pub counts: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl StagedOutput {
    fn with_allocs(allocs: Vec<usize>, limit: Option<usize>) -> Result<Self, EngineError> {
        let mut offsets = Vec::with_capacity(allocs.len());
        let mut total = 0usize;
        for &a in &allocs {
            offsets.push(total);
            total += a;
        }
        let (cols, vals) = reserve_slab(total, limit, "staged output slabs")?;
        Ok(Self {
            offsets,
            counts: vec![0; allocs.len()],
            allocs,
            cols,
            vals,
        })
    }

    /// Disjoint mutable slab regions, one per row.
    fn row_slices(&mut self) -> Vec<(&mut [u32], &mut [f64])> {
        let mut out = Vec::with_capacity(self.allocs.len());
        let mut cols = self.cols.as_mut_slice();
        let mut vals = self.vals.as_mut_slice();
        for &a in &self.allocs {
            let (c, c_rest) = cols.split_at_mut(a);
            let (v, v_rest) = vals.split_at_mut(a);
            out.push((c, v));
            cols = c_rest;
            vals = v_rest;
        }
        out
    }
}

fn reserve_slab(slots: usize, limit: Option<usize>, what: &'static str) -> Result<(Vec<u32>, Vec<f64>), EngineError> {
    let bytes = slots.saturating_mul(std::mem::size_of::<u32>() + std::mem::size_of::<f64>());
    if limit.is_some_and(|l| bytes > l) {
        return Err(EngineError::Resource { what, bytes });
    }
    let mut cols: Vec<u32> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    if cols.try_reserve_exact(slots).is_err() || vals.try_reserve_exact(slots).is_err() {
        return Err(EngineError::Resource { what, bytes });
    }
    cols.resize(slots, 0);
    vals.resize(slots, 0.0);
    Ok((cols, vals))
}

/// Gathers every row's filled prefix into contiguous CSR arrays.
pub fn compact(staged: &StagedOutput) -> (Vec<usize>, Vec<u32>, Vec<f64>) {
    let n = staged.counts.len();
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut total = 0;
    for &c in &staged.counts {
        total += c;
        row_ptr.push(total);
    }
    // identity layout: every row filled exactly, nothing to move
    if staged.allocs == staged.counts && staged.offsets == row_ptr[..n] && staged.cols.len() == total {
        return (row_ptr, staged.cols.clone(), staged.vals.clone());
    }
    let mut cols = vec![0u32; total];
    let mut vals = vec![0f64; total];
    let mut dst_c: Vec<&mut [u32]> = Vec::with_capacity(n);
    let mut dst_v: Vec<&mut [f64]> = Vec::with_capacity(n);
    {
        let mut rc = cols.as_mut_slice();
        let mut rv = vals.as_mut_slice();
        for &c in &staged.counts {
            let (a, b) = rc.split_at_mut(c);
            dst_c.push(a);
            rc = b;
            let (a, b) = rv.split_at_mut(c);
            dst_v.push(a);
            rv = b;
        }
    }
    dst_c
        .into_par_iter()
        .zip(dst_v)
        .enumerate()
        .for_each(|(i, (dc, dv))| {
            let o = staged.offsets[i];
            let c = staged.counts[i];
            dc.copy_from_slice(&staged.cols[o..o + c]);
            dv.copy_from_slice(&staged.vals[o..o + c]);
        });
    (row_ptr, cols, vals)
}

/// Operand selection for the evaluated products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplyMode {
    /// `A·A`
    Square,
    /// `A·Aᵀ`
    Gram,
    /// `A·B`
    General,
}

/// Resolves the right-hand operand for a multiply mode.
pub fn multiply_mode<'a>(
    a: &'a CsrMatrix,
    mode: MultiplyMode,
    b: Option<&'a CsrMatrix>,
) -> Result<(&'a CsrMatrix, Cow<'a, CsrMatrix>), EngineError> {
    match mode {
        MultiplyMode::Square => {
            if !a.is_square() {
                return Err(EngineError::NotSquare(a.nrows(), a.ncols()));
            }
            Ok((a, Cow::Borrowed(a)))
        }
        MultiplyMode::Gram => Ok((a, Cow::Owned(a.transpose()))),
        MultiplyMode::General => {
            let b = b.ok_or_else(|| EngineError::Internal("mode `ab` needs a right-hand operand".into()))?;
            check_dims(a, b)?;
            Ok((a, Cow::Borrowed(b)))
        }
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn check_deadline(cfg: &EngineConfig, stage: &'static str) -> Result<(), EngineError> {
    match cfg.deadline {
        Some(d) if Instant::now() > d => Err(EngineError::Timeout(stage)),
        _ => Ok(()),
    }
}

/// Computes `C = A·B`.
pub fn spgemm(a: &CsrMatrix, b: &CsrMatrix, cfg: &EngineConfig) -> Result<(CsrMatrix, RunReport), EngineError> {
    check_dims(a, b)?;
    cfg.tiers.validate().map_err(EngineError::Internal)?;
    cfg.sampling.validate().map_err(EngineError::Internal)?;
    if let Some(r) = cfg.registers {
        precision_for_registers(r).map_err(|e| EngineError::Internal(e.to_string()))?;
    }
    if cfg.workers == 0 {
        return run(a, b, cfg);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| EngineError::ThreadPool(e.to_string()))?;
    pool.install(|| run(a, b, cfg))
}

fn run(a: &CsrMatrix, b: &CsrMatrix, cfg: &EngineConfig) -> Result<(CsrMatrix, RunReport), EngineError> {
    let start = Instant::now();
    let mut times = StageTimes::default();
    let tiers = &cfg.tiers;

    // analysis
    let t = Instant::now();
    let meta = BRowMeta::new(b);
    let stats = compute_row_stats_with(a, &meta);
    let avg = stats.avg_products();
    let registers = cfg.registers.unwrap_or_else(|| select_registers(stats.er));
    let needs_sketches = match cfg.workflow {
        WorkflowOverride::Auto => avg >= UPPER_BOUND_AVG_PRODUCTS,
        WorkflowOverride::ForceEstimate => true,
        WorkflowOverride::ForceSymbolic | WorkflowOverride::ForceUpperBound => false,
    };
    times.analysis_ms += ms(t.elapsed());
    check_deadline(cfg, "analysis")?;

    let mut sketches = Vec::new();
    let mut sampled = None;
    if needs_sketches {
        let t = Instant::now();
        let p = precision_for_registers(registers).expect("register count validated");
        sketches = build_b_sketches(b, p);
        times.sketch_ms += ms(t.elapsed());

        let t = Instant::now();
        sampled = Some(sample_cr(a, &sketches, &stats, &cfg.sampling, cfg.seed));
        times.analysis_ms += ms(t.elapsed());
        check_deadline(cfg, "sketch")?;
    }

    let kind = match cfg.workflow {
        WorkflowOverride::Auto => select_workflow(avg, stats.er, sampled.as_ref().map_or(0.0, |s| s.cr_hat)),
        WorkflowOverride::ForceSymbolic => WorkflowKind::Symbolic,
        WorkflowOverride::ForceEstimate => WorkflowKind::HllEstimation,
        WorkflowOverride::ForceUpperBound => WorkflowKind::UpperBound,
    };
    let choice = WorkflowChoice { kind, registers };

    // prediction and binning
    let t = Instant::now();
    let mut conservative = None;
    let mut symbolic_retries = 0;
    let prediction: SizePrediction = match kind {
        WorkflowKind::Symbolic => {
            let ccr = sampled
                .as_ref()
                .map_or(1.0, |s| conservative_cr_with_margin(s, cfg.conservative_margin));
            conservative = Some(ccr);
            let r = symbolic_pass(a, b, &stats, tiers, ccr);
            symbolic_retries = r.retried_rows;
            r.prediction
        }
        WorkflowKind::HllEstimation => estimate_pass(a, &sketches),
        WorkflowKind::UpperBound => upper_bound_pass(&stats),
    };
    let plans = plan_rows(&prediction, &stats, choice, tiers);
    let cr_for_bitmap = match (&sampled, prediction.kind) {
        (Some(s), _) => s.cr_hat,
        (None, PredictionKind::Exact) => stats.total_products as f64 / prediction.total().max(1.0),
        (None, _) => 1.0,
    };
    let bitmap_query = cr_for_bitmap > tiers.bitmap_query_threshold;
    times.predict_ms += ms(t.elapsed());
    check_deadline(cfg, "predict")?;

    // numeric
    let t = Instant::now();
    let mut staged = StagedOutput::with_allocs(plans.iter().map(|p| p.alloc).collect(), cfg.staging_limit_bytes)?;
    let chunk = tiers.largest_dense_span();
    let outcomes: Vec<RowOutcome> = staged
        .row_slices()
        .into_par_iter()
        .enumerate()
        .map_init(Workspace::new, |ws, (i, (oc, ov))| {
            let span = (stats.span_lo[i], stats.span_hi[i]);
            ws.accumulate(&plans[i], a.row(i), b, span, bitmap_query, chunk, oc, ov)
        })
        .collect::<Result<_, _>>()?;
    let overflowed: Vec<usize> = outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.overflowed.then_some(i))
        .collect();
    for (i, o) in outcomes.iter().enumerate() {
        staged.counts[i] = o.count;
    }
    times.numeric_ms += ms(t.elapsed());
    check_deadline(cfg, "numeric")?;

    // fallback for overflowed rows, after every normal row is done
    let t = Instant::now();
    if !overflowed.is_empty() {
        let fb_allocs: Vec<usize> = overflowed.iter().map(|&i| stats.products[i] as usize).collect();
        let mut fb = StagedOutput::with_allocs(fb_allocs, cfg.staging_limit_bytes)?;
        let fb_counts: Vec<usize> = fb
            .row_slices()
            .into_par_iter()
            .zip(overflowed.par_iter())
            .map_init(Workspace::new, |ws, ((oc, ov), &i)| {
                let plan = RowPlan {
                    kind: AccumulatorKind::Fallback,
                    capacity: chunk,
                    tier: tiers.dense_spans.len(),
                    alloc: oc.len(),
                };
                let span = (stats.span_lo[i], stats.span_hi[i]);
                ws.accumulate(&plan, a.row(i), b, span, false, chunk, oc, ov)
                    .map(|o| o.count)
            })
            .collect::<Result<_, _>>()?;
        let base = staged.cols.len();
        staged.cols.extend_from_slice(&fb.cols);
        staged.vals.extend_from_slice(&fb.vals);
        for (t, &i) in overflowed.iter().enumerate() {
            staged.offsets[i] = base + fb.offsets[t];
            staged.allocs[i] = fb.allocs[t];
            staged.counts[i] = fb_counts[t];
        }
    }
    times.fallback_ms += ms(t.elapsed());
    check_deadline(cfg, "fallback")?;

    // compaction
    let t = Instant::now();
    let (row_ptr, cols, vals) = compact(&staged);
    let c = CsrMatrix::from_parts_unchecked(a.nrows(), b.ncols(), row_ptr, cols, vals);
    times.compact_ms += ms(t.elapsed());
    times.total_ms = ms(start.elapsed());

    let estimation = (prediction.kind == PredictionKind::Estimated)
        .then(|| EstimationError::measure(&prediction.per_row, &staged.counts));
    let nnz_c = c.nnz();
    let report = RunReport {
        workflow: kind,
        workflow_override: cfg.workflow,
        registers: needs_sketches.then_some(registers),
        expansion_coef: match kind {
            WorkflowKind::UpperBound => tiers.expansion_coef,
            _ => tiers.coef_for(registers),
        },
        nrows: c.nrows(),
        ncols: c.ncols(),
        nnz_a: a.nnz(),
        nnz_b: b.nnz(),
        nnz_c,
        total_products: stats.total_products,
        flops: 2 * stats.total_products,
        er: stats.er,
        avg_products: avg,
        sampled,
        cr_true: if nnz_c > 0 {
            stats.total_products as f64 / nnz_c as f64
        } else {
            0.0
        },
        conservative_cr: conservative,
        bitmap_query,
        plan_counts: PlanCounts::from_plans(&plans),
        staged_slots: plans.iter().map(|p| p.alloc).sum(),
        overflow_rows: overflowed.len(),
        symbolic_retries,
        estimation,
        timings: times,
    };
    Ok((c, report))
}
