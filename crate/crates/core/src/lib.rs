//! Row-parallel sparse matrix–matrix multiplication with HyperLogLog-based
//! output size estimation.
//!
//! ```
//! use hllgemm::{spgemm, CsrMatrix, EngineConfig};
//!
//! let a = CsrMatrix::identity(4);
//! let (c, report) = spgemm(&a, &a, &EngineConfig::default()).unwrap();
//! assert!(c.bitwise_eq(&a));
//! assert_eq!(report.total_products, 4);
//! ```

pub mod accumulate;
pub mod analysis;
pub mod csr;
pub mod engine;
pub mod error;
pub mod eval;
pub mod hll;
pub mod oracle;
pub mod predict;
pub mod synth;

pub use accumulate::{AccumulatorKind, RowPlan, TierConfig};
pub use analysis::{analyze, AnalysisReport, SampledCr, SamplingParams, WorkflowChoice, WorkflowKind};
pub use csr::{read_matrix_market, write_matrix_market, CsrMatrix};
pub use engine::{multiply_mode, spgemm, EngineConfig, MultiplyMode, RunReport, StageTimes, WorkflowOverride};
pub use error::{DimensionMismatch, EngineError, HllError, ParseError, SortError};
pub use hll::HllSketch;
pub use predict::{PredictionKind, SizePrediction};
