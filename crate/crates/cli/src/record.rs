use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

/// One CSV row. Fields that do not apply to a command or to a failed run
/// are left empty.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Record {
    pub matrix: String,
    pub op: String,
    pub workflow: String,
    pub registers: Option<usize>,
    pub coef: Option<f64>,
    pub seed: u64,
    pub warmup: Option<usize>,
    pub runs: Option<usize>,
    /// `ok`, `timeout` or `error`.
    pub status: String,
    pub analysis_ms: Option<f64>,
    pub sketch_ms: Option<f64>,
    pub predict_ms: Option<f64>,
    pub numeric_ms: Option<f64>,
    pub fallback_ms: Option<f64>,
    pub compact_ms: Option<f64>,
    pub total_ms: Option<f64>,
    pub nnz_a: Option<usize>,
    pub nnz_c: Option<usize>,
    pub products: Option<u64>,
    pub flops: Option<u64>,
    pub gflops: Option<f64>,
    pub overflow_rows: Option<usize>,
    pub mean_rel_err: Option<f64>,
    pub std_rel_err: Option<f64>,
    pub overflow_ratio: Option<f64>,
    pub cr_true: Option<f64>,
    pub cr_sampled: Option<f64>,
}

pub const COLUMNS: [&str; 27] = [
    "matrix",
    "op",
    "workflow",
    "registers",
    "coef",
    "seed",
    "warmup",
    "runs",
    "status",
    "analysis_ms",
    "sketch_ms",
    "predict_ms",
    "numeric_ms",
    "fallback_ms",
    "compact_ms",
    "total_ms",
    "nnz_a",
    "nnz_c",
    "products",
    "flops",
    "gflops",
    "overflow_rows",
    "mean_rel_err",
    "std_rel_err",
    "overflow_ratio",
    "cr_true",
    "cr_sampled",
];

/// Writes records to `path` (appending, with a header only for a new or
/// empty file) or to stdout with a header.
pub fn write_records(path: Option<&Path>, records: &[Record]) -> io::Result<()> {
    match path {
        Some(p) => {
            let file = OpenOptions::new().create(true).append(true).open(p)?;
            let fresh = file.metadata()?.len() == 0;
            write_to(file, fresh, records)
        }
        None => write_to(io::stdout().lock(), true, records),
    }
}

fn write_to<W: Write>(out: W, header: bool, records: &[Record]) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    if header {
        w.write_record(COLUMNS)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_fields() {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.serialize(Record::default()).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
    }
}
