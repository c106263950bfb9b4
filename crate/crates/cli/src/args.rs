use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hllgemm::{MultiplyMode, SamplingParams, WorkflowOverride};

#[derive(Debug, Parser)]
#[command(name = "hllgemm", version, about = "Sparse matrix multiplication with sketch-based output size estimation")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multiply and optionally write C and a JSON run report.
    Multiply(MultiplyArgs),
    /// Print analysis metrics and the workflow that would be selected.
    Analyze(AnalyzeArgs),
    /// Time repeated multiplications and append results to a CSV file.
    Bench(BenchArgs),
    /// Measure sketch estimation quality against exact row sizes.
    EstEval(EstEvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Op {
    Aa,
    Aat,
    Ab,
}

impl Op {
    pub fn mode(self) -> MultiplyMode {
        match self {
            Op::Aa => MultiplyMode::Square,
            Op::Aat => MultiplyMode::Gram,
            Op::Ab => MultiplyMode::General,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Op::Aa => "AA",
            Op::Aat => "AAT",
            Op::Ab => "AB",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Workflow {
    Auto,
    Symbolic,
    Estimate,
    Upper,
}

impl Workflow {
    pub fn to_override(self) -> WorkflowOverride {
        match self {
            Workflow::Auto => WorkflowOverride::Auto,
            Workflow::Symbolic => WorkflowOverride::ForceSymbolic,
            Workflow::Estimate => WorkflowOverride::ForceEstimate,
            Workflow::Upper => WorkflowOverride::ForceUpperBound,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Workflow::Auto => "auto",
            Workflow::Symbolic => "symbolic",
            Workflow::Estimate => "estimate",
            Workflow::Upper => "upper",
        }
    }
}

fn registers(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(m @ (32 | 64 | 128)) => Ok(m),
        _ => Err(format!("`{s}` is not one of 32, 64, 128")),
    }
}

fn coef(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(c) if c >= 1.0 && c.is_finite() => Ok(c),
        _ => Err(format!("`{s}` must be a number of at least 1")),
    }
}

#[derive(Debug, Args)]
pub struct Operands {
    /// Left operand in Matrix Market format.
    #[arg(long = "a")]
    pub a: PathBuf,
    #[arg(long, value_enum, default_value = "aa")]
    pub op: Op,
    /// Right operand, required with `--op ab`.
    #[arg(long = "b")]
    pub b: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Sampling {
    /// Fraction of rows sampled for the compression ratio.
    #[arg(long, default_value_t = 0.03)]
    pub sample_ratio: f64,
    #[arg(long, default_value_t = 600)]
    pub sample_min: usize,
    #[arg(long, default_value_t = 10_000)]
    pub sample_max: usize,
}

impl Sampling {
    pub fn params(&self) -> Result<SamplingParams, String> {
        let p = SamplingParams {
            ratio: self.sample_ratio,
            min_rows: self.sample_min,
            max_rows: self.sample_max,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
pub struct MultiplyArgs {
    #[command(flatten)]
    pub operands: Operands,
    #[arg(long, value_enum, default_value = "auto")]
    pub workflow: Workflow,
    #[arg(long, value_parser = registers)]
    pub registers: Option<usize>,
    /// Binning expansion coefficient, applied at every register count.
    #[arg(long, value_parser = coef)]
    pub coef: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub sampling: Sampling,
    /// Write C here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the JSON run report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Fail instead of staging more than this many bytes of output.
    #[arg(long)]
    pub staging_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub operands: Operands,
    #[arg(long, value_parser = registers)]
    pub registers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub sampling: Sampling,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct Corpus {
    /// A single matrix.
    #[arg(long = "a", required_unless_present = "list", conflicts_with = "list")]
    pub a: Option<PathBuf>,
    /// File with one matrix path per line; relative paths are resolved
    /// against the list's directory.
    #[arg(long)]
    pub list: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "aa")]
    pub op: Op,
    #[arg(long = "b")]
    pub b: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub corpus: Corpus,
    /// Workflows to run, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "auto")]
    pub workflow: Vec<Workflow>,
    /// Register counts to run, comma separated; chosen automatically if unset.
    #[arg(long, value_parser = registers, value_delimiter = ',')]
    pub registers: Vec<usize>,
    #[arg(long, value_parser = coef)]
    pub coef: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub warmup: usize,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// Per-run timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub timeout: f64,
    /// Append rows here; prints to stdout when unset.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub sampling: Sampling,
}

#[derive(Debug, Args)]
pub struct EstEvalArgs {
    #[command(flatten)]
    pub corpus: Corpus,
    #[arg(long, value_parser = registers, value_delimiter = ',', default_value = "32,64,128")]
    pub registers: Vec<usize>,
    /// Binning coefficient; the per-precision default when unset.
    #[arg(long, value_parser = coef)]
    pub coef: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub sampling: Sampling,
}
