use thiserror::Error;

/// Failure while reading a Matrix Market stream.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: entry ({row}, {col}) outside declared {nrows}x{ncols} matrix")]
    OutOfBounds {
        line: usize,
        row: u64,
        col: u64,
        nrows: u64,
        ncols: u64,
    },
    #[error("line {line}: unsupported matrix market variant `{what}`")]
    Unsupported { line: usize, what: String },
    #[error("line {line}: {what} of {value} exceeds the 2^31 limit")]
    TooLarge { line: usize, what: &'static str, value: u64 },
    #[error("line {line}: expected {expected} entries, found {found}")]
    EntryCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("dimension mismatch: left operand is {left_rows}x{left_cols}, right operand is {right_rows}x{right_cols}")]
pub struct DimensionMismatch {
    pub left_rows: usize,
    pub left_cols: usize,
    pub right_rows: usize,
    pub right_cols: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HllError {
    #[error("precision mismatch: {0} vs {1}")]
    PrecisionMismatch(u8, u8),
    #[error("unsupported precision {0}; expected 5, 6 or 7")]
    InvalidPrecision(u8),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SortError {
    #[error("duplicate column {0} in accumulated row")]
    DuplicateColumn(u32),
    #[error("column and value slices differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Errors surfaced by the multiplication pipeline.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error("operand mode `aa` requires a square matrix, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("could not reserve {bytes} bytes for the {what}; rerun with the symbolic workflow to avoid over-allocation")]
    Resource { what: &'static str, bytes: usize },
    #[error("deadline exceeded after the {0} stage")]
    Timeout(&'static str),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error("failed to build worker pool: {0}")]
    ThreadPool(String),
}

impl From<SortError> for EngineError {
    fn from(e: SortError) -> Self {
        EngineError::Internal(e.to_string())
    }
}
