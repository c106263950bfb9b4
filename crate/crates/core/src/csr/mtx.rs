//! Matrix Market (`.mtx`) coordinate format reader and writer.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::CsrMatrix;
use crate::error::ParseError;

/// Dimensions and entry counts must stay below this bound.
pub const MAX_DIM: u64 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn parse_header(line_no: usize, line: &str) -> Result<(Field, Symmetry), ParseError> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(syntax(line_no, "malformed %%MatrixMarket header"));
    }
    if tokens[1] != "matrix" {
        return Err(ParseError::Unsupported {
            line: line_no,
            what: tokens[1].clone(),
        });
    }
    if tokens[2] != "coordinate" {
        return Err(ParseError::Unsupported {
            line: line_no,
            what: tokens[2].clone(),
        });
    }
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => {
            return Err(ParseError::Unsupported {
                line: line_no,
                what: other.to_string(),
            })
        }
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => {
            return Err(ParseError::Unsupported {
                line: line_no,
                what: other.to_string(),
            })
        }
    };
    Ok((field, symmetry))
}

fn parse_count(line_no: usize, tok: Option<&str>, what: &'static str) -> Result<u64, ParseError> {
    let tok = tok.ok_or_else(|| syntax(line_no, format!("missing {what}")))?;
    let value: u64 = tok
        .parse()
        .map_err(|_| syntax(line_no, format!("invalid {what} `{tok}`")))?;
    if value >= MAX_DIM {
        return Err(ParseError::TooLarge {
            line: line_no,
            what,
            value,
        });
    }
    Ok(value)
}

/// Reads a Matrix Market coordinate stream into canonical CSR.
///
/// Symmetric inputs are expanded to both triangles, pattern entries get the
/// value `1.0`, and repeated coordinates are summed.
pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<CsrMatrix, ParseError> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (field, symmetry) = match lines.next() {
        Some((n, line)) => parse_header(n, &line?)?,
        None => return Err(syntax(1, "empty input")),
    };

    let mut dims = None;
    let mut triplets: Vec<(u32, u32, f64)> = Vec::new();
    let mut seen = 0usize;
    let mut last_line = 1;

    for (line_no, line) in lines {
        let line = line?;
        last_line = line_no;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut tok = trimmed.split_whitespace();
        let Some((nrows, ncols, nnz)) = dims else {
            let nrows = parse_count(line_no, tok.next(), "row count")?;
            let ncols = parse_count(line_no, tok.next(), "column count")?;
            let nnz = parse_count(line_no, tok.next(), "entry count")?;
            if tok.next().is_some() {
                return Err(syntax(line_no, "trailing tokens in size line"));
            }
            let reserve = if symmetry == Symmetry::Symmetric { 2 * nnz } else { nnz };
            triplets.reserve(reserve as usize);
            dims = Some((nrows, ncols, nnz as usize));
            continue;
        };

        if seen == nnz {
            return Err(ParseError::EntryCount {
                line: line_no,
                expected: nnz,
                found: seen + 1,
            });
        }
        let mut index = |what: &str| -> Result<u64, ParseError> {
            let t = tok
                .next()
                .ok_or_else(|| syntax(line_no, format!("missing {what} index")))?;
            t.parse::<u64>()
                .map_err(|_| syntax(line_no, format!("invalid {what} index `{t}`")))
        };
        let row = index("row")?;
        let col = index("column")?;
        if row == 0 || col == 0 || row > nrows || col > ncols {
            return Err(ParseError::OutOfBounds {
                line: line_no,
                row,
                col,
                nrows,
                ncols,
            });
        }
        let value = match field {
            Field::Pattern => 1.0,
            Field::Real | Field::Integer => {
                let t = tok
                    .next()
                    .ok_or_else(|| syntax(line_no, "missing value"))?;
                if field == Field::Integer {
                    t.parse::<i64>()
                        .map(|v| v as f64)
                        .map_err(|_| syntax(line_no, format!("invalid integer `{t}`")))?
                } else {
                    t.parse::<f64>()
                        .map_err(|_| syntax(line_no, format!("invalid value `{t}`")))?
                }
            }
        };
        if tok.next().is_some() {
            return Err(syntax(line_no, "trailing tokens in entry"));
        }
        let (r, c) = ((row - 1) as u32, (col - 1) as u32);
        triplets.push((r, c, value));
        if symmetry == Symmetry::Symmetric && r != c {
            if col > nrows || row > ncols {
                return Err(ParseError::OutOfBounds {
                    line: line_no,
                    row: col,
                    col: row,
                    nrows,
                    ncols,
                });
            }
            triplets.push((c, r, value));
        }
        seen += 1;
    }

    let Some((nrows, ncols, nnz)) = dims else {
        return Err(syntax(last_line, "missing size line"));
    };
    if seen != nnz {
        return Err(ParseError::EntryCount {
            line: last_line,
            expected: nnz,
            found: seen,
        });
    }
    if triplets.len() as u64 >= MAX_DIM {
        return Err(ParseError::TooLarge {
            line: last_line,
            what: "expanded entry count",
            value: triplets.len() as u64,
        });
    }
    Ok(CsrMatrix::from_triplets(
        nrows as usize,
        ncols as usize,
        &triplets,
    ))
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix, ParseError> {
    let file = File::open(path)?;
    parse_matrix_market(BufReader::new(file))
}

/// Writes `coordinate real general`, row-major with sorted columns. Values
/// use the shortest representation that parses back to the same bits.
pub fn write_matrix_market<W: Write>(m: &CsrMatrix, mut out: W) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for i in 0..m.nrows() {
        let (cols, vals) = m.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            let a = v.abs();
            if a == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
                writeln!(out, "{} {} {}", i + 1, c + 1, v)?;
            } else {
                writeln!(out, "{} {} {:e}", i + 1, c + 1, v)?;
            }
        }
    }
    Ok(())
}
