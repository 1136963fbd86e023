//! Plain-text matrix files.
//!
//! Format: a header line `rows cols kind seed` with `kind` one of `binary` or
//! `real`, followed by `rows` lines of whitespace-separated entries in row
//! order. Binary entries are `0`/`1` tokens; real entries use the shortest
//! decimal representation that parses back to the same `f64`.

use std::io::{BufRead, Write};

use super::{BinaryTestMatrix, RealMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum StoredMatrix {
    Binary { matrix: BinaryTestMatrix, seed: u64 },
    Real(RealMatrix),
}

impl StoredMatrix {
    pub fn rows(&self) -> usize {
        match self {
            StoredMatrix::Binary { matrix, .. } => matrix.rows(),
            StoredMatrix::Real(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            StoredMatrix::Binary { matrix, .. } => matrix.cols(),
            StoredMatrix::Real(m) => m.cols(),
        }
    }
}

pub fn write_matrix<W: Write>(mut w: W, m: &StoredMatrix) -> Result<()> {
    match m {
        StoredMatrix::Binary { matrix, seed } => {
            writeln!(w, "{} {} binary {}", matrix.rows(), matrix.cols(), seed)?;
            for row in matrix.to_dense() {
                let line: Vec<&str> = row.iter().map(|&b| if b == 1 { "1" } else { "0" }).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
        }
        StoredMatrix::Real(matrix) => {
            writeln!(w, "{} {} real {}", matrix.rows(), matrix.cols(), matrix.seed())?;
            for i in 0..matrix.rows() {
                let line: Vec<String> = matrix.row(i).iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
        }
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<StoredMatrix> {
    let mut tokens = Vec::new();
    let mut header: Option<Vec<String>> = None;
    for line in r.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(trimmed.split_whitespace().map(str::to_owned).collect());
        } else {
            tokens.extend(trimmed.split_whitespace().map(str::to_owned));
        }
    }
    let header = header.ok_or_else(|| Error::Parse("missing header".into()))?;
    let [rows, cols, kind, seed] = header.as_slice() else {
        return Err(Error::Parse(format!("header needs 4 fields, got {}", header.len())));
    };
    let rows: usize = parse(rows, "rows")?;
    let cols: usize = parse(cols, "cols")?;
    let seed: u64 = parse(seed, "seed")?;
    if tokens.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} entries, found {}",
            rows * cols,
            tokens.len()
        )));
    }
    match kind.as_str() {
        "binary" => {
            let dense = tokens
                .chunks(cols.max(1))
                .take(rows)
                .map(|chunk| {
                    chunk
                        .iter()
                        .map(|t| match t.as_str() {
                            "0" => Ok(0u8),
                            "1" => Ok(1u8),
                            other => Err(Error::Parse(format!("binary token {other:?}"))),
                        })
                        .collect::<Result<Vec<u8>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let matrix = if cols == 0 {
                BinaryTestMatrix::from_column_supports(rows, Vec::new())?
            } else {
                BinaryTestMatrix::from_dense(&dense)?
            };
            Ok(StoredMatrix::Binary { matrix, seed })
        }
        "real" => {
            let data = tokens
                .iter()
                .map(|t| parse::<f64>(t, "real entry"))
                .collect::<Result<Vec<_>>>()?;
            Ok(StoredMatrix::Real(RealMatrix::new(rows, cols, data)?.with_seed(seed)))
        }
        other => Err(Error::Parse(format!("unknown matrix kind {other:?}"))),
    }
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("bad {what}: {s:?}")))
}
