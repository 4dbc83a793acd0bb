//! Shared CSV helpers for the `user,quantity,row,col,re,im` dump format.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexRow {
    /// 1-based line in the source file.
    pub line: u64,
    pub index: usize,
    pub quantity: String,
    pub row: usize,
    pub col: usize,
    pub re: f64,
    pub im: f64,
}

pub fn read_complex_rows<R: std::io::Read>(
    input: R,
    path: &Path,
    header: &[&str],
) -> Result<Vec<ComplexRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.into(),
        line,
        msg,
    };
    let found = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(parse_err(
            1,
            format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let int = |i: usize| -> Result<usize> {
            field(i)
                .parse::<usize>()
                .map_err(|_| parse_err(line, format!("column `{}`: expected an index, got `{}`", header[i], field(i))))
        };
        let float = |i: usize| -> Result<f64> {
            let v = field(i)
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("column `{}`: expected a number, got `{}`", header[i], field(i))))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column `{}`: non-finite value", header[i])));
            }
            Ok(v)
        };
        rows.push(ComplexRow {
            line,
            index: int(0)?,
            quantity: field(1).to_string(),
            row: int(2)?,
            col: int(3)?,
            re: float(4)?,
            im: float(5)?,
        });
    }
    Ok(rows)
}

/// Lowercase hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
