//! Matrix file formats.
//!
//! RPF1 is the canonical binary format:
//!
//! | bytes    | content                                   |
//! |----------|-------------------------------------------|
//! | 0..8     | magic `RPFMAT1\0`                          |
//! | 8..12    | rows, `u32` little-endian                 |
//! | 12..16   | cols, `u32` little-endian                 |
//! | 16..     | rows×cols `f64` little-endian, row-major  |
//!
//! CSV (headerless, comma separated) is offered for interop only.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RPFMAT1\0";
const HEADER_LEN: usize = 16;

pub fn encode_matrix(m: &DenseMatrix) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows())
        .map_err(|_| Error::Format(format!("row count {} exceeds u32", m.rows())))?;
    let cols = u32::try_from(m.cols())
        .map_err(|_| Error::Format(format!("column count {} exceeds u32", m.cols())))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * m.rows() * m.cols());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    for v in m.to_row_major() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "file is {} bytes, shorter than the 16-byte header",
            bytes.len()
        )));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Format("bad magic, expected RPFMAT1".into()));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Format(format!("zero dimension {rows}x{cols}")));
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = rows * cols;
    if payload.len() != expected * 8 {
        return Err(Error::Truncation {
            expected,
            found: payload.len() / 8,
        });
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos / cols,
            col: pos % cols,
        });
    }
    DenseMatrix::from_row_major(rows, cols, &values)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    decode_matrix(&fs::read(path)?)
}

pub fn write_matrix(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_matrix(m)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| {
                    Error::Format(format!("line {}: cannot parse {tok:?}: {e}", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Format(format!(
                    "line {} has {} fields, expected {c}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Format("empty CSV".into()))?;
    DenseMatrix::from_row_major(rows, cols, &values)
}

/// Writes with Rust's shortest round-trip float formatting, so CSV
/// round-trips are exact as well.
pub fn write_csv(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    for i in 0..m.rows() {
        let line: Vec<String> = (0..m.cols()).map(|j| format!("{:?}", m.get(i, j))).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    fs::write(path, out)?;
    Ok(())
}
