//! Binary and CSV matrix files.
//!
//! Binary layout: the ASCII magic `MPLX`, then little-endian `u32` version,
//! rows and cols, then `rows * cols` little-endian `f64` values in row-major
//! order.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MPLX";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn encode_matrix(m: &DMatrix<f64>) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.nrows()).map_err(|_| Error::TooLarge(m.nrows()))?;
    let cols = u32::try_from(m.ncols()).map_err(|_| Error::TooLarge(m.ncols()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    Ok(out)
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("slice of length 4"))
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing MPLX header".into()));
    }
    let version = read_u32(bytes, 4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let rows = read_u32(bytes, 8) as usize;
    let cols = read_u32(bytes, 12) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let payload = &bytes[HEADER_LEN..];
    Ok(DMatrix::from_fn(rows, cols, |i, j| {
        let at = 8 * (i * cols + j);
        f64::from_le_bytes(payload[at..at + 8].try_into().expect("slice of length 8"))
    }))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_matrix(m)?)?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    decode_matrix(&fs::read(path)?)
}

/// Headerless CSV, one matrix row per line, shortest round-trip formatting.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut data = Vec::new();
    let mut cols = None;
    for rec in rdr.records() {
        let rec = rec?;
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::Format("ragged CSV matrix".into()));
        }
        for f in rec.iter() {
            data.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number {f:?}")))?,
            );
        }
    }
    let cols = cols.unwrap_or(0);
    let rows = data.len().checked_div(cols).unwrap_or(0);
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}
