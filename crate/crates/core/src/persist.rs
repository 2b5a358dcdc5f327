//! Binary matrix files.
//!
//! Layout, all integers little-endian:
//!
//! | bytes    | content                                   |
//! |----------|-------------------------------------------|
//! | 0..8     | magic `STROMMAT`                          |
//! | 8..12    | `u32` version, currently 1                |
//! | 12..20   | `u64` rows                                |
//! | 20..28   | `u64` cols                                |
//! | 28..     | `rows * cols` `f64` values, column-major  |
//!
//! The header is validated against the file length before the payload is
//! allocated.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::linalg::DenseMatrix;

pub const MAGIC: &[u8; 8] = b"STROMMAT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 8]),

    #[error("unsupported format version {0} (expected {VERSION})")]
    Version(u32),

    #[error("header claims {rows}x{cols} ({expected} bytes) but the data has {actual} bytes")]
    Length {
        rows: u64,
        cols: u64,
        expected: u128,
        actual: u128,
    },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("refusing to store an empty {rows}x{cols} matrix")]
    Empty { rows: usize, cols: usize },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Serializes `m` to the file format.
pub fn encode(m: &DenseMatrix) -> Result<Vec<u8>, PersistError> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(PersistError::Empty {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Checks a header against the total byte count; returns `(rows, cols)`.
fn parse_header(header: &[u8; HEADER_LEN], total_len: u128) -> Result<(usize, usize), PersistError> {
    let magic: [u8; 8] = header[0..8].try_into().expect("8 bytes");
    if &magic != MAGIC {
        return Err(PersistError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(PersistError::Version(version));
    }
    let rows = u64::from_le_bytes(header[12..20].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(header[20..28].try_into().expect("8 bytes"));
    let expected = (rows as u128)
        .checked_mul(cols as u128)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN as u128))
        .unwrap_or(u128::MAX);
    if expected != total_len || rows == 0 || cols == 0 {
        return Err(PersistError::Length {
            rows,
            cols,
            expected,
            actual: total_len,
        });
    }
    let rows = usize::try_from(rows).map_err(|_| PersistError::Length {
        rows,
        cols,
        expected,
        actual: total_len,
    })?;
    let cols = usize::try_from(cols).map_err(|_| PersistError::Length {
        rows: rows as u64,
        cols,
        expected,
        actual: total_len,
    })?;
    Ok((rows, cols))
}

fn decode_payload(rows: usize, cols: usize, payload: &[u8]) -> Result<DenseMatrix, PersistError> {
    let mut data = Vec::with_capacity(rows * cols);
    for (idx, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(PersistError::NonFinite {
                row: idx % rows,
                col: idx / rows,
            });
        }
        data.push(v);
    }
    Ok(DenseMatrix::from_col_major(rows, cols, data).expect("length checked against header"))
}

/// Parses the file format from memory.
pub fn decode(bytes: &[u8]) -> Result<DenseMatrix, PersistError> {
    let Some(header) = bytes.get(..HEADER_LEN) else {
        return Err(PersistError::Length {
            rows: 0,
            cols: 0,
            expected: HEADER_LEN as u128,
            actual: bytes.len() as u128,
        });
    };
    let (rows, cols) = parse_header(header.try_into().expect("header length"), bytes.len() as u128)?;
    decode_payload(rows, cols, &bytes[HEADER_LEN..])
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<(), PersistError> {
    let path = path.as_ref();
    let bytes = encode(m)?;
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    w.write_all(&bytes).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix, PersistError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let total = file.metadata().map_err(io_err(path))?.len() as u128;
    let mut r = BufReader::new(file);
    let mut header = [0u8; HEADER_LEN];
    if total < HEADER_LEN as u128 {
        return Err(PersistError::Length {
            rows: 0,
            cols: 0,
            expected: HEADER_LEN as u128,
            actual: total,
        });
    }
    r.read_exact(&mut header).map_err(io_err(path))?;
    let (rows, cols) = parse_header(&header, total)?;
    let mut payload = vec![0u8; 8 * rows * cols];
    r.read_exact(&mut payload).map_err(io_err(path))?;
    decode_payload(rows, cols, &payload)
}
