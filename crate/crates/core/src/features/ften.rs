//! `FTEN` feature tensor files.
//!
//! Layout (little endian): magic `FTEN` | version `u16` = 1 | `N` `u32` | `N` `u32` |
//! `C` `u32` | `N*N*C` `f32` values, row-major with the channel index slowest.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Grid2D, RealTensor3};

pub const MAGIC: &[u8; 4] = b"FTEN";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 4;

pub fn encode(t: &RealTensor3) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * t.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(t.side() as u32).to_le_bytes());
    out.extend_from_slice(&(t.side() as u32).to_le_bytes());
    out.extend_from_slice(&(t.channels() as u32).to_le_bytes());
    for v in t.data() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<RealTensor3> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("FTEN header truncated ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad FTEN magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported FTEN version {version}")));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols, channels) = (word(6), word(10), word(14));
    if rows != cols {
        return Err(Error::Format(format!("FTEN grid must be square, got {rows}x{cols}")));
    }
    let count = rows
        .checked_mul(cols)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| Error::Format("FTEN dimensions overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != count * 4 {
        return Err(Error::Format(format!(
            "FTEN payload holds {} bytes, expected {}",
            payload.len(),
            count * 4
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    RealTensor3::from_vec(rows, channels, data)
}

pub fn write(path: &Path, t: &RealTensor3) -> Result<()> {
    fs::write(path, encode(t)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<RealTensor3> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Reads a tensor and checks its grid against `expected`.
pub fn read_expecting(path: &Path, expected: Grid2D) -> Result<RealTensor3> {
    let t = read(path)?;
    if t.side() != expected.side() {
        return Err(Error::shape(expected, format!("{}x{}", t.side(), t.side())));
    }
    Ok(t)
}
