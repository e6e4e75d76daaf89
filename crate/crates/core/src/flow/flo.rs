//! Middlebury `.flo` files.
//!
//! Layout (little-endian): `f32` magic `202021.25`, `i32` width, `i32`
//! height, then `width * height` interleaved `(u, v)` `f32` pairs in
//! row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::FlowField;

pub const FLO_MAGIC: f32 = 202021.25;
const HEADER_LEN: usize = 12;

pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let n = flow.width() * flow.height();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * n);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for (u, v) in flow.u().iter().zip(flow.v()) {
        out.extend_from_slice(&(*u as f32).to_le_bytes());
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_flo(bytes: &[u8], path: &Path) -> Result<FlowField> {
    let bad = |reason: String| Error::FloFormat {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(Error::FloTruncated {
            path: path.to_path_buf(),
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let word = |i: usize| -> [u8; 4] { bytes[i..i + 4].try_into().expect("4-byte slice") };
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(bad(format!("magic {magic} != {FLO_MAGIC}")));
    }
    let width = i32::from_le_bytes(word(4));
    let height = i32::from_le_bytes(word(8));
    if width <= 0 || height <= 0 {
        return Err(bad(format!("invalid extent {width}x{height}")));
    }
    let (width, height) = (width as usize, height as usize);
    let expected = HEADER_LEN as u64 + 8 * width as u64 * height as u64;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(Error::FloTruncated {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    if found > expected {
        return Err(bad(format!("{} trailing bytes", found - expected)));
    }
    let n = width * height;
    let (mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for px in bytes[HEADER_LEN..].chunks_exact(8) {
        let a = f32::from_le_bytes(px[0..4].try_into().expect("4-byte slice"));
        let b = f32::from_le_bytes(px[4..8].try_into().expect("4-byte slice"));
        if !a.is_finite() || !b.is_finite() {
            return Err(bad("non-finite displacement".into()));
        }
        u.push(f64::from(a));
        v.push(f64::from(b));
    }
    FlowField::new(width, height, u, v)
}

pub fn read_flo(path: &Path) -> Result<FlowField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_flo(&bytes, path)
}

pub fn write_flo(flow: &FlowField, path: &Path) -> Result<()> {
    fs::write(path, encode_flo(flow)).map_err(|e| Error::io(path, e))
}
