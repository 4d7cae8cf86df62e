//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes        | content                         |
//! |--------------|---------------------------------|
//! | 5            | magic `NLPF1`                   |
//! | 4 + 4        | `u32` m, `u32` n                |
//! | 5 x 8        | `f64` x0, y0, L1, L2, t         |
//! | m n x 8      | `f64` values, x-index fastest   |

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::grid::{Field, GridSpec};

pub const MAGIC: &[u8; 5] = b"NLPF1";
pub const HEADER_LEN: usize = 5 + 8 + 40;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a snapshot: bad magic {0:?}")]
    BadMagic(Vec<u8>),
    #[error("truncated snapshot: {0}")]
    Truncated(String),
    #[error("invalid snapshot header: {0}")]
    Header(String),
}

/// A field together with the simulation time it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: Field,
    pub t: f64,
}

pub fn encode(field: &Field, t: f64) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.m() as u32).to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    for v in [g.x0(), g.y0(), g.l1(), g.l2(), t] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Snapshot, SnapshotError> {
    if bytes.len() < MAGIC.len() {
        return Err(SnapshotError::Truncated(format!(
            "{} bytes, shorter than the magic",
            bytes.len()
        )));
    }
    if &bytes[..5] != MAGIC {
        return Err(SnapshotError::BadMagic(bytes[..5].to_vec()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(SnapshotError::Truncated(format!(
            "header needs {HEADER_LEN} bytes, got {}",
            bytes.len()
        )));
    }
    let u32_at =
        |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let (m, n) = (u32_at(5), u32_at(9));
    let (x0, y0, l1, l2, t) = (f64_at(13), f64_at(21), f64_at(29), f64_at(37), f64_at(45));
    let grid =
        GridSpec::new(x0, y0, l1, l2, m, n).map_err(|e| SnapshotError::Header(e.to_string()))?;
    let need = HEADER_LEN + 8 * m * n;
    if bytes.len() != need {
        return Err(SnapshotError::Truncated(format!(
            "{m}x{n} field needs {need} bytes, got {}",
            bytes.len()
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let field = Field::from_vec(grid, values).map_err(|e| SnapshotError::Header(e.to_string()))?;
    Ok(Snapshot { field, t })
}

pub fn write_to(mut w: impl Write, field: &Field, t: f64) -> Result<(), SnapshotError> {
    w.write_all(&encode(field, t))?;
    Ok(())
}

pub fn read_from(mut r: impl Read) -> Result<Snapshot, SnapshotError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn write_file(path: impl AsRef<Path>, field: &Field, t: f64) -> Result<(), SnapshotError> {
    std::fs::write(path, encode(field, t))?;
    Ok(())
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Snapshot, SnapshotError> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_bytes() {
        let g = GridSpec::new(-1.0, 0.0, 2.0, 1.0, 2, 1).unwrap();
        let f = Field::from_vec(g, vec![1.0, -0.5]).unwrap();
        let bytes = encode(&f, 0.25);
        let mut expect = b"NLPF1".to_vec();
        expect.extend_from_slice(&[2, 0, 0, 0, 1, 0, 0, 0]);
        expect.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0xf0, 0xbf]); // -1.0
        expect.extend_from_slice(&[0; 8]); // 0.0
        expect.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0, 0x40]); // 2.0
        expect.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0xf0, 0x3f]); // 1.0
        expect.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0xd0, 0x3f]); // 0.25
        expect.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0xf0, 0x3f]); // 1.0
        expect.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0xe0, 0xbf]); // -0.5
        assert_eq!(bytes, expect);
        assert_eq!(decode(&expect).unwrap(), Snapshot { field: f, t: 0.25 });
    }

    #[test]
    fn rejects_corrupt_input() {
        let g = GridSpec::square(0.0, 1.0, 4).unwrap();
        let bytes = encode(&Field::constant(g, 1.0), 0.0);
        assert!(matches!(
            decode(&bytes[..HEADER_LEN]),
            Err(SnapshotError::Truncated(_))
        ));
        assert!(matches!(
            decode(&bytes[..20]),
            Err(SnapshotError::Truncated(_))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(SnapshotError::BadMagic(_))));
        assert!(decode(b"NL").is_err());
    }
}
