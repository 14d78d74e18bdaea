//! Flat binary field snapshots: magic `RSHE1`, then `d`, `n` (u64), `h`, `time`
//! (f64), then `n^d` f64 values in row-major order, all little-endian.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::noise::{Lattice, SpatialField};

pub const SNAPSHOT_MAGIC: &[u8; 5] = b"RSHE1";

pub fn write_snapshot(path: &Path, field: &SpatialField, time: f64) -> Result<()> {
    let l = field.lattice();
    let mut bytes = Vec::with_capacity(5 + 32 + 8 * field.values().len());
    bytes.extend_from_slice(SNAPSHOT_MAGIC);
    bytes.extend_from_slice(&(l.d() as u64).to_le_bytes());
    bytes.extend_from_slice(&(l.n() as u64).to_le_bytes());
    bytes.extend_from_slice(&l.spacing().to_le_bytes());
    bytes.extend_from_slice(&time.to_le_bytes());
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

/// Returns the field and its time stamp.
pub fn read_snapshot(path: &Path) -> Result<(SpatialField, f64)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::InvalidParameter(format!("{}: {msg}", path.display()));
    if bytes.len() < 37 || &bytes[..5] != SNAPSHOT_MAGIC {
        return Err(bad("not an RSHE1 snapshot"));
    }
    let word = |i: usize| -> [u8; 8] { bytes[5 + 8 * i..13 + 8 * i].try_into().unwrap() };
    let d = u64::from_le_bytes(word(0)) as usize;
    let n = u64::from_le_bytes(word(1)) as usize;
    let h = f64::from_le_bytes(word(2));
    let time = f64::from_le_bytes(word(3));
    let lattice = Lattice::new(d, n, h * n as f64 / 2.0)?;
    let body = &bytes[37..];
    if body.len() != 8 * lattice.cells() {
        return Err(bad("payload length does not match header"));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((SpatialField::new(lattice, values)?, time))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.bin");
        let l = Lattice::new(2, 4, 1.0).unwrap();
        let f = SpatialField::from_fn(l, |x| x[0] - 2.0 * x[1]);
        write_snapshot(&path, &f, 0.25).unwrap();
        let raw = std::fs::read(&path).unwrap();
        assert_eq!(&raw[..5], b"RSHE1");
        assert_eq!(raw.len(), 5 + 32 + 8 * 16);
        assert_eq!(u64::from_le_bytes(raw[5..13].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(raw[21..29].try_into().unwrap()), 0.5);
        let (g, t) = read_snapshot(&path).unwrap();
        assert_eq!(g, f);
        assert_eq!(t, 0.25);
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        std::fs::write(&path, b"RSHE0garbagegarbagegarbagegarbagegarbage").unwrap();
        assert!(read_snapshot(&path).is_err());
    }
}
