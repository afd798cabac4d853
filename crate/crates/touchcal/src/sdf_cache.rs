//! Binary SDF grid cache.
//!
//! Layout, little-endian: magic `TCSDF1\0\0`, origin as three `f64`, the
//! resolution as `f64`, dims as three `u64`, then `f32` values in grid order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use touchcal_core::geometry::{GridHeader, SdfGrid};
use touchcal_core::Vec3;

use crate::Error;

const MAGIC: &[u8; 8] = b"TCSDF1\0\0";

pub fn write_grid(path: &Path, grid: &SdfGrid) -> Result<(), Error> {
    let io = |e| Error::Io(path.to_path_buf(), e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let h = grid.header();
    let mut head = Vec::with_capacity(64);
    head.extend_from_slice(MAGIC);
    for v in [h.origin.x, h.origin.y, h.origin.z, h.resolution] {
        head.extend_from_slice(&v.to_le_bytes());
    }
    for d in h.dims {
        head.extend_from_slice(&(d as u64).to_le_bytes());
    }
    w.write_all(&head).map_err(io)?;
    for v in grid.values() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_grid(path: &Path) -> Result<SdfGrid, Error> {
    let io = |e| Error::Io(path.to_path_buf(), e);
    let bad = |m: String| Error::Format(path.to_path_buf(), m);
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut head = [0u8; 64];
    r.read_exact(&mut head).map_err(io)?;
    if &head[..8] != MAGIC {
        return Err(bad("not an SDF cache file".into()));
    }
    let f = |i: usize| f64::from_le_bytes(head[8 + 8 * i..16 + 8 * i].try_into().unwrap());
    let u = |i: usize| u64::from_le_bytes(head[40 + 8 * i..48 + 8 * i].try_into().unwrap());
    let dims = [0, 1, 2].map(|i| usize::try_from(u(i)).unwrap_or(usize::MAX));
    let header = GridHeader { origin: Vec3::new(f(0), f(1), f(2)), resolution: f(3), dims };
    let count = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| bad("grid too large".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io)?;
    if bytes.len() != count * 4 {
        return Err(bad(format!("expected {} value bytes, found {}", count * 4, bytes.len())));
    }
    let values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    SdfGrid::from_parts(header, values).map_err(|e| bad(e.to_string()))
}
