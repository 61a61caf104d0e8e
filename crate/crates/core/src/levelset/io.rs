//! `HJVF` value-field files.
//!
//! Layout, all little-endian: magic `HJVF`, version `u32`, dims `3×u32`,
//! bounds `6×f64` (`x_min, x_max, y_min, y_max, θ_min, θ_max`), periodic
//! flags `3×u8`, slice count `u32`, `dt_out` as `f64`, then every slice as
//! `f32` with time slowest and x fastest.

use std::io::{Read, Write};
use std::path::Path;

use super::{Grid3, ValueField};
use crate::error::LevelSetError;

pub const HJVF_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"HJVF";

pub fn write_value_field(vf: &ValueField, path: &Path) -> Result<(), LevelSetError> {
    let mut out = Vec::with_capacity(64 + 4 * vf.data.len());
    encode(vf, &mut out);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

pub fn read_value_field(path: &Path) -> Result<ValueField, LevelSetError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub(crate) fn encode(vf: &ValueField, out: &mut Vec<u8>) {
    let g = &vf.grid;
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&HJVF_VERSION.to_le_bytes());
    for d in g.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for a in 0..3 {
        out.extend_from_slice(&g.min[a].to_le_bytes());
        out.extend_from_slice(&g.max[a].to_le_bytes());
    }
    for p in g.periodic {
        out.push(p as u8);
    }
    out.extend_from_slice(&(vf.slice_count() as u32).to_le_bytes());
    out.extend_from_slice(&vf.dt_out.to_le_bytes());
    for v in &vf.data {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8], LevelSetError> {
        if self.pos + n > self.bytes.len() {
            return Err(LevelSetError::Truncated(section));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, section: &'static str) -> Result<u32, LevelSetError> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().unwrap()))
    }

    fn f64(&mut self, section: &'static str) -> Result<f64, LevelSetError> {
        Ok(f64::from_le_bytes(self.take(8, section)?.try_into().unwrap()))
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<ValueField, LevelSetError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(LevelSetError::Format("bad magic".into()));
    }
    let version = c.u32("version")?;
    if version != HJVF_VERSION {
        return Err(LevelSetError::Format(format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = c.u32("dims")? as usize;
    }
    let mut min = [0.0; 3];
    let mut max = [0.0; 3];
    for a in 0..3 {
        min[a] = c.f64("bounds")?;
        max[a] = c.f64("bounds")?;
    }
    let flags = c.take(3, "periodic flags")?;
    let periodic = [flags[0] != 0, flags[1] != 0, flags[2] != 0];
    let grid = Grid3 {
        min,
        max,
        dims,
        periodic,
    };
    grid.validate()
        .map_err(|e| LevelSetError::Format(e.to_string()))?;
    let count = c.u32("slice count")? as usize;
    if count == 0 {
        return Err(LevelSetError::Format("zero slices".into()));
    }
    let dt_out = c.f64("dt_out")?;
    let total = count * grid.len();
    let raw = c.take(4 * total, "slices")?;
    let data = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    if c.pos != bytes.len() {
        return Err(LevelSetError::Format("trailing bytes".into()));
    }
    ValueField::new(grid, dt_out, data)
}
