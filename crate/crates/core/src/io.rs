//! Field snapshot files.
//!
//! Binary layout (little endian): magic `MDL1`, `dims: u32`, `n: u32` per
//! axis, `(min, max): (f64, f64)` per axis, then `(re, im)` f64 pairs in
//! row-major order.

use crate::grid::{Axis, Field, Grid, GridError, C64};
use crate::polar::PolarPair;
use std::io::{self, Read, Write};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"MDL1";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}, expected \"MDL1\"")]
    BadMagic([u8; 4]),
    #[error("invalid grid in header: {0}")]
    Grid(#[from] GridError),
}

pub fn write_field<W: Write>(mut w: W, field: &Field) -> io::Result<()> {
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&(grid.dims() as u32).to_le_bytes())?;
    for a in grid.axes() {
        w.write_all(&(a.n as u32).to_le_bytes())?;
    }
    for a in grid.axes() {
        w.write_all(&a.min.to_le_bytes())?;
        w.write_all(&a.max.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(16 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_field<R: Read>(mut r: R) -> Result<Field, SnapshotError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SnapshotError::BadMagic(magic));
    }
    let dims = read_u32(&mut r)? as usize;
    if dims == 0 || dims > 2 {
        return Err(GridError::BadDims(dims).into());
    }
    let ns: Vec<usize> = (0..dims).map(|_| read_u32(&mut r).map(|n| n as usize)).collect::<io::Result<_>>()?;
    let mut axes = Vec::with_capacity(dims);
    for n in ns {
        let min = read_f64(&mut r)?;
        let max = read_f64(&mut r)?;
        axes.push(Axis { n, min, max });
    }
    let grid = Grid::from_axes(&axes)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = read_f64(&mut r)?;
        let im = read_f64(&mut r)?;
        values.push(C64::new(re, im));
    }
    Ok(Field::new(grid, values)?)
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with columns `x[,y],re,im`.
pub fn write_field_csv<W: Write>(mut w: W, field: &Field) -> io::Result<()> {
    let grid = field.grid();
    if grid.dims() == 1 {
        writeln!(w, "x,re,im")?;
    } else {
        writeln!(w, "x,y,re,im")?;
    }
    for (p, v) in grid.points().zip(field.values()) {
        if grid.dims() == 1 {
            writeln!(w, "{},{},{}", fmt_f64(p[0]), fmt_f64(v.re), fmt_f64(v.im))?;
        } else {
            writeln!(w, "{},{},{},{}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(v.re), fmt_f64(v.im))?;
        }
    }
    Ok(())
}

/// Packs a polar pair into one field: amplitude in the real channel, action in
/// the imaginary channel.
pub fn polar_as_field(pair: &PolarPair) -> Field {
    let vals = pair.amplitude.iter().zip(&pair.action).map(|(&a, &s)| C64::new(a, s)).collect();
    Field::new(pair.grid, vals).expect("pair arrays match grid")
}

pub fn field_as_polar(field: &Field) -> PolarPair {
    PolarPair {
        grid: *field.grid(),
        amplitude: field.values().iter().map(|v| v.re).collect(),
        action: field.values().iter().map(|v| v.im).collect(),
    }
}

pub fn write_polar<W: Write>(w: W, pair: &PolarPair) -> io::Result<()> {
    write_field(w, &polar_as_field(pair))
}

pub fn read_polar<R: Read>(r: R) -> Result<PolarPair, SnapshotError> {
    Ok(field_as_polar(&read_field(r)?))
}
