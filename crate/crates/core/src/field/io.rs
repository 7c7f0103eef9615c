//! Binary cache for fields and chaos measures.
//!
//! Layout (little endian): magic `LQGF`, `u32` version, `u32` kind
//! (0 field, 1 measure), `u32` dimension, `u32` flavor code, `u64` resolution,
//! `f64` origin x, origin y, extent, mass, cutoff, gamma, sigma², clipped mass,
//! `u64` seed, `u32` periodic flag, `u64` value count, then the values as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::covariance::{CovarianceSpec, Dim};
use super::grid::{FieldSample, GridSpec};
use crate::chaos::{ChaosMeasure, Flavor};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"LQGF";
const VERSION: u32 = 1;
const KIND_FIELD: u32 = 0;
const KIND_MEASURE: u32 = 1;

struct Header {
    kind: u32,
    dim: u32,
    flavor: u32,
    resolution: u64,
    origin: [f64; 2],
    extent: f64,
    mass: f64,
    cutoff: f64,
    gamma: f64,
    sigma2: f64,
    clipped: f64,
    seed: u64,
    periodic: u32,
}

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}
fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}
fn put_f64(w: &mut impl Write, v: f64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}
fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
fn get_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(get_u64(r)?))
}

fn write_all<T: Real>(w: &mut impl Write, h: &Header, values: &[T]) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(w, VERSION)?;
    put_u32(w, h.kind)?;
    put_u32(w, h.dim)?;
    put_u32(w, h.flavor)?;
    put_u64(w, h.resolution)?;
    for v in [h.origin[0], h.origin[1], h.extent, h.mass, h.cutoff, h.gamma, h.sigma2, h.clipped] {
        put_f64(w, v)?;
    }
    put_u64(w, h.seed)?;
    put_u32(w, h.periodic)?;
    put_u64(w, values.len() as u64)?;
    for v in values {
        put_f64(w, v.as_f64())?;
    }
    w.flush()?;
    Ok(())
}

fn read_all<T: Real>(r: &mut impl Read, want_kind: u32) -> Result<(Header, Vec<T>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = get_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = get_u32(r)?;
    if kind != want_kind {
        return Err(Error::Format(format!("record kind {kind}, expected {want_kind}")));
    }
    let dim = get_u32(r)?;
    let flavor = get_u32(r)?;
    let resolution = get_u64(r)?;
    let mut f = [0.0; 8];
    for v in f.iter_mut() {
        *v = get_f64(r)?;
    }
    let seed = get_u64(r)?;
    let periodic = get_u32(r)?;
    let n = get_u64(r)? as usize;
    let expected = match dim {
        1 => resolution,
        2 => resolution.checked_mul(resolution).ok_or_else(|| Error::Format("resolution overflow".into()))?,
        _ => return Err(Error::Format(format!("bad dimension {dim}"))),
    };
    if n as u64 != expected {
        return Err(Error::Format(format!("{n} values for {expected} cells")));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(T::lit(get_f64(r)?));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes".into()));
    }
    let h = Header {
        kind,
        dim,
        flavor,
        resolution,
        origin: [f[0], f[1]],
        extent: f[2],
        mass: f[3],
        cutoff: f[4],
        gamma: f[5],
        sigma2: f[6],
        clipped: f[7],
        seed,
        periodic,
    };
    Ok((h, values))
}

fn grid_of<T: Real>(h: &Header) -> Result<GridSpec<T>> {
    let dim = Dim::from_usize(h.dim as usize).map_err(|e| Error::Format(e.to_string()))?;
    GridSpec::new(dim, [T::lit(h.origin[0]), T::lit(h.origin[1])], T::lit(h.extent), h.resolution as usize)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn write_field<T: Real>(path: impl AsRef<Path>, field: &FieldSample<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let g = &field.grid;
    let h = Header {
        kind: KIND_FIELD,
        dim: g.dim.as_usize() as u32,
        flavor: 0,
        resolution: g.resolution as u64,
        origin: [g.origin[0].as_f64(), g.origin[1].as_f64()],
        extent: g.extent.as_f64(),
        mass: field.spec.mass.as_f64(),
        cutoff: field.spec.cutoff.as_f64(),
        gamma: 0.0,
        sigma2: field.sigma2.as_f64(),
        clipped: field.clipped_mass.as_f64(),
        seed: field.seed,
        periodic: field.periodic as u32,
    };
    write_all(&mut w, &h, &field.values)
}

pub fn read_field<T: Real>(path: impl AsRef<Path>) -> Result<FieldSample<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let (h, values) = read_all::<T>(&mut r, KIND_FIELD)?;
    let grid = grid_of::<T>(&h)?;
    let spec = CovarianceSpec::new(grid.dim, T::lit(h.mass), T::lit(h.cutoff)).map_err(|e| Error::Format(e.to_string()))?;
    Ok(FieldSample {
        grid,
        values,
        sigma2: T::lit(h.sigma2),
        spec,
        seed: h.seed,
        periodic: h.periodic != 0,
        clipped_mass: T::lit(h.clipped),
    })
}

pub fn write_measure<T: Real>(path: impl AsRef<Path>, m: &ChaosMeasure<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let g = &m.grid;
    let h = Header {
        kind: KIND_MEASURE,
        dim: g.dim.as_usize() as u32,
        flavor: m.flavor.code(),
        resolution: g.resolution as u64,
        origin: [g.origin[0].as_f64(), g.origin[1].as_f64()],
        extent: g.extent.as_f64(),
        mass: 0.0,
        cutoff: m.eps.as_f64(),
        gamma: m.gamma.as_f64(),
        sigma2: 0.0,
        clipped: 0.0,
        seed: 0,
        periodic: 0,
    };
    write_all(&mut w, &h, &m.masses)
}

pub fn read_measure<T: Real>(path: impl AsRef<Path>) -> Result<ChaosMeasure<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let (h, masses) = read_all::<T>(&mut r, KIND_MEASURE)?;
    Ok(ChaosMeasure {
        grid: grid_of::<T>(&h)?,
        masses,
        gamma: T::lit(h.gamma),
        flavor: Flavor::from_code(h.flavor)?,
        eps: T::lit(h.cutoff),
    })
}
