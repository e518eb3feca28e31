//! MRC2014 mode-2 (32-bit float, little-endian) images and volumes.
//!
//! The writer emits a full 1024-byte header with the standard machine stamp
//! and density statistics, so files open in ordinary structural-biology
//! viewers. Axis convention: `Array3` index `(i, j, k)` maps to MRC
//! `(z, y, x)` and `Array2` index `(i, j)` to `(y, x)`, keeping the payload
//! in the arrays' native memory order.

use crate::error::{Error, Result};
use ndarray::{Array2, Array3};
use std::fs;
use std::path::Path;

const HEADER_LEN: usize = 1024;
const MODE_F32: i32 = 2;
const NVERSION: i32 = 20140;
/// Little-endian machine stamp.
const MACHST: [u8; 4] = [0x44, 0x44, 0x00, 0x00];

struct Stats {
    min: f32,
    max: f32,
    mean: f32,
    rms: f32,
}

fn stats(data: &[f32]) -> Stats {
    let mut min = f32::INFINITY;
    let mut max = f32::NEG_INFINITY;
    let mut sum = 0.0f64;
    for &v in data {
        min = min.min(v);
        max = max.max(v);
        sum += v as f64;
    }
    let mean = sum / data.len() as f64;
    let var =
        data.iter().map(|&v| (v as f64 - mean) * (v as f64 - mean)).sum::<f64>() / data.len() as f64;
    Stats { min, max, mean: mean as f32, rms: var.sqrt() as f32 }
}

fn put_i32(h: &mut [u8], offset: usize, v: i32) {
    h[offset..offset + 4].copy_from_slice(&v.to_le_bytes());
}

fn put_f32(h: &mut [u8], offset: usize, v: f32) {
    h[offset..offset + 4].copy_from_slice(&v.to_le_bytes());
}

fn get_i32(h: &[u8], offset: usize) -> i32 {
    i32::from_le_bytes(h[offset..offset + 4].try_into().unwrap())
}

/// `ispg` separates image stacks (0) from volumes (1).
fn header(nx: usize, ny: usize, nz: usize, ispg: i32, st: &Stats) -> Vec<u8> {
    let mut h = vec![0u8; HEADER_LEN];
    put_i32(&mut h, 0, nx as i32);
    put_i32(&mut h, 4, ny as i32);
    put_i32(&mut h, 8, nz as i32);
    put_i32(&mut h, 12, MODE_F32);
    // NXSTART/NYSTART/NZSTART stay zero (bytes 16..28).
    put_i32(&mut h, 28, nx as i32);
    put_i32(&mut h, 32, ny as i32);
    put_i32(&mut h, 36, nz as i32);
    // Cell: one angstrom per sample, right angles.
    put_f32(&mut h, 40, nx as f32);
    put_f32(&mut h, 44, ny as f32);
    put_f32(&mut h, 48, nz as f32);
    for off in [52, 56, 60] {
        put_f32(&mut h, off, 90.0);
    }
    put_i32(&mut h, 64, 1);
    put_i32(&mut h, 68, 2);
    put_i32(&mut h, 72, 3);
    put_f32(&mut h, 76, st.min);
    put_f32(&mut h, 80, st.max);
    put_f32(&mut h, 84, st.mean);
    put_i32(&mut h, 88, ispg);
    // NSYMBT = 0 (byte 92), extended header absent.
    put_i32(&mut h, 108, NVERSION);
    h[208..212].copy_from_slice(b"MAP ");
    h[212..216].copy_from_slice(&MACHST);
    put_f32(&mut h, 216, st.rms);
    put_i32(&mut h, 220, 1);
    let label = b"created by micrem";
    h[224..224 + label.len()].copy_from_slice(label);
    for b in &mut h[224 + label.len()..304] {
        *b = b' ';
    }
    h
}

fn write_payload(path: &Path, nx: usize, ny: usize, nz: usize, ispg: i32, data: &[f32]) -> Result<()> {
    debug_assert_eq!(data.len(), nx * ny * nz);
    let mut bytes = header(nx, ny, nz, ispg, &stats(data));
    bytes.reserve(data.len() * 4);
    for &v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

struct Parsed {
    nx: usize,
    ny: usize,
    nz: usize,
    data: Vec<f32>,
}

fn read_payload(path: &Path) -> Result<Parsed> {
    let bytes = fs::read(path)?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(format!(
            "{}: shorter than an MRC header",
            path.display()
        )));
    }
    if &bytes[208..212] != b"MAP " {
        return Err(Error::format(format!("{}: missing MAP magic", path.display())));
    }
    if bytes[212] != MACHST[0] || bytes[213] != MACHST[1] {
        return Err(Error::format(format!(
            "{}: unsupported machine stamp {:02x}{:02x}",
            path.display(),
            bytes[212],
            bytes[213]
        )));
    }
    let mode = get_i32(&bytes, 12);
    if mode != MODE_F32 {
        return Err(Error::format(format!(
            "{}: mode {mode} is not 32-bit float",
            path.display()
        )));
    }
    let nx = get_i32(&bytes, 0);
    let ny = get_i32(&bytes, 4);
    let nz = get_i32(&bytes, 8);
    if nx <= 0 || ny <= 0 || nz <= 0 {
        return Err(Error::format(format!(
            "{}: nonpositive dimensions {nx} x {ny} x {nz}",
            path.display()
        )));
    }
    let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
    let nsymbt = get_i32(&bytes, 92);
    if nsymbt < 0 {
        return Err(Error::format(format!("{}: negative NSYMBT", path.display())));
    }
    let start = HEADER_LEN + nsymbt as usize;
    let want = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nz))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::format("dimensions overflow"))?;
    if bytes.len() != start + want {
        return Err(Error::format(format!(
            "{}: payload is {} bytes, header promises {}",
            path.display(),
            bytes.len().saturating_sub(start),
            want
        )));
    }
    let data = bytes[start..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Parsed { nx, ny, nz, data })
}

/// Writes a 3-D volume; values are converted to `f32`.
pub fn write_mrc_volume(path: impl AsRef<Path>, v: &Array3<f64>) -> Result<()> {
    let (d0, d1, d2) = v.dim();
    if d0 == 0 || d1 == 0 || d2 == 0 {
        return Err(Error::validation("cannot write an empty volume"));
    }
    let data: Vec<f32> = v.iter().map(|&x| x as f32).collect();
    write_payload(path.as_ref(), d2, d1, d0, 1, &data)
}

pub fn read_mrc_volume(path: impl AsRef<Path>) -> Result<Array3<f64>> {
    let p = read_payload(path.as_ref())?;
    let data: Vec<f64> = p.data.iter().map(|&x| x as f64).collect();
    Array3::from_shape_vec((p.nz, p.ny, p.nx), data)
        .map_err(|e| Error::format(format!("bad volume shape: {e}")))
}

/// Writes a single 2-D image (`nz = 1`); values are converted to `f32`.
pub fn write_mrc_image(path: impl AsRef<Path>, img: &Array2<f64>) -> Result<()> {
    let (rows, cols) = img.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::validation("cannot write an empty image"));
    }
    let data: Vec<f32> = img.iter().map(|&x| x as f32).collect();
    write_payload(path.as_ref(), cols, rows, 1, 0, &data)
}

pub fn read_mrc_image(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let p = read_payload(path.as_ref())?;
    if p.nz != 1 {
        return Err(Error::format(format!(
            "expected a single 2-D image, file holds {} sections",
            p.nz
        )));
    }
    let data: Vec<f64> = p.data.iter().map(|&x| x as f64).collect();
    Array2::from_shape_vec((p.ny, p.nx), data)
        .map_err(|e| Error::format(format!("bad image shape: {e}")))
}
