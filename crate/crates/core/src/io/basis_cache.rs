//! Versioned binary cache of the prolate basis tables.
//!
//! Files are keyed by the basis-defining parameters `(c, L, ell_max,
//! truncation)`; a cache hit hands back tables bit-identical to
//! recomputation, which keeps downstream runs deterministic regardless of
//! whether the cache was warm.

use super::codec::{Reader, Writer};
use crate::basis::params::BandlimitParams;
use crate::basis::pswf::{PswfBasis, PswfPair};
use crate::error::{Error, Result};
use std::fs;
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 4] = b"MBAS";
const VERSION: u32 = 1;

/// Cache file name for one parameter set; the float keys are spelled as
/// exact bit patterns so distinct parameters never collide.
pub fn basis_cache_file(params: &BandlimitParams) -> String {
    format!(
        "pswf-v{VERSION}-c{:016x}-L{}-l{}-t{:016x}.bin",
        params.c.to_bits(),
        params.grid_size,
        params.ell_max,
        params.pswf_truncation.to_bits()
    )
}

pub fn write_basis_cache(
    path: impl AsRef<Path>,
    params: &BandlimitParams,
    basis: &PswfBasis,
) -> Result<()> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.f64(params.c);
    w.usize(params.grid_size);
    w.usize(params.ell_max);
    w.f64(params.pswf_truncation);

    w.f64(basis.c_eff);
    w.usize(basis.grid_size);
    w.f64(basis.truncation);
    w.usize_slice(&basis.radial_counts);
    w.usize(basis.pairs.len());
    for p in &basis.pairs {
        w.i32(p.n_ang);
        w.usize(p.n_rad);
    }
    w.c64_slice(&basis.alpha);
    w.f64_slice(&basis.quad_nodes);
    w.f64_slice(&basis.quad_weights);
    w.usize(basis.radial_samples.len());
    for v in &basis.radial_samples {
        w.f64_slice(v);
    }
    w.usize(basis.radial_coeffs.len());
    for v in &basis.radial_coeffs {
        w.f64_slice(v);
    }
    w.usize(basis.psi.len());
    for img in &basis.psi {
        w.array2_c64(img);
    }
    w.usize_slice(&basis.pair_offsets);
    w.usize_slice(&basis.radial_offsets);
    fs::write(path, w.buf)?;
    Ok(())
}

/// Reads a cache file, refusing one written for different parameters.
pub fn read_basis_cache(path: impl AsRef<Path>, params: &BandlimitParams) -> Result<PswfBasis> {
    let bytes = fs::read(path.as_ref())?;
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::format(format!(
            "{}: not a basis cache file",
            path.as_ref().display()
        )));
    }
    let mut r = Reader::new(&bytes[4..]);
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(format!(
            "{}: cache version {version}, this build reads {VERSION}",
            path.as_ref().display()
        )));
    }
    let key = (r.f64()?, r.usize()?, r.usize()?, r.f64()?);
    let want = (params.c, params.grid_size, params.ell_max, params.pswf_truncation);
    if key.0.to_bits() != want.0.to_bits()
        || key.1 != want.1
        || key.2 != want.2
        || key.3.to_bits() != want.3.to_bits()
    {
        return Err(Error::validation(format!(
            "{}: cache keyed by (c={}, L={}, ell_max={}, truncation={}), \
             wanted (c={}, L={}, ell_max={}, truncation={})",
            path.as_ref().display(),
            key.0,
            key.1,
            key.2,
            key.3,
            want.0,
            want.1,
            want.2,
            want.3
        )));
    }

    let c_eff = r.f64()?;
    let grid_size = r.usize()?;
    let truncation = r.f64()?;
    let radial_counts = r.usize_vec()?;
    let n_pairs = r.usize()?;
    let mut pairs = Vec::with_capacity(n_pairs.min(1 << 20));
    for _ in 0..n_pairs {
        pairs.push(PswfPair { n_ang: r.i32()?, n_rad: r.usize()? });
    }
    let alpha = r.c64_vec()?;
    let quad_nodes = r.f64_vec()?;
    let quad_weights = r.f64_vec()?;
    let n = r.usize()?;
    let mut radial_samples = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        radial_samples.push(r.f64_vec()?);
    }
    let n = r.usize()?;
    let mut radial_coeffs = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        radial_coeffs.push(r.f64_vec()?);
    }
    let n = r.usize()?;
    let mut psi = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        psi.push(r.array2_c64()?);
    }
    let pair_offsets = r.usize_vec()?;
    let radial_offsets = r.usize_vec()?;
    r.finish()?;
    Ok(PswfBasis {
        c_eff,
        grid_size,
        truncation,
        radial_counts,
        pairs,
        alpha,
        quad_nodes,
        quad_weights,
        radial_samples,
        radial_coeffs,
        psi,
        pair_offsets,
        radial_offsets,
    })
}

/// Builds the basis, going through `cache_dir` when one is given: a valid
/// cache file is loaded, anything else is built and then saved. A stale or
/// unreadable file is rebuilt rather than failing the run.
pub fn load_or_build_basis(
    params: &BandlimitParams,
    cache_dir: Option<&Path>,
) -> Result<PswfBasis> {
    let path: Option<PathBuf> = cache_dir.map(|d| d.join(basis_cache_file(params)));
    if let Some(p) = &path {
        if p.exists() {
            match read_basis_cache(p, params) {
                Ok(basis) => return Ok(basis),
                Err(e) => log::warn!("rebuilding basis, cache at {} unusable: {e}", p.display()),
            }
        }
    }
    let basis = PswfBasis::build(params)?;
    if let Some(p) = &path {
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
        write_basis_cache(p, params, &basis)?;
    }
    Ok(basis)
}
