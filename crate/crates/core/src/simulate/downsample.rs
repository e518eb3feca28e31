//! Fourier-crop downsampling of whole micrographs.

use ndarray::Array2;

use super::micrograph::{Micrograph, Placement};
use crate::error::{Error, Result};
use crate::fft::{forward_real, Fft2};
use crate::C64;

/// Centered frequencies kept for size `m`: `[-(m-1)/2, (m-1)/2]` when odd,
/// `[-m/2, m/2 - 1]` when even.
fn freqs(m: usize) -> std::ops::RangeInclusive<i64> {
    let m = m as i64;
    -(m / 2)..=(m - 1) / 2
}

/// Input bins feeding one output frequency. The even-size Nyquist bin sums
/// the two input frequencies that alias onto it, which keeps the cropped
/// spectrum Hermitian (so the output stays exactly real) and makes the crop
/// agree with plain decimation on band-limited content.
fn sources(f: i64, m: usize) -> Vec<(i64, f64)> {
    if m % 2 == 0 && f == -(m as i64) / 2 {
        vec![(f, 1.0), (-f, 1.0)]
    } else {
        vec![(f, 1.0)]
    }
}

fn wrap(f: i64, n: usize) -> usize {
    f.rem_euclid(n as i64) as usize
}

/// Centered Fourier crop of an `n x n` image to `m x m`, scaled so a
/// constant image keeps its value.
pub fn fourier_crop(a: &Array2<f64>, m: usize) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::validation(format!(
            "image must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if m == 0 || m > n {
        return Err(Error::validation(format!(
            "crop size {m} out of range for input side {n}"
        )));
    }
    if m == n {
        return Ok(a.clone());
    }
    let spec = forward_real(&Fft2::new(n), a);
    let mut cropped = Array2::from_elem((m, m), C64::new(0.0, 0.0));
    for fu in freqs(m) {
        for fv in freqs(m) {
            let mut v = C64::new(0.0, 0.0);
            for &(su, wu) in &sources(fu, m) {
                for &(sv, wv) in &sources(fv, m) {
                    v += wu * wv * spec[(wrap(su, n), wrap(sv, n))];
                }
            }
            cropped[(wrap(fu, m), wrap(fv, m))] = v;
        }
    }
    Fft2::new(m).inverse(&mut cropped);
    let scale = (m as f64 / n as f64).powi(2);
    Ok(cropped.mapv(|z| scale * z.re))
}

/// Downsamples so projections of side `l_proj` become side `target_l`;
/// placement coordinates and the noise variance are rescaled accordingly.
/// A micrograph side that does not scale to an integer rounds to the
/// nearest size with a warning.
pub fn downsample(m: &Micrograph, target_l: usize) -> Result<Micrograph> {
    if target_l == 0 || target_l > m.l_proj {
        return Err(Error::validation(format!(
            "target side {target_l} out of range for projection side {}",
            m.l_proj
        )));
    }
    if target_l == m.l_proj {
        return Ok(m.clone());
    }
    let n = m.pixels.nrows();
    let exact = n as f64 * target_l as f64 / m.l_proj as f64;
    let n_out = (exact.round() as usize).max(target_l);
    if (n_out as f64 - exact).abs() > 1e-9 {
        log::warn!("micrograph side {n} scales to non-integer {exact:.3}; using {n_out}");
    }
    let ratio = n_out as f64 / n as f64;
    let pixels = fourier_crop(&m.pixels, n_out)?;
    let placements = m
        .placements
        .iter()
        .map(|p| Placement {
            corner: [
                ((p.corner[0] as f64 * ratio).round() as usize).min(n_out - target_l),
                ((p.corner[1] as f64 * ratio).round() as usize).min(n_out - target_l),
            ],
            rotation: p.rotation,
        })
        .collect();
    Ok(Micrograph {
        pixels,
        // White noise loses variance with the kept spectral area.
        sigma2: m.sigma2 * ratio * ratio,
        placements,
        l_proj: target_l,
    })
}
