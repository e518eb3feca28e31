//! Moving volumes between coefficient space and gridded real space.
//!
//! The coefficient basis lives on the Fourier ball `|xi| <= pi c L`. On an
//! odd `L^3` grid with voxel positions `(g - (L-1)/2) * (2/L)` the conjugate
//! frequency grid is `xi = pi n` for integer `n`, so rendering is evaluation
//! of the basis on the ball lattice followed by a centered inverse DFT, and
//! fitting a gridded volume is the least-squares inverse of the same map.

use super::coeffs::{self, normalized_radial, VolumeCoefficients};
use crate::basis::harmonics::sph_harmonic;
use crate::basis::BandlimitParams;
use crate::error::{Error, Result};
use crate::C64;
use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

fn require_odd(l: usize) -> Result<()> {
    if l % 2 == 0 {
        return Err(Error::validation(format!(
            "volume grids must have odd side length, got {l}"
        )));
    }
    Ok(())
}

/// Integer frequency vectors on the ball: `|n| <= c L` componentwise within
/// the symmetric grid range.
pub fn ball_frequencies(params: &BandlimitParams) -> Vec<[i64; 3]> {
    let l = params.grid_size as i64;
    let h = (l - 1) / 2;
    let radius = params.c * params.grid_size as f64;
    let mut out = Vec::new();
    for n1 in -h..=h {
        for n2 in -h..=h {
            for n3 in -h..=h {
                let r2 = (n1 * n1 + n2 * n2 + n3 * n3) as f64;
                if r2.sqrt() <= radius {
                    out.push([n1, n2, n3]);
                }
            }
        }
    }
    out
}

fn axis_kernel(l: usize, sign: f64) -> Array2<C64> {
    let h = (l as f64 - 1.0) / 2.0;
    Array2::from_shape_fn((l, l), |(a, b)| {
        let arg = sign * 2.0 * std::f64::consts::PI / l as f64 * (a as f64 - h) * (b as f64 - h);
        C64::from_polar(1.0, arg)
    })
}

fn apply_axis0(kernel: &Array2<C64>, a: &Array3<C64>) -> Array3<C64> {
    let (l, m, n) = a.dim();
    let mut out = Array3::<C64>::zeros((l, m, n));
    for oi in 0..l {
        for g in 0..l {
            let kv = kernel[(oi, g)];
            for j in 0..m {
                for k in 0..n {
                    out[(oi, j, k)] += kv * a[(g, j, k)];
                }
            }
        }
    }
    out
}

/// Centered 3-D DFT on an odd cube: index `a` stands for the centered value
/// `a - (L-1)/2` on both sides, and the kernel along each axis is
/// `exp(sign i 2 pi / L * (out - h)(in - h))`. The kernel is symmetric, so
/// the same routine serves grid-to-frequency (`sign = +1`) and
/// frequency-to-grid (`sign = -1`); no normalization is applied.
pub fn centered_dft3(a: &Array3<C64>, sign: f64) -> Array3<C64> {
    let l = a.dim().0;
    assert_eq!(a.dim(), (l, l, l));
    let kernel = axis_kernel(l, sign);
    let mut cur = a.clone();
    for _ in 0..3 {
        cur = apply_axis0(&kernel, &cur);
        cur = cur.permuted_axes([1, 2, 0]).as_standard_layout().to_owned();
    }
    cur
}

/// Renders coefficients to the real-space grid: evaluate the Fourier basis
/// on the ball lattice, inverse centered DFT, scale by `(d_xi / 2 pi)^3 =
/// 1/8`.
pub fn render_volume(x: &VolumeCoefficients, params: &BandlimitParams) -> Result<Array3<f64>> {
    let l = params.grid_size;
    require_odd(l)?;
    let h = (l as i64 - 1) / 2;
    let scale_unit = 1.0 / (params.c * l as f64);
    let mut cube = Array3::<C64>::zeros((l, l, l));
    for n in ball_frequencies(params) {
        let p = [
            n[0] as f64 * scale_unit,
            n[1] as f64 * scale_unit,
            n[2] as f64 * scale_unit,
        ];
        cube[((n[0] + h) as usize, (n[1] + h) as usize, (n[2] + h) as usize)] =
            x.fourier_at(params, p);
    }
    let spatial = centered_dft3(&cube, -1.0);
    let re_norm: f64 = spatial.iter().map(|v| v.re * v.re).sum::<f64>().sqrt();
    let im_norm: f64 = spatial.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
    if im_norm > 1e-9 * re_norm.max(f64::MIN_POSITIVE) {
        return Err(Error::numerical(format!(
            "rendered volume has imaginary residue {im_norm:.3e} vs {re_norm:.3e}"
        )));
    }
    Ok(spatial.mapv(|v| 0.125 * v.re))
}

/// Least-squares fit of a gridded volume by coefficients: matches the
/// centered DFT of the grid against the basis on the ball lattice, solving
/// the (Hermitian, real-constrained) normal equations.
pub fn fit_volume(params: &BandlimitParams, vol: &Array3<f64>) -> Result<VolumeCoefficients> {
    let l = params.grid_size;
    require_odd(l)?;
    if vol.dim() != (l, l, l) {
        return Err(Error::validation(format!(
            "volume shape {:?} does not match grid size {l}",
            vol.dim()
        )));
    }
    let h = (l as i64 - 1) / 2;
    let freqs = ball_frequencies(params);
    let m = params.coeff_count();
    if freqs.len() < m {
        return Err(Error::validation(format!(
            "{} ball frequencies cannot determine {m} coefficients",
            freqs.len()
        )));
    }
    let dft = centered_dft3(&vol.mapv(|v| C64::new(v, 0.0)), 1.0);
    let voxel = (2.0 / l as f64).powi(3);
    let proto = VolumeCoefficients::zeros(params);
    let labels = proto.labels();
    let scale_unit = 1.0 / (params.c * l as f64);

    // Basis matrix rows per ball frequency.
    let mut a = Array2::<C64>::zeros((m, m));
    let mut y = vec![C64::new(0.0, 0.0); m];
    let mut row = vec![C64::new(0.0, 0.0); m];
    for n in &freqs {
        let p = [
            n[0] as f64 * scale_unit,
            n[1] as f64 * scale_unit,
            n[2] as f64 * scale_unit,
        ];
        let k = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let theta = if k == 0.0 { 0.0 } else { (p[2] / k).clamp(-1.0, 1.0).acos() };
        let phi = p[1].atan2(p[0]);
        for (idx, &(lq, mq, sq)) in labels.iter().enumerate() {
            row[idx] = normalized_radial(params, lq, sq, k) * sph_harmonic(lq, mq, theta, phi);
        }
        let fhat = voxel
            * dft[((n[0] + h) as usize, (n[1] + h) as usize, (n[2] + h) as usize)];
        for r in 0..m {
            let cr = row[r].conj();
            y[r] += cr * fhat;
            for c in 0..m {
                a[(r, c)] += cr * row[c];
            }
        }
    }
    coeffs::solve_real_constrained(params, &a, &y)
}

/// Coefficients fit to an iid standard normal volume: a structureless but
/// full-spectrum starting point for iterative refinement.
pub fn gaussian_init(params: &BandlimitParams, seed: u64) -> Result<VolumeCoefficients> {
    let l = params.grid_size;
    require_odd(l)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let vol = Array3::from_shape_fn((l, l, l), |_| StandardNormal.sample(&mut rng));
    fit_volume(params, &vol)
}
