//! Tomographic projection: volume coefficients to clean projection images.
//!
//! By the projection-slice theorem the Fourier transform of the projection
//! along orientation `omega` is the central slice `fhat(omega^{-1}(xi_x,
//! xi_y, 0))`. In the expansion bases the whole map is the finite linear
//! contraction
//!
//! `c_{N,n}(omega) = sum_{l,m,s} x_{l,m,s} beta_{l,s;N,n} D^l_{N,m}(omega)`,
//!
//! followed by image synthesis `I = sum_{N,n} c_{N,n} psi_{N,n}`. The result
//! is real for real volumes; synthesis enforces that and returns the real
//! part.

use super::beta::BetaTable;
use super::coeffs::VolumeCoefficients;
use crate::basis::wigner::wigner_d_stack;
use crate::basis::{PswfBasis, Rotation};
use crate::error::{Error, Result};
use crate::C64;
use ndarray::Array2;

/// A synthesized projection: prolate coefficients and the sampled image.
#[derive(Debug, Clone)]
pub struct Projection {
    pub coeffs: Vec<C64>,
    pub image: Array2<f64>,
}

/// Prolate coefficients of the projection at orientation `rot`.
pub fn project_coeffs(
    x: &VolumeCoefficients,
    beta: &BetaTable,
    basis: &PswfBasis,
    rot: &Rotation,
) -> Vec<C64> {
    let d = wigner_d_stack(x.ell_max, rot);
    project_coeffs_with_d(x, beta, basis, &d)
}

/// Same, with the Wigner-D stack already evaluated (the hot path when many
/// orientations share a volume).
pub fn project_coeffs_with_d(
    x: &VolumeCoefficients,
    beta: &BetaTable,
    basis: &PswfBasis,
    d: &[Vec<Vec<C64>>],
) -> Vec<C64> {
    let mut coeffs = vec![C64::new(0.0, 0.0); basis.pair_count()];
    for (idx, pair) in basis.pairs.iter().enumerate() {
        let n_abs = pair.n_ang.unsigned_abs() as usize;
        let mut acc = C64::new(0.0, 0.0);
        for l in n_abs..=x.ell_max {
            if (l + n_abs) % 2 == 1 {
                continue;
            }
            let block = beta.block(l, n_abs);
            let row = &d[l][(pair.n_ang as i64 + l as i64) as usize];
            for m in -(l as i64)..=(l as i64) {
                let dval = row[(m + l as i64) as usize];
                for s in 0..x.s_of_ell[l] {
                    acc += x.get(l, m, s) * block[(s, pair.n_rad)] * dval;
                }
            }
        }
        coeffs[idx] = acc;
    }
    coeffs
}

/// Sums `c_{N,n} psi_{N,n}` on the pixel grid and takes the real part,
/// failing if the imaginary residue is not negligible.
pub fn synthesize_image(basis: &PswfBasis, coeffs: &[C64]) -> Result<Array2<f64>> {
    assert_eq!(coeffs.len(), basis.pair_count());
    let l = basis.grid_size;
    let mut acc = Array2::<C64>::zeros((l, l));
    for (c, psi) in coeffs.iter().zip(&basis.psi) {
        if *c != C64::new(0.0, 0.0) {
            acc.zip_mut_with(psi, |a, &p| *a += c * p);
        }
    }
    let re_norm: f64 = acc.iter().map(|v| v.re * v.re).sum::<f64>().sqrt();
    let im_norm: f64 = acc.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
    if im_norm > 1e-10 * re_norm.max(f64::MIN_POSITIVE) {
        return Err(Error::numerical(format!(
            "projection image has imaginary residue {im_norm:.3e} against real norm \
             {re_norm:.3e}; volume coefficients likely violate the reality symmetry"
        )));
    }
    Ok(acc.mapv(|v| v.re))
}

pub fn project(
    x: &VolumeCoefficients,
    beta: &BetaTable,
    basis: &PswfBasis,
    rot: &Rotation,
) -> Result<Projection> {
    let coeffs = project_coeffs(x, beta, basis, rot);
    let image = synthesize_image(basis, &coeffs)?;
    Ok(Projection { coeffs, image })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::pswf::pixel_coord;
    use crate::basis::quadrature::gauss_legendre_unit;
    use crate::basis::rotation::RotationGrid;
    use crate::basis::BandlimitParams;

    fn setup(l: usize, ell_max: usize) -> (BandlimitParams, PswfBasis, BetaTable) {
        let params = BandlimitParams::new(0.5, l, ell_max).unwrap();
        let basis = PswfBasis::build(&params).unwrap();
        let beta = BetaTable::build(&params, &basis).unwrap();
        (params, basis, beta)
    }

    #[test]
    fn images_are_real_for_real_volumes() {
        let (params, basis, beta) = setup(7, 3);
        let x = VolumeCoefficients::random_real(&params, 11);
        for rot in RotationGrid::uniform(5, 3).rotations.iter() {
            let proj = project(&x, &beta, &basis, rot).unwrap();
            let norm: f64 = proj.image.iter().map(|v| v * v).sum();
            assert!(norm > 0.0);
        }
    }

    #[test]
    fn coefficient_symmetry_under_conjugation() {
        // Real volumes give c_{-N,n} = conj(c_{N,n}), the image-side
        // reality condition.
        let (params, basis, beta) = setup(7, 3);
        let x = VolumeCoefficients::random_real(&params, 23);
        let rot = RotationGrid::uniform(1, 9).rotations[0];
        let coeffs = project_coeffs(&x, &beta, &basis, &rot);
        for (idx, pair) in basis.pairs.iter().enumerate() {
            let partner = basis.pair_index(-pair.n_ang, pair.n_rad);
            let diff = (coeffs[idx] - coeffs[partner].conj()).norm();
            assert!(diff < 1e-12, "pair {:?}: {diff}", pair);
        }
    }

    #[test]
    fn in_plane_rotation_phases_coefficients() {
        // Composing with an in-plane rotation about z multiplies c_{N,n} by
        // exp(-i N g): the projection rotates without resynthesis.
        let (params, basis, beta) = setup(7, 3);
        let x = VolumeCoefficients::random_real(&params, 31);
        let rot = RotationGrid::uniform(1, 17).rotations[0];
        let g = 0.83;
        let composed = Rotation::about_z(g) * rot;
        let base = project_coeffs(&x, &beta, &basis, &rot);
        let turned = project_coeffs(&x, &beta, &basis, &composed);
        for (idx, pair) in basis.pairs.iter().enumerate() {
            let phase = C64::from_polar(1.0, -(pair.n_ang as f64) * g);
            assert!(
                (turned[idx] - base[idx] * phase).norm() < 1e-12 * base[idx].norm().max(1e-9),
                "pair {:?}",
                pair
            );
        }
    }

    /// Brute-force reference: inverse 2-D Fourier transform of the central
    /// slice, by polar quadrature over the frequency disk. Independent of
    /// the prolate machinery.
    fn slice_oracle_image(
        x: &VolumeCoefficients,
        params: &BandlimitParams,
        rot: &Rotation,
    ) -> Array2<f64> {
        let c_eff = params.kernel_bandlimit();
        let l = params.grid_size;
        let (kn, kw) = gauss_legendre_unit((2.5 * c_eff) as usize);
        let n_phi = (6.0 * c_eff) as usize;
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        // Slice samples on the polar grid.
        let mut slice = vec![vec![C64::new(0.0, 0.0); n_phi]; kn.len()];
        for (ri, &k) in kn.iter().enumerate() {
            for t in 0..n_phi {
                let phi = t as f64 * dphi;
                let p = rot.apply_inv([k * phi.cos(), k * phi.sin(), 0.0]);
                slice[ri][t] = x.fourier_at(params, p);
            }
        }
        let scale = c_eff * c_eff / (2.0 * std::f64::consts::PI).powi(2);
        Array2::from_shape_fn((l, l), |(i, j)| {
            let (px, py) = (pixel_coord(l, i), pixel_coord(l, j));
            let mut acc = C64::new(0.0, 0.0);
            for (ri, &k) in kn.iter().enumerate() {
                for t in 0..n_phi {
                    let phi = t as f64 * dphi;
                    let kernel =
                        C64::from_polar(1.0, -c_eff * k * (phi.cos() * px + phi.sin() * py));
                    acc += kw[ri] * k * dphi * slice[ri][t] * kernel;
                }
            }
            (scale * acc).re
        })
    }

    /// The synthesized image is supported on the inscribed disk (the
    /// prolates vanish outside it), so the oracle comparison is over disk
    /// pixels; corner pixels are checked to be exactly zero instead.
    #[test]
    fn matches_fourier_slice_oracle() {
        let (params, basis, beta) = setup(7, 2);
        let x = VolumeCoefficients::random_real(&params, 77);
        for rot in RotationGrid::uniform(3, 41).rotations.iter() {
            let got = project(&x, &beta, &basis, rot).unwrap().image;
            let want = slice_oracle_image(&x, &params, rot);
            let mut err2 = 0.0;
            let mut ref2 = 0.0;
            for i in 0..params.grid_size {
                for j in 0..params.grid_size {
                    let (px, py) = (pixel_coord(params.grid_size, i), pixel_coord(params.grid_size, j));
                    if px * px + py * py <= 1.0 {
                        err2 += (got[(i, j)] - want[(i, j)]).powi(2);
                        ref2 += want[(i, j)].powi(2);
                    } else {
                        assert_eq!(got[(i, j)], 0.0, "corner pixel ({i},{j}) not zero");
                    }
                }
            }
            let rel = (err2 / ref2).sqrt();
            assert!(rel < 0.02, "relative image error {rel:.4}");
        }
    }
}
