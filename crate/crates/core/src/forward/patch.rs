//! The patch former: zero-pad, circular shift, crop.
//!
//! A micrograph cut into `L x L` tiles shows each projection at an unknown
//! offset, possibly hanging over the tile edge. On a doubled `2L x 2L`
//! canvas every such truncated view is one circular shift of the zero-padded
//! projection, so the shift label lives on the `(2L)^2` torus. Shifts with
//! `s_x = L` or `s_y = L` move the content entirely into the padding: those
//! labels all map to the zero template and together represent "no particle".

use crate::error::{Error, Result};
use crate::forward::project::Projection;
use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

/// `L x L` image into the top-left corner of a `2L x 2L` zero canvas.
pub fn zero_pad_double(img: &ArrayView2<f64>) -> Array2<f64> {
    let (l, l2) = img.dim();
    assert_eq!(l, l2, "projection images are square");
    let mut out = Array2::zeros((2 * l, 2 * l));
    out.slice_mut(ndarray::s![..l, ..l]).assign(img);
    out
}

/// `out[i, j] = padded[(i + s_x) mod 2L, (j + s_y) mod 2L]` for `i, j < L`.
pub fn shift_crop(padded: &ArrayView2<f64>, shift: (usize, usize), l: usize) -> Array2<f64> {
    let n = padded.nrows();
    assert_eq!(padded.dim(), (n, n));
    assert_eq!(n, 2 * l);
    Array2::from_shape_fn((l, l), |(i, j)| {
        padded[((i + shift.0) % n, (j + shift.1) % n)]
    })
}

/// The full patch template `C T_s Z I` for one projection image and shift.
pub fn patch_template(img: &ArrayView2<f64>, shift: (usize, usize)) -> Array2<f64> {
    let l = img.nrows();
    let padded = zero_pad_double(img);
    shift_crop(&padded.view(), shift, l)
}

/// True when the shift lies on the zero cross (no content visible).
pub fn is_empty_shift(shift: (usize, usize), l: usize) -> bool {
    shift.0 == l || shift.1 == l
}

/// One simulated patch: the shifted template plus white Gaussian noise.
///
/// `sigma2 = 0` returns the template itself.
pub fn make_patch(
    proj: &Projection,
    shift: (usize, usize),
    sigma2: f64,
    seed: u64,
) -> Result<Array2<f64>> {
    let l = proj.image.nrows();
    if shift.0 >= 2 * l || shift.1 >= 2 * l {
        return Err(Error::validation(format!(
            "shift {shift:?} outside the {0} x {0} shift lattice",
            2 * l
        )));
    }
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::validation(format!(
            "noise variance must be finite and nonnegative, got {sigma2}"
        )));
    }
    let mut patch = patch_template(&proj.image.view(), shift);
    if sigma2 > 0.0 {
        let sigma = sigma2.sqrt();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for v in patch.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * z;
        }
    }
    Ok(patch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_image(l: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Array2::from_shape_fn((l, l), |_| rng.gen::<f64>() - 0.5)
    }

    #[test]
    fn zero_shift_is_identity() {
        let img = random_image(5, 1);
        let t = patch_template(&img.view(), (0, 0));
        assert_eq!(t, img);
    }

    #[test]
    fn cross_shifts_give_zero_templates() {
        let l = 5;
        let img = random_image(l, 2);
        for s in 0..2 * l {
            let a = patch_template(&img.view(), (l, s));
            let b = patch_template(&img.view(), (s, l));
            assert!(a.iter().all(|&v| v == 0.0), "s_x = L, s_y = {s}");
            assert!(b.iter().all(|&v| v == 0.0), "s_x = {s}, s_y = L");
        }
    }

    #[test]
    fn small_shift_truncates_bottom_right() {
        // Shifting by (2, 3) exposes img[2.., 3..] in the top-left of the
        // patch and zero elsewhere.
        let l = 5;
        let img = random_image(l, 3);
        let t = patch_template(&img.view(), (2, 3));
        for i in 0..l {
            for j in 0..l {
                let want = if i + 2 < l && j + 3 < l { img[(i + 2, j + 3)] } else { 0.0 };
                assert_eq!(t[(i, j)], want);
            }
        }
    }

    #[test]
    fn large_shift_wraps_content_to_the_far_edge() {
        // Shift s_x in (L, 2L) wraps rows of the image into the bottom of
        // the patch: the view of a particle hanging over the tile's top edge.
        let l = 5;
        let img = random_image(l, 4);
        let sx = l + 2;
        let t = patch_template(&img.view(), (sx, 0));
        for i in 0..l {
            for j in 0..l {
                let src = (i + sx) % (2 * l);
                let want = if src < l { img[(src, j)] } else { 0.0 };
                assert_eq!(t[(i, j)], want);
            }
        }
        assert!(t.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn noiseless_patches_reproduce_the_template_cases() {
        use crate::forward::project::Projection;
        let l = 5;
        let img = random_image(l, 6);
        let proj = Projection { coeffs: vec![], image: img.clone() };
        let at_origin = make_patch(&proj, (0, 0), 0.0, 0).unwrap();
        assert_eq!(at_origin, img);
        let hidden = make_patch(&proj, (l, l), 0.0, 0).unwrap();
        assert!(hidden.iter().all(|&v| v == 0.0));
        // Dense reference: roll the padded canvas, then crop.
        let shift = (3, 5);
        let padded = zero_pad_double(&img.view());
        let n = 2 * l;
        let mut rolled = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                rolled[(i, j)] = padded[((i + shift.0) % n, (j + shift.1) % n)];
            }
        }
        let got = make_patch(&proj, shift, 0.0, 0).unwrap();
        for i in 0..l {
            for j in 0..l {
                assert_eq!(got[(i, j)], rolled[(i, j)]);
            }
        }
        assert!(make_patch(&proj, (2 * l, 0), 0.0, 0).is_err());
        assert!(make_patch(&proj, (0, 0), -1.0, 0).is_err());
    }

    #[test]
    fn patch_noise_is_seeded_and_scaled() {
        let l = 6;
        let img = random_image(l, 7);
        let proj = crate::forward::project::Projection { coeffs: vec![], image: img.clone() };
        let a = make_patch(&proj, (1, 2), 0.25, 9).unwrap();
        let b = make_patch(&proj, (1, 2), 0.25, 9).unwrap();
        assert_eq!(a, b);
        let c = make_patch(&proj, (1, 2), 0.25, 10).unwrap();
        assert_ne!(a, c);
        let template = patch_template(&img.view(), (1, 2));
        let resid: f64 =
            a.iter().zip(template.iter()).map(|(x, t)| (x - t) * (x - t)).sum::<f64>()
                / (l * l) as f64;
        // 36 samples of variance 0.25: crude sanity bound, not a CLT test.
        assert!(resid > 0.05 && resid < 0.8, "residual variance {resid}");
    }

    #[test]
    fn templates_partition_image_energy() {
        // Over the non-empty shift grid, each image pixel appears in exactly
        // L^2 templates (once per aligned crop window), so summed template
        // energy equals L^2 times image energy.
        let l = 4;
        let img = random_image(l, 5);
        let mut total = 0.0;
        for sx in 0..2 * l {
            for sy in 0..2 * l {
                total += patch_template(&img.view(), (sx, sy))
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>();
            }
        }
        let energy: f64 = img.iter().map(|v| v * v).sum();
        assert!((total - (l * l) as f64 * energy).abs() < 1e-10 * total);
    }
}
