//! Global alignment of a reconstructed volume to a reference.
//!
//! Reconstruction is identified only up to a rotation, a reflection, and a
//! translation, so scoring first searches that group: a quasi-uniform
//! rotation grid crossed with both reflection branches, best integer
//! translation per candidate read off a cross-correlation volume, then
//! coordinate-wise golden-section refinement of the rotation.

use crate::basis::rotation::{Rotation, RotationGrid};
use crate::error::{Error, Result};
use crate::fft::{forward_real_3, Fft3};
use crate::C64;
use ndarray::Array3;
use rayon::prelude::*;

/// The similarity transform chosen by [`align`], applied as reflection,
/// then rotation, then cyclic translation.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub rotation: Rotation,
    pub reflected: bool,
    pub shift: [i64; 3],
    /// Normalized cross-correlation of the aligned estimate with the
    /// reference.
    pub correlation: f64,
}

#[derive(Debug, Clone)]
pub struct AlignOptions {
    /// Coarse rotation candidates (the identity is always included).
    pub rotations: usize,
    /// Translation search half-width in pixels per axis.
    pub max_shift: usize,
    /// Golden-section refinement sweeps over the three Euler perturbations.
    pub refine_steps: usize,
    pub seed: u64,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions { rotations: 3000, max_shift: 3, refine_steps: 20, seed: 17 }
    }
}

/// Resample a volume under a rotation about the grid center, optionally
/// composed with a point reflection; trilinear off the lattice, zero
/// outside.
pub fn rotate_volume(v: &Array3<f64>, rot: &Rotation, reflect: bool) -> Array3<f64> {
    let l = v.dim().0;
    assert_eq!(v.dim(), (l, l, l), "volume must be cubic");
    let c = (l as f64 - 1.0) / 2.0;
    let sign = if reflect { -1.0 } else { 1.0 };
    Array3::from_shape_fn((l, l, l), |(i, j, k)| {
        let p = [i as f64 - c, j as f64 - c, k as f64 - c];
        let q = rot.apply_inv(p);
        let q = [sign * q[0] + c, sign * q[1] + c, sign * q[2] + c];
        trilinear(v, q)
    })
}

fn trilinear(v: &Array3<f64>, p: [f64; 3]) -> f64 {
    let l = v.dim().0 as i64;
    let base = [p[0].floor(), p[1].floor(), p[2].floor()];
    let frac = [p[0] - base[0], p[1] - base[1], p[2] - base[2]];
    let mut acc = 0.0;
    for di in 0..2i64 {
        for dj in 0..2i64 {
            for dk in 0..2i64 {
                let (i, j, k) = (base[0] as i64 + di, base[1] as i64 + dj, base[2] as i64 + dk);
                if i < 0 || j < 0 || k < 0 || i >= l || j >= l || k >= l {
                    continue;
                }
                let w = (if di == 1 { frac[0] } else { 1.0 - frac[0] })
                    * (if dj == 1 { frac[1] } else { 1.0 - frac[1] })
                    * (if dk == 1 { frac[2] } else { 1.0 - frac[2] });
                acc += w * v[(i as usize, j as usize, k as usize)];
            }
        }
    }
    acc
}

/// Cyclically translate a volume by integer offsets.
pub fn roll_volume(v: &Array3<f64>, shift: [i64; 3]) -> Array3<f64> {
    let l = v.dim().0 as i64;
    Array3::from_shape_fn(v.dim(), |(i, j, k)| {
        let src = [
            (i as i64 - shift[0]).rem_euclid(l) as usize,
            (j as i64 - shift[1]).rem_euclid(l) as usize,
            (k as i64 - shift[2]).rem_euclid(l) as usize,
        ];
        v[(src[0], src[1], src[2])]
    })
}

fn centered(v: &Array3<f64>) -> (Array3<f64>, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c = v.mapv(|x| x - mean);
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    (c, norm)
}

/// Best (NCC, shift) of a rotated candidate against the prepared reference
/// spectrum over shifts within `max_shift` per axis.
fn best_shift_ncc(
    fft: &Fft3,
    f_truth: &Array3<C64>,
    truth_norm: f64,
    cand: &Array3<f64>,
    max_shift: i64,
) -> (f64, [i64; 3]) {
    let l = cand.dim().0;
    let (cc, cnorm) = centered(cand);
    if cnorm == 0.0 || truth_norm == 0.0 {
        return (0.0, [0, 0, 0]);
    }
    let mut x = cc.mapv(|v| C64::new(v, 0.0));
    fft.forward(&mut x);
    for (xv, tv) in x.iter_mut().zip(f_truth.iter()) {
        *xv = xv.conj() * tv;
    }
    fft.inverse(&mut x);
    // x[t] now holds sum_r cand(r) truth(r + t); rolling the candidate by s
    // scores x[s].
    let mut best = (f64::NEG_INFINITY, [0i64, 0, 0]);
    for si in -max_shift..=max_shift {
        for sj in -max_shift..=max_shift {
            for sk in -max_shift..=max_shift {
                let idx = (
                    si.rem_euclid(l as i64) as usize,
                    sj.rem_euclid(l as i64) as usize,
                    sk.rem_euclid(l as i64) as usize,
                );
                let ncc = x[idx].re / (cnorm * truth_norm);
                if ncc > best.0 {
                    best = (ncc, [si, sj, sk]);
                }
            }
        }
    }
    best
}

/// Align `est` to `truth`, returning the transformed estimate and the
/// transform that produced it.
pub fn align(est: &Array3<f64>, truth: &Array3<f64>, opts: &AlignOptions) -> Result<(Array3<f64>, Alignment)> {
    let l = est.dim().0;
    if est.dim() != (l, l, l) || truth.dim() != (l, l, l) {
        return Err(Error::validation(format!(
            "volumes must be cubic and equal sized, got {:?} and {:?}",
            est.dim(),
            truth.dim()
        )));
    }
    if opts.rotations == 0 {
        return Err(Error::validation("rotation search needs candidates".to_string()));
    }
    let fft = Fft3::new(l);
    let (truth_c, truth_norm) = centered(truth);
    if truth_norm == 0.0 {
        return Err(Error::validation("reference volume is constant".to_string()));
    }
    let f_truth = forward_real_3(&fft, &truth_c);
    let max_shift = opts.max_shift.min(l / 2) as i64;

    let evaluate = |rot: &Rotation, reflect: bool| -> (f64, [i64; 3]) {
        let cand = rotate_volume(est, rot, reflect);
        best_shift_ncc(&fft, &f_truth, truth_norm, &cand, max_shift)
    };

    let grid = RotationGrid::uniform_with_identity(opts.rotations, opts.seed);
    let scores: Vec<(f64, [i64; 3])> = grid
        .rotations
        .par_iter()
        .flat_map_iter(|rot| [false, true].map(|refl| evaluate(rot, refl)))
        .collect();
    let mut best_idx = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.0 > scores[best_idx].0 {
            best_idx = i;
        }
    }
    let mut best_rot = grid.rotations[best_idx / 2];
    let best_refl = best_idx % 2 == 1;
    let (mut best_ncc, mut best_shift) = scores[best_idx];

    // Coordinate-wise golden-section sweeps over left-multiplied (global
    // frame) perturbations. The cycle must cover all three generators:
    // sweeping only z and y leaves descent free to stall with the entire
    // residual gradient along x. The bracket halves only after a cycle that
    // brought no improvement, so coupled axes can keep trading progress at
    // one scale.
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let mut delta = 0.5f64;
    let mut cycle_improved = false;
    for step in 0..opts.refine_steps {
        let axis = step % 3;
        let perturb = |theta: f64| -> Rotation {
            let half = theta / 2.0;
            let p = match axis {
                0 => Rotation::about_z(theta),
                1 => Rotation::about_y(theta),
                _ => Rotation::from_quaternion([half.cos(), half.sin(), 0.0, 0.0]),
            };
            p * best_rot
        };
        let (mut lo, mut hi) = (-delta, delta);
        let mut m1 = hi - golden * (hi - lo);
        let mut m2 = lo + golden * (hi - lo);
        let mut f1 = evaluate(&perturb(m1), best_refl);
        let mut f2 = evaluate(&perturb(m2), best_refl);
        for _ in 0..12 {
            if f1.0 >= f2.0 {
                hi = m2;
                m2 = m1;
                f2 = f1;
                m1 = hi - golden * (hi - lo);
                f1 = evaluate(&perturb(m1), best_refl);
            } else {
                lo = m1;
                m1 = m2;
                f1 = f2;
                m2 = lo + golden * (hi - lo);
                f2 = evaluate(&perturb(m2), best_refl);
            }
        }
        let (theta, score) = if f1.0 >= f2.0 { (m1, f1) } else { (m2, f2) };
        if score.0 > best_ncc {
            best_ncc = score.0;
            best_shift = score.1;
            best_rot = perturb(theta);
            cycle_improved = true;
        }
        if axis == 2 {
            if !cycle_improved {
                delta *= 0.5;
            }
            cycle_improved = false;
        }
    }

    let aligned = roll_volume(&rotate_volume(est, &best_rot, best_refl), best_shift);
    Ok((
        aligned,
        Alignment {
            rotation: best_rot,
            reflected: best_refl,
            shift: best_shift,
            correlation: best_ncc,
        },
    ))
}
