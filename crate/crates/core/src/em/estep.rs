//! E-step: likelihood kernels and posteriors over (shift, rotation).
//!
//! Everything runs in the log domain with a per-patch maximum subtracted
//! before exponentiation, so arbitrarily poor fits normalize cleanly. The
//! production path scores all shifts of one rotation at once with a circular
//! cross-correlation; `posterior` recomputes the same table from explicit
//! templates and serves as its oracle.

use crate::basis::pswf::PswfBasis;
use crate::basis::rotation::{Rotation, RotationGrid};
use crate::em::precompute::{visible_span, PairTransforms, PhiTable};
use crate::em::state::ShiftDistribution;
use crate::error::{Error, Result};
use crate::fft::forward_real;
use crate::forward::beta::BetaTable;
use crate::forward::coeffs::VolumeCoefficients;
use crate::forward::patch::{patch_template, zero_pad_double};
use crate::forward::project::{project_coeffs, synthesize_image};
use crate::C64;
use ndarray::{Array2, Array3};
use rayon::prelude::*;

/// Unnormalized likelihood kernel for one `(shift, rotation)` hypothesis:
/// `exp(-||patch - C T_shift Z proj||^2 / (2 sigma2))`.
pub fn patch_likelihood(
    patch: &Array2<f64>,
    shift: (usize, usize),
    omega: &Rotation,
    x: &VolumeCoefficients,
    beta: &BetaTable,
    basis: &PswfBasis,
    sigma2: f64,
) -> Result<f64> {
    let l = patch.nrows();
    if patch.ncols() != l || l != basis.grid_size {
        return Err(Error::validation(format!(
            "patch shape {:?} does not match the basis grid {}",
            patch.dim(),
            basis.grid_size
        )));
    }
    if shift.0 >= 2 * l || shift.1 >= 2 * l {
        return Err(Error::validation(format!("shift {shift:?} outside the lattice")));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::validation(format!(
            "noise variance must be positive and finite, got {sigma2}"
        )));
    }
    let coeffs = project_coeffs(x, beta, basis, omega);
    let img = synthesize_image(basis, &coeffs)?;
    let template = patch_template(&img.view(), shift);
    let d2: f64 = patch.iter().zip(template.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-d2 / (2.0 * sigma2)).exp())
}

/// Posterior over `(rotation, shift)` for one patch via explicit templates.
///
/// Output is indexed `(w, s_x, s_y)`, nonnegative, and sums to one.
pub fn posterior(
    patch: &Array2<f64>,
    x: &VolumeCoefficients,
    rho: &ShiftDistribution,
    grid: &RotationGrid,
    beta: &BetaTable,
    basis: &PswfBasis,
    sigma2: f64,
) -> Result<Array3<f64>> {
    let l = basis.grid_size;
    let side = 2 * l;
    if rho.side() != side {
        return Err(Error::validation(format!(
            "shift distribution side {} does not match the lattice side {side}",
            rho.side()
        )));
    }
    rho.validate()?;
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::validation(format!(
            "noise variance must be positive and finite, got {sigma2}"
        )));
    }
    let k = grid.len();
    let mut joint = Array3::from_elem((k, side, side), f64::NEG_INFINITY);
    for (w, rot) in grid.rotations.iter().enumerate() {
        let coeffs = project_coeffs(x, beta, basis, rot);
        let img = synthesize_image(basis, &coeffs)?;
        for sx in 0..side {
            for sy in 0..side {
                let p = rho.rho[(sx, sy)];
                if p == 0.0 {
                    continue;
                }
                let template = patch_template(&img.view(), (sx, sy));
                let d2: f64 =
                    patch.iter().zip(template.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                joint[(w, sx, sy)] = -d2 / (2.0 * sigma2) + p.ln();
            }
        }
    }
    let mx = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(mx.is_finite(), "shift prior has no support");
    let mut out = joint.mapv(|v| (v - mx).exp());
    let total: f64 = out.iter().sum();
    out.mapv_inplace(|v| v / total);
    Ok(out)
}

/// Projection templates for every grid rotation at the current volume, with
/// the transforms the correlation E-step needs.
pub struct TemplateBank {
    pub images: Vec<Array2<f64>>,
    /// Forward DFT of each zero-padded template.
    pub fpad: Vec<Array2<C64>>,
    /// Windowed template energy per shift: `energy[w][(s_x, s_y)]` is the
    /// squared norm of the cropped shifted template.
    pub energy: Vec<Array2<f64>>,
}

impl TemplateBank {
    pub fn build(
        tr: &PairTransforms,
        phi: &PhiTable,
        basis: &PswfBasis,
        x: &VolumeCoefficients,
    ) -> Result<Self> {
        let l = tr.l;
        let side = 2 * l;
        let spans: Vec<_> = (0..side).map(|s| visible_span(s, l)).collect();
        let per_rot: Vec<(Array2<f64>, Array2<C64>, Array2<f64>)> = (0..phi.rotation_count())
            .into_par_iter()
            .map(|w| {
                let img = synthesize_image(basis, &phi.project(w, x))?;
                let fpad = forward_real(&tr.fft, &zero_pad_double(&img.view()));
                // Prefix table of the squared image; block sums of empty
                // ranges cancel exactly, so cross shifts get energy 0.
                let mut prefix = Array2::<f64>::zeros((l + 1, l + 1));
                for u in 0..l {
                    for v in 0..l {
                        prefix[(u + 1, v + 1)] = prefix[(u, v + 1)] + prefix[(u + 1, v)]
                            - prefix[(u, v)]
                            + img[(u, v)] * img[(u, v)];
                    }
                }
                let energy = Array2::from_shape_fn((side, side), |(sx, sy)| {
                    let (r, c) = (&spans[sx], &spans[sy]);
                    prefix[(r.end, c.end)] - prefix[(r.start, c.end)] - prefix[(r.end, c.start)]
                        + prefix[(r.start, c.start)]
                });
                Ok((img, fpad, energy))
            })
            .collect::<Result<_>>()?;
        let mut images = Vec::with_capacity(per_rot.len());
        let mut fpad = Vec::with_capacity(per_rot.len());
        let mut energy = Vec::with_capacity(per_rot.len());
        for (i, f, e) in per_rot {
            images.push(i);
            fpad.push(f);
            energy.push(e);
        }
        Ok(TemplateBank { images, fpad, energy })
    }
}

/// Log of the shift prior, with zero-mass entries at negative infinity.
pub(crate) fn lnrho_table(rho: &ShiftDistribution) -> Array2<f64> {
    rho.rho.mapv(|v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
}

/// Posterior table and scalar diagnostics for one patch.
pub(crate) struct PatchEval {
    /// True posterior, indexed `(w, s_x, s_y)`; sums to one.
    pub post: Array3<f64>,
    /// Surrogate objective contribution: expected complete-data
    /// log-probability under the posterior, with the likelihood table
    /// normalized per patch.
    pub q: f64,
    /// Marginal log-likelihood of the patch under the current model.
    pub loglik: f64,
}

/// Correlation-based E-step for one patch. `fzp` is the forward DFT of the
/// zero-padded patch and `norm2` its squared Frobenius norm.
pub(crate) fn eval_patch(
    tr: &PairTransforms,
    bank: &TemplateBank,
    fzp: &Array2<C64>,
    norm2: f64,
    lnrho: &Array2<f64>,
    sigma2: f64,
) -> PatchEval {
    let side = 2 * tr.l;
    let k = bank.fpad.len();
    let inv2s = 1.0 / (2.0 * sigma2);
    let mut loglike = Array3::<f64>::zeros((k, side, side));
    let mut buf = Array2::<C64>::zeros((side, side));
    let mut max_like = f64::NEG_INFINITY;
    let mut max_joint = f64::NEG_INFINITY;
    for w in 0..k {
        let fp = &bank.fpad[w];
        for (b, (z, t)) in buf.iter_mut().zip(fzp.iter().zip(fp.iter())) {
            *b = z.conj() * t;
        }
        tr.fft.inverse(&mut buf);
        let energy = &bank.energy[w];
        for sx in 0..side {
            for sy in 0..side {
                let corr = buf[(sx, sy)].re;
                let a = (2.0 * corr - energy[(sx, sy)] - norm2) * inv2s;
                loglike[(w, sx, sy)] = a;
                if a > max_like {
                    max_like = a;
                }
                let j = a + lnrho[(sx, sy)];
                if j > max_joint {
                    max_joint = j;
                }
            }
        }
    }
    debug_assert!(max_joint.is_finite(), "shift prior has no support");
    let mut post = Array3::<f64>::zeros((k, side, side));
    let mut z_like = 0.0;
    let mut z_joint = 0.0;
    let mut weighted = 0.0;
    for w in 0..k {
        for sx in 0..side {
            for sy in 0..side {
                let a = loglike[(w, sx, sy)];
                z_like += (a - max_like).exp();
                let lr = lnrho[(sx, sy)];
                if lr == f64::NEG_INFINITY {
                    continue;
                }
                let r = (a + lr - max_joint).exp();
                post[(w, sx, sy)] = r;
                weighted += r * (a + lr);
                z_joint += r;
            }
        }
    }
    post.mapv_inplace(|v| v / z_joint);
    let lse_like = max_like + z_like.ln();
    let q = weighted / z_joint - lse_like;
    let l2 = (tr.l * tr.l) as f64;
    let loglik = max_joint + z_joint.ln()
        - (k as f64).ln()
        - 0.5 * l2 * (2.0 * std::f64::consts::PI * sigma2).ln();
    PatchEval { post, q, loglik }
}

/// Convenience wrapper: full correlation E-step from the raw patch.
pub(crate) fn eval_patch_image(
    tr: &PairTransforms,
    bank: &TemplateBank,
    patch: &Array2<f64>,
    lnrho: &Array2<f64>,
    sigma2: f64,
) -> PatchEval {
    let fzp = forward_real(&tr.fft, &zero_pad_double(&patch.view()));
    let norm2 = patch.iter().map(|v| v * v).sum();
    eval_patch(tr, bank, &fzp, norm2, lnrho, sigma2)
}
