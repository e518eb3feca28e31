//! Bandlimited prolate basis on the unit disk.
//!
//! For kernel bandlimit `c` the operator `(F_c g)(xi) = integral over the
//! unit disk of g(x) exp(i c <x, xi>) dx` is compact and normal; its
//! eigenfunctions `psi_{N,n}(r, phi) = (1/sqrt(8 pi)) alpha_{N,n} R_{N,n}(r)
//! exp(i N phi)` are the natural expansion images supported on the disk, and
//! the eigenvalue relation `F_c psi = alpha psi` is what makes tomographic
//! projection a finite linear map onto this basis.
//!
//! Construction is spectral: for each angular index `N` the radial part is
//! expanded in orthonormalized Zernike polynomials, where the commuting
//! second-order differential operator is an explicit symmetric matrix
//! (diagonal plus a bandlimit coupling through `r^2`). Diagonalizing that
//! matrix gives the radial functions to machine precision; the integral
//! eigenvalue `gamma` then comes from a Hankel-transform quadrature and fixes
//! `alpha = 2 pi i^N gamma`.

use super::bessel::bessel_jn_all;
use super::params::BandlimitParams;
use super::quadrature::gauss_legendre_unit;
use super::zernike::zernike_radial_all;
use crate::error::{Error, Result};
use crate::C64;
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

/// Zernike expansion length per angular index; generous past the bandlimit
/// so retained prolates are converged to machine precision.
pub(crate) fn zernike_basis_size(c_eff: f64) -> usize {
    c_eff.ceil() as usize + 32
}

/// One radial eigenfunction in the orthonormalized Zernike basis.
#[derive(Debug, Clone)]
pub(crate) struct RadialProlate {
    /// Eigenvalue of the commuting differential operator; sorts the family.
    pub chi: f64,
    /// Eigenvalue of the order-`N` Hankel kernel `integral_0^1 R(r)
    /// J_N(c r k) r dr = gamma R(k)`.
    pub gamma: f64,
    /// Unit-norm coefficients against `sqrt(2(N+2j+1)) R^N_{N+2j}`.
    pub coeffs: Vec<f64>,
}

pub(crate) fn radial_prolates(n_ang: usize, c_eff: f64) -> Vec<RadialProlate> {
    radial_prolates_with_basis(n_ang, c_eff, zernike_basis_size(c_eff))
}

pub(crate) fn radial_prolates_with_basis(
    n_ang: usize,
    c_eff: f64,
    j_basis: usize,
) -> Vec<RadialProlate> {
    // Norm factors turning R^N_{N+2j} into an orthonormal family in
    // L^2([0,1], r dr).
    let norms: Vec<f64> = (0..j_basis)
        .map(|j| (2.0 * (n_ang + 2 * j) as f64 + 2.0).sqrt())
        .collect();

    // Coupling matrix T_{jk} = <r^2 Qhat_j, Qhat_k>; the integrand is a
    // polynomial of degree 2 n_ang + 4 (j_basis - 1) + 3, integrated exactly.
    let n_t = 2 * j_basis + n_ang + 16;
    let (tn, tw) = gauss_legendre_unit(n_t);
    let mut t = DMatrix::<f64>::zeros(j_basis, j_basis);
    for (&r, &w) in tn.iter().zip(&tw) {
        let q = zernike_radial_all(n_ang, j_basis, r);
        let f = w * r * r * r;
        for j in 0..j_basis {
            let qj = norms[j] * q[j];
            for k in j..j_basis {
                t[(j, k)] += f * qj * norms[k] * q[k];
            }
        }
    }
    for j in 0..j_basis {
        for k in 0..j {
            t[(j, k)] = t[(k, j)];
        }
    }

    // Galerkin matrix of L_c = L_0 - c^2 r^2; L_0 is diagonal here.
    let mut m = -c_eff * c_eff * t;
    for j in 0..j_basis {
        let d = (n_ang + 2 * j) as f64;
        m[(j, j)] -= d * (d + 2.0);
    }
    let eig = SymmetricEigen::new(m);

    // Quadrature for the Hankel eigenvalue: R is a polynomial of degree
    // n_ang + 2 (j_basis - 1) and the transformed side is bandlimited by c.
    let n_g = j_basis + n_ang + c_eff.ceil() as usize + 16;
    let (gn, gw) = gauss_legendre_unit(n_g);
    let bessel_top = n_ang + 2 * (j_basis - 1) + 1;
    // Per node: Qhat_j(k) and the transformed images
    // h_j(k) = norm_j (-1)^j J_{n_ang+2j+1}(c k) / (c k).
    let mut qhat = vec![vec![0.0; j_basis]; n_g];
    let mut hvals = vec![vec![0.0; j_basis]; n_g];
    for (qi, &k) in gn.iter().enumerate() {
        let q = zernike_radial_all(n_ang, j_basis, k);
        let x = c_eff * k;
        let jt = bessel_jn_all(bessel_top, x);
        for j in 0..j_basis {
            qhat[qi][j] = norms[j] * q[j];
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            hvals[qi][j] = norms[j] * sign * jt[n_ang + 2 * j + 1] / x;
        }
    }

    let mut out = Vec::with_capacity(j_basis);
    for col in 0..j_basis {
        let mut a: Vec<f64> = (0..j_basis).map(|j| eig.eigenvectors[(j, col)]).collect();
        // Deterministic sign: largest-magnitude coefficient positive.
        let imax = (0..j_basis)
            .max_by(|&p, &q| a[p].abs().partial_cmp(&a[q].abs()).unwrap())
            .unwrap();
        if a[imax] < 0.0 {
            for v in a.iter_mut() {
                *v = -*v;
            }
        }
        let mut gamma = 0.0;
        for qi in 0..n_g {
            let mut rv = 0.0;
            let mut hv = 0.0;
            for j in 0..j_basis {
                rv += a[j] * qhat[qi][j];
                hv += a[j] * hvals[qi][j];
            }
            gamma += gw[qi] * gn[qi] * rv * hv;
        }
        out.push(RadialProlate {
            chi: -eig.eigenvalues[col],
            gamma,
            coeffs: a,
        });
    }
    // Ascending chi orders the family from most concentrated (largest
    // |gamma|) outward; n indexes that order.
    out.sort_by(|a, b| a.chi.partial_cmp(&b.chi).unwrap());
    out
}

/// Number of radial functions per angular index with relative eigenvalue
/// energy `|gamma_{N,n}|^2 / |gamma_{0,0}|^2` at or above `threshold`; the
/// table stops at the first empty angular index.
pub(crate) fn significant_radial_counts(c_eff: f64, threshold: f64) -> Vec<usize> {
    let cap = (2.0 * c_eff).ceil() as usize + 16;
    let mut counts = Vec::new();
    let mut gamma00 = 0.0f64;
    for n_ang in 0..=cap {
        let pros = radial_prolates(n_ang, c_eff);
        if n_ang == 0 {
            gamma00 = pros[0].gamma.abs();
            assert!(gamma00 > 0.0, "leading prolate eigenvalue vanished");
        }
        let count = pros
            .iter()
            .take_while(|p| (p.gamma / gamma00).powi(2) >= threshold)
            .count();
        if count == 0 {
            break;
        }
        counts.push(count);
    }
    debug_assert!(!counts.is_empty());
    counts
}

/// Maps array index `i` on an `L`-pixel axis to the disk coordinate
/// `(i - (L-1)/2) / (L/2)`; pixel centers fill `(-1, 1)`.
pub fn pixel_coord(grid_size: usize, i: usize) -> f64 {
    let l = grid_size as f64;
    (i as f64 - (l - 1.0) / 2.0) / (l / 2.0)
}

/// Angular/radial index of one basis function; `n_ang` ranges over negative
/// values too, with `psi_{-N,n} = conj(psi_{N,n})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PswfPair {
    pub n_ang: i32,
    pub n_rad: usize,
}

/// The sampled disk prolate basis for one `BandlimitParams`.
///
/// Radial data are stored once per `|N|`; the pair list and the sampled
/// images cover signed angular indices in the canonical order `N = -N_max,
/// ..., N_max` with radial index ascending inside each block.
#[derive(Debug, Clone)]
pub struct PswfBasis {
    pub c_eff: f64,
    pub grid_size: usize,
    pub truncation: f64,
    /// Retained radial count per `|N|`.
    pub radial_counts: Vec<usize>,
    pub pairs: Vec<PswfPair>,
    /// `alpha_{N,n} = 2 pi i^{|N|} gamma_{|N|,n}` per pair; equal for `+-N`.
    pub alpha: Vec<C64>,
    /// Gauss-Legendre nodes/weights on `[0,1]` shared by all radial
    /// integrals downstream.
    pub quad_nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
    /// `R_{|N|,n}` at the quadrature nodes, indexed by [`Self::radial_index`];
    /// normalized so the squared `L^2(r dr)` norm is `4 / |alpha|^2`.
    pub radial_samples: Vec<Vec<f64>>,
    /// Zernike coefficients of the same functions, for off-grid evaluation.
    pub(crate) radial_coeffs: Vec<Vec<f64>>,
    /// `psi` sampled on the pixel grid, one `L x L` image per pair; exactly
    /// zero outside the inscribed disk.
    pub psi: Vec<Array2<C64>>,
    /// Start of each signed angular block in `pairs`, indexed by `N + N_max`.
    pub(crate) pair_offsets: Vec<usize>,
    /// Start of each `|N|` block in the radial stores.
    pub(crate) radial_offsets: Vec<usize>,
}

impl PswfBasis {
    pub fn build(params: &BandlimitParams) -> Result<Self> {
        let c_eff = params.kernel_bandlimit();
        let counts = params.pswf_radial_counts.clone();
        if counts.is_empty() {
            return Err(Error::validation(
                "prolate truncation table is empty".to_string(),
            ));
        }
        let (quad_nodes, quad_weights) = gauss_legendre_unit(params.radial_quad_order());
        let n_max = counts.len() - 1;
        let l = params.grid_size;

        let mut radial_offsets = Vec::with_capacity(counts.len());
        let mut radial_samples = Vec::new();
        let mut radial_coeffs = Vec::new();
        let mut alpha_abs = Vec::new();
        let mut acc = 0usize;
        for (n_ang, &cnt) in counts.iter().enumerate() {
            radial_offsets.push(acc);
            acc += cnt;
            let pros = radial_prolates(n_ang, c_eff);
            if pros.len() < cnt {
                return Err(Error::numerical(format!(
                    "prolate basis too small for angular index {n_ang}"
                )));
            }
            for p in pros.iter().take(cnt) {
                let alpha_mag = 2.0 * std::f64::consts::PI * p.gamma.abs();
                if alpha_mag == 0.0 {
                    return Err(Error::numerical(format!(
                        "vanishing prolate eigenvalue at angular index {n_ang}"
                    )));
                }
                // Rescale so ||R||^2 = 4 / |alpha|^2, the normalization that
                // makes |psi| = |R exp(i N phi)| / sqrt(8 pi) unit-norm.
                let scale = 2.0 / alpha_mag;
                let coeffs: Vec<f64> = p.coeffs.iter().map(|&a| a * scale).collect();
                let samples: Vec<f64> = quad_nodes
                    .iter()
                    .map(|&r| eval_zernike_series(n_ang, &coeffs, r))
                    .collect();
                let phase = match n_ang % 4 {
                    0 => C64::new(1.0, 0.0),
                    1 => C64::new(0.0, 1.0),
                    2 => C64::new(-1.0, 0.0),
                    _ => C64::new(0.0, -1.0),
                };
                alpha_abs.push(2.0 * std::f64::consts::PI * p.gamma * phase);
                radial_samples.push(samples);
                radial_coeffs.push(coeffs);
            }
        }

        // Signed pair order: N ascending from -n_max, radial index ascending.
        let mut pairs = Vec::new();
        let mut pair_offsets = Vec::with_capacity(2 * n_max + 1);
        for sn in -(n_max as i32)..=(n_max as i32) {
            pair_offsets.push(pairs.len());
            for n_rad in 0..counts[sn.unsigned_abs() as usize] {
                pairs.push(PswfPair { n_ang: sn, n_rad });
            }
        }

        let mut basis = PswfBasis {
            c_eff,
            grid_size: l,
            truncation: params.pswf_truncation,
            radial_counts: counts,
            pairs,
            alpha: Vec::new(),
            quad_nodes,
            quad_weights,
            radial_samples,
            radial_coeffs,
            psi: Vec::new(),
            pair_offsets,
            radial_offsets,
        };

        // alpha per signed pair, then sampled images; negative angular
        // indices are exact conjugates of their positive partners.
        basis.alpha = basis
            .pairs
            .iter()
            .map(|p| alpha_abs[basis.radial_index(p.n_ang.unsigned_abs() as usize, p.n_rad)])
            .collect();
        let mut psi = Vec::with_capacity(basis.pairs.len());
        for (k, p) in basis.pairs.iter().enumerate() {
            if p.n_ang < 0 {
                let pos = basis.pair_index(-p.n_ang, p.n_rad);
                debug_assert!(pos > k);
                psi.push(Array2::zeros((l, l)));
                continue;
            }
            let mut img = Array2::<C64>::zeros((l, l));
            for i in 0..l {
                let x = pixel_coord(l, i);
                for j in 0..l {
                    let y = pixel_coord(l, j);
                    let r = x.hypot(y);
                    if r <= 1.0 {
                        img[(i, j)] = basis.eval_inside(k, r, y.atan2(x));
                    }
                }
            }
            psi.push(img);
        }
        for k in 0..basis.pairs.len() {
            if basis.pairs[k].n_ang < 0 {
                let pos = basis.pair_index(-basis.pairs[k].n_ang, basis.pairs[k].n_rad);
                psi[k] = psi[pos].mapv(|v| v.conj());
            }
        }
        basis.psi = psi;
        Ok(basis)
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn n_max(&self) -> i32 {
        (self.radial_counts.len() - 1) as i32
    }

    /// Flat index of the signed pair `(N, n)`.
    pub fn pair_index(&self, n_ang: i32, n_rad: usize) -> usize {
        let block = (n_ang + self.n_max()) as usize;
        let idx = self.pair_offsets[block] + n_rad;
        debug_assert_eq!(self.pairs[idx], PswfPair { n_ang, n_rad });
        idx
    }

    /// Flat index into the radial stores for `(|N|, n)`.
    pub fn radial_index(&self, n_abs: usize, n_rad: usize) -> usize {
        debug_assert!(n_rad < self.radial_counts[n_abs]);
        self.radial_offsets[n_abs] + n_rad
    }

    /// `R_{|N|,n}(r)` for any `r` in `[0, 1]`.
    pub fn eval_radial(&self, n_abs: usize, n_rad: usize, r: f64) -> f64 {
        eval_zernike_series(n_abs, &self.radial_coeffs[self.radial_index(n_abs, n_rad)], r)
    }

    /// `psi` at a point of the plane (zero outside the unit disk).
    pub fn eval(&self, pair: usize, r: f64, phi: f64) -> C64 {
        if r > 1.0 {
            return C64::new(0.0, 0.0);
        }
        self.eval_inside(pair, r, phi)
    }

    fn eval_inside(&self, pair: usize, r: f64, phi: f64) -> C64 {
        let p = self.pairs[pair];
        let n_abs = p.n_ang.unsigned_abs() as usize;
        let radial = self.eval_radial(n_abs, p.n_rad, r);
        let angular = C64::from_polar(1.0, p.n_ang as f64 * phi);
        let norm = 1.0 / (8.0 * std::f64::consts::PI).sqrt();
        // The synthesis prefactor carries the signed angular index:
        // psi_{-N} = conj(psi_N) has prefactor conj(alpha), while the F_c
        // eigenvalue stays alpha for both signs.
        let pref = if p.n_ang >= 0 { self.alpha[pair] } else { self.alpha[pair].conj() };
        norm * pref * radial * angular
    }

    pub fn psi_image(&self, pair: usize) -> &Array2<C64> {
        &self.psi[pair]
    }

    /// Radial inner product `integral_0^1 f(r) R_{|N|,n}(r) r dr` against
    /// samples of `f` on the shared quadrature grid.
    pub fn radial_dot(&self, n_abs: usize, n_rad: usize, f_at_nodes: &[f64]) -> f64 {
        let r = &self.radial_samples[self.radial_index(n_abs, n_rad)];
        self.quad_nodes
            .iter()
            .zip(&self.quad_weights)
            .zip(r.iter().zip(f_at_nodes))
            .map(|((&k, &w), (&rv, &fv))| w * k * rv * fv)
            .sum()
    }
}

fn eval_zernike_series(n_ang: usize, coeffs: &[f64], r: f64) -> f64 {
    let q = zernike_radial_all(n_ang, coeffs.len(), r);
    coeffs
        .iter()
        .enumerate()
        .map(|(j, &a)| a * (2.0 * (n_ang + 2 * j) as f64 + 2.0).sqrt() * q[j])
        .sum()
}
