//! Coupling table between the volume basis and the disk prolate basis.
//!
//! A central slice of one volume basis function through the equatorial
//! plane is `g(k, phi) = j_{l,s}(k) Y_l^m(pi/2, phi)` on the unit disk. The
//! bandlimited image with that Fourier data, restricted to the disk, has
//! prolate coefficients `<I, psi_{N,n}> = (c/2pi)^2 conj(alpha_{N,n})
//! <g, psi_{N,n}>`; reducing the angular integral leaves
//!
//! `beta_{l,s;N,n} = (c/2pi)^2 sqrt(pi/2) (-1)^N |alpha_{N,n}|^2
//!     Y_l^N(pi/2, 0) integral_0^1 j_{l,s}(k) R_{N,n}(k) k dk`
//!
//! for `N = m >= 0` (the `(-1)^N` is `conj(alpha)^2 / |alpha|^2`). The value
//! depends only on `(l, s, |m|, n)`: real, equal for `+-N`, zero for
//! `l < |N|`, and zero when `l + N` is odd (the equatorial harmonic
//! vanishes), which is what keeps synthesized projections real. General
//! orientations enter later purely through Wigner-D mixing of `m`.

use super::coeffs::normalized_radial;
use crate::basis::harmonics::sph_harmonic_equator;
use crate::basis::{BandlimitParams, PswfBasis};
use crate::error::Result;
use ndarray::Array2;

#[derive(Debug, Clone)]
pub struct BetaTable {
    pub ell_max: usize,
    pub s_of_ell: Vec<usize>,
    pub radial_counts: Vec<usize>,
    /// `values[l][n_abs]` has shape `(s_of_ell[l], radial_counts[n_abs])`;
    /// blocks with `l < n_abs` are all zero.
    values: Vec<Vec<Array2<f64>>>,
}

impl BetaTable {
    pub fn build(params: &BandlimitParams, basis: &PswfBasis) -> Result<Self> {
        Self::build_with_quad(params, basis, &basis.quad_nodes, &basis.quad_weights)
    }

    /// Same table with a caller-supplied radial quadrature; used to verify
    /// that the default rule is converged.
    pub fn build_with_quad(
        params: &BandlimitParams,
        basis: &PswfBasis,
        nodes: &[f64],
        weights: &[f64],
    ) -> Result<Self> {
        let c_eff = params.kernel_bandlimit();
        let pref_global = (c_eff / (2.0 * std::f64::consts::PI)).powi(2)
            * (std::f64::consts::PI / 2.0).sqrt();
        let n_max = basis.radial_counts.len() - 1;
        // Prolate radial samples at the supplied nodes.
        let mut r_samples: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n_max + 1);
        for n_abs in 0..=n_max {
            let mut per_n = Vec::with_capacity(basis.radial_counts[n_abs]);
            for n_rad in 0..basis.radial_counts[n_abs] {
                per_n.push(
                    nodes
                        .iter()
                        .map(|&k| basis.eval_radial(n_abs, n_rad, k))
                        .collect(),
                );
            }
            r_samples.push(per_n);
        }
        let mut values = Vec::with_capacity(params.ell_max + 1);
        for l in 0..=params.ell_max {
            let s_count = params.s_of_ell[l];
            // j_{l,s} at the nodes, reused across angular indices.
            let j_samples: Vec<Vec<f64>> = (0..s_count)
                .map(|s| {
                    nodes
                        .iter()
                        .map(|&k| normalized_radial(&params, l, s, k))
                        .collect()
                })
                .collect();
            let mut per_l = Vec::with_capacity(n_max + 1);
            for n_abs in 0..=n_max {
                let n_count = basis.radial_counts[n_abs];
                let mut block = Array2::<f64>::zeros((s_count, n_count));
                if n_abs <= l && (l + n_abs) % 2 == 0 {
                    let y_eq = sph_harmonic_equator(l, n_abs as i64);
                    let sign = if n_abs % 2 == 0 { 1.0 } else { -1.0 };
                    for s in 0..s_count {
                        for n_rad in 0..n_count {
                            let integral: f64 = nodes
                                .iter()
                                .zip(weights)
                                .zip(j_samples[s].iter().zip(&r_samples[n_abs][n_rad]))
                                .map(|((&k, &w), (&jv, &rv))| w * k * jv * rv)
                                .sum();
                            let pair = basis.pair_index(n_abs as i32, n_rad);
                            let alpha2 = basis.alpha[pair].norm_sqr();
                            block[(s, n_rad)] = pref_global * sign * alpha2 * y_eq * integral;
                        }
                    }
                }
                per_l.push(block);
            }
            values.push(per_l);
        }
        Ok(BetaTable {
            ell_max: params.ell_max,
            s_of_ell: params.s_of_ell.clone(),
            radial_counts: basis.radial_counts.clone(),
            values,
        })
    }

    /// `beta_{l,s;N,n}`; `n_abs = |N|`, zero when `l < |N|`.
    pub fn value(&self, l: usize, s: usize, n_abs: usize, n_rad: usize) -> f64 {
        self.values[l][n_abs][(s, n_rad)]
    }

    pub fn block(&self, l: usize, n_abs: usize) -> &Array2<f64> {
        &self.values[l][n_abs]
    }
}
