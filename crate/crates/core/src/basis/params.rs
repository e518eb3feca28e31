//! Truncation bookkeeping shared by the volume expansion, the disk prolate
//! basis, and everything downstream.

use super::bessel::spherical_bessel_zeros_table;
use super::pswf;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default relative eigenvalue-energy cutoff for the prolate basis.
pub const DEFAULT_PSWF_TRUNCATION: f64 = 1e-6;

/// Bandlimit and truncation parameters for a reconstruction problem.
///
/// `c` is the bandlimit in cycles per pixel (0.5 = Nyquist); all continuous
/// formulas use the kernel bandlimit `pi * c * L`, the same quantity mapped
/// onto the unit disk/ball that the projection grid inscribes.
///
/// The truncation tables are data, not code: `s_of_ell[l]` is the number of
/// radial basis functions kept for spherical-harmonic degree `l`, and
/// `pswf_radial_counts[N]` the number of prolate radial functions kept for
/// angular index `N`. The standard rules fill them in [`BandlimitParams::new`],
/// but callers may substitute their own tables via
/// [`BandlimitParams::with_tables`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandlimitParams {
    pub c: f64,
    /// Projection/patch side length in pixels (called `L` throughout).
    pub grid_size: usize,
    pub ell_max: usize,
    /// Eigenvalue-energy cutoff `|alpha_{N,n}|^2 / |alpha_{0,0}|^2` below
    /// which prolate pairs are dropped.
    pub pswf_truncation: f64,
    /// Radial count per spherical-harmonic degree, `l = 0..=ell_max`.
    pub s_of_ell: Vec<usize>,
    /// Positive zeros `u_{l,s}` of the spherical Bessel functions,
    /// `bessel_zeros[l][s-1]`, for `s = 1..=s_of_ell[l]`.
    pub bessel_zeros: Vec<Vec<f64>>,
    /// Retained prolate radial count per angular index `N >= 0`; the table
    /// ends at the first angular index with no significant eigenvalue.
    pub pswf_radial_counts: Vec<usize>,
}

impl BandlimitParams {
    /// Standard truncation rules: keep `u_{l,s} <= pi c L` radially and keep
    /// prolate pairs with relative eigenvalue energy above
    /// [`DEFAULT_PSWF_TRUNCATION`].
    pub fn new(c: f64, grid_size: usize, ell_max: usize) -> Result<Self> {
        Self::with_threshold(c, grid_size, ell_max, DEFAULT_PSWF_TRUNCATION)
    }

    pub fn with_threshold(
        c: f64,
        grid_size: usize,
        ell_max: usize,
        pswf_truncation: f64,
    ) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::validation(format!(
                "bandlimit c must lie in (0, 1], got {c}"
            )));
        }
        if grid_size < 3 {
            return Err(Error::validation(format!(
                "grid size must be at least 3, got {grid_size}"
            )));
        }
        if !(pswf_truncation > 0.0 && pswf_truncation < 1.0) {
            return Err(Error::validation(format!(
                "pswf truncation must lie in (0, 1), got {pswf_truncation}"
            )));
        }
        let c_eff = std::f64::consts::PI * c * grid_size as f64;
        // Upper bound on how many zeros any degree can keep: u_{l,s} > s for
        // all l, so s_max < c_eff.
        let smax_bound = c_eff.ceil() as usize + 1;
        let table = spherical_bessel_zeros_table(ell_max, smax_bound);
        let mut s_of_ell = Vec::with_capacity(ell_max + 1);
        let mut bessel_zeros = Vec::with_capacity(ell_max + 1);
        for l in 0..=ell_max {
            let count = table[l].iter().take_while(|&&u| u <= c_eff).count();
            if count == 0 {
                return Err(Error::validation(format!(
                    "ell_max = {ell_max} too large for c = {c}, L = {grid_size}: \
                     no spherical Bessel zero of degree {l} fits the bandlimit"
                )));
            }
            s_of_ell.push(count);
            bessel_zeros.push(table[l][..count].to_vec());
        }
        let pswf_radial_counts = pswf::significant_radial_counts(c_eff, pswf_truncation);
        Ok(BandlimitParams {
            c,
            grid_size,
            ell_max,
            pswf_truncation,
            s_of_ell,
            bessel_zeros,
            pswf_radial_counts,
        })
    }

    /// Builds params with caller-supplied truncation tables. The zeros table
    /// is still computed from the rule `s <= s_of_ell[l]`.
    pub fn with_tables(
        c: f64,
        grid_size: usize,
        ell_max: usize,
        s_of_ell: Vec<usize>,
        pswf_radial_counts: Vec<usize>,
    ) -> Result<Self> {
        if s_of_ell.len() != ell_max + 1 {
            return Err(Error::validation(
                "s_of_ell must have ell_max + 1 entries".to_string(),
            ));
        }
        if s_of_ell.iter().any(|&s| s == 0) {
            return Err(Error::validation(
                "every degree up to ell_max needs at least one radial function".to_string(),
            ));
        }
        let smax = *s_of_ell.iter().max().unwrap();
        let table = spherical_bessel_zeros_table(ell_max, smax);
        let bessel_zeros = (0..=ell_max).map(|l| table[l][..s_of_ell[l]].to_vec()).collect();
        Ok(BandlimitParams {
            c,
            grid_size,
            ell_max,
            pswf_truncation: DEFAULT_PSWF_TRUNCATION,
            s_of_ell,
            bessel_zeros,
            pswf_radial_counts,
        })
    }

    /// Kernel bandlimit `pi * c * L` used by every continuous-domain formula.
    pub fn kernel_bandlimit(&self) -> f64 {
        std::f64::consts::PI * self.c * self.grid_size as f64
    }

    /// Number of volume coefficients `sum_l (2l+1) S(l)`.
    pub fn coeff_count(&self) -> usize {
        self.s_of_ell
            .iter()
            .enumerate()
            .map(|(l, &s)| (2 * l + 1) * s)
            .sum()
    }

    /// `u_{l,s}` with `s` counted from 1.
    pub fn bessel_zero(&self, l: usize, s: usize) -> f64 {
        self.bessel_zeros[l][s - 1]
    }

    /// Largest prolate angular index with at least one retained radial
    /// function.
    pub fn pswf_n_max(&self) -> usize {
        self.pswf_radial_counts.len().saturating_sub(1)
    }

    /// Shared Gauss-Legendre order for radial integrals on [0, 1]: enough
    /// nodes for the prolate polynomial degree plus the Bessel bandwidth,
    /// and never less than four per retained radial zero.
    pub fn radial_quad_order(&self) -> usize {
        let c_eff = self.kernel_bandlimit();
        let smax = self.s_of_ell.iter().copied().max().unwrap_or(1);
        let j_basis = pswf::zernike_basis_size(c_eff);
        (4 * smax).max(j_basis + c_eff.ceil() as usize + 24)
    }

    /// Same params restricted to a smaller `ell_max`; used by frequency
    /// marching so every stage shares one basis.
    pub fn restricted(&self, ell_max: usize) -> Self {
        assert!(ell_max <= self.ell_max);
        BandlimitParams {
            c: self.c,
            grid_size: self.grid_size,
            ell_max,
            pswf_truncation: self.pswf_truncation,
            s_of_ell: self.s_of_ell[..=ell_max].to_vec(),
            bessel_zeros: self.bessel_zeros[..=ell_max].to_vec(),
            pswf_radial_counts: self.pswf_radial_counts.clone(),
        }
    }
}
