//! Volume coefficients in the truncated spherical Bessel / spherical
//! harmonic basis.
//!
//! The volume is stored through its Fourier transform on the ball of radius
//! `pi c L`: with unit-ball coordinates `xi = pi c L * k * rhat`,
//!
//! `fhat(xi) = sum_{l,m,s} x_{l,m,s} j_{l,s}(k) Y_l^m(rhat)`,
//!
//! where `j_{l,s}(k) = 4 / |j_{l+1}(u_{l,s})| * j_l(u_{l,s} k)` and `u_{l,s}`
//! is the s-th positive zero of the spherical Bessel function `j_l`. A real
//! volume corresponds to the symmetry `x_{l,-m,s} = (-1)^{l+m}
//! conj(x_{l,m,s})`, which is also the constraint surface the solvers work
//! on.

use crate::basis::bessel::spherical_jn;
use crate::basis::harmonics::sph_harmonic;
use crate::basis::BandlimitParams;
use crate::error::{Error, Result};
use crate::C64;
use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeCoefficients {
    pub ell_max: usize,
    pub s_of_ell: Vec<usize>,
    /// Flat coefficients ordered by `l` ascending, then `m = -l..=l`, then
    /// `s` ascending.
    pub data: Vec<C64>,
}

impl VolumeCoefficients {
    pub fn zeros(params: &BandlimitParams) -> Self {
        let len = params.coeff_count();
        VolumeCoefficients {
            ell_max: params.ell_max,
            s_of_ell: params.s_of_ell.clone(),
            data: vec![C64::new(0.0, 0.0); len],
        }
    }

    /// Random coefficients on the real-volume constraint surface, iid
    /// standard normal in the real degrees of freedom.
    pub fn random_real(params: &BandlimitParams, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let dof: Vec<f64> = (0..real_dof_count(params))
            .map(|_| {
                // Box-Muller keeps the dependency surface small here.
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen::<f64>();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        from_real_dof(params, &dof)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flat index of `(l, m, s)`; `s` counts from 0.
    pub fn index(&self, l: usize, m: i64, s: usize) -> usize {
        debug_assert!(l <= self.ell_max);
        debug_assert!(m.unsigned_abs() as usize <= l);
        debug_assert!(s < self.s_of_ell[l]);
        let mut base = 0usize;
        for lp in 0..l {
            base += (2 * lp + 1) * self.s_of_ell[lp];
        }
        base + ((m + l as i64) as usize) * self.s_of_ell[l] + s
    }

    pub fn get(&self, l: usize, m: i64, s: usize) -> C64 {
        self.data[self.index(l, m, s)]
    }

    pub fn set(&mut self, l: usize, m: i64, s: usize, v: C64) {
        let idx = self.index(l, m, s);
        self.data[idx] = v;
    }

    /// `(l, m, s)` labels in flat order.
    pub fn labels(&self) -> Vec<(usize, i64, usize)> {
        let mut out = Vec::with_capacity(self.data.len());
        for l in 0..=self.ell_max {
            for m in -(l as i64)..=(l as i64) {
                for s in 0..self.s_of_ell[l] {
                    out.push((l, m, s));
                }
            }
        }
        out
    }

    /// Largest violation of the real-volume symmetry, relative to the
    /// largest coefficient magnitude.
    pub fn reality_residual(&self) -> f64 {
        let scale = self
            .data
            .iter()
            .map(|v| v.norm())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for l in 0..=self.ell_max {
            for m in 0..=(l as i64) {
                for s in 0..self.s_of_ell[l] {
                    let sign = if (l as i64 + m) % 2 == 0 { 1.0 } else { -1.0 };
                    let want = sign * self.get(l, m, s).conj();
                    worst = worst.max((self.get(l, -m, s) - want).norm());
                }
            }
        }
        worst / scale
    }

    /// Fourier transform of the volume at a point of the unit ball
    /// (kernel-bandlimit coordinates `xi = pi c L * point`); zero outside.
    pub fn fourier_at(&self, params: &BandlimitParams, point: [f64; 3]) -> C64 {
        let k = (point[0] * point[0] + point[1] * point[1] + point[2] * point[2]).sqrt();
        if k > 1.0 {
            return C64::new(0.0, 0.0);
        }
        let theta = if k == 0.0 { 0.0 } else { (point[2] / k).clamp(-1.0, 1.0).acos() };
        let phi = point[1].atan2(point[0]);
        let mut acc = C64::new(0.0, 0.0);
        for l in 0..=self.ell_max {
            for s in 0..self.s_of_ell[l] {
                let radial = normalized_radial(params, l, s, k);
                if radial == 0.0 {
                    continue;
                }
                for m in -(l as i64)..=(l as i64) {
                    let x = self.get(l, m, s);
                    if x != C64::new(0.0, 0.0) {
                        acc += x * radial * sph_harmonic(l, m, theta, phi);
                    }
                }
            }
        }
        acc
    }
}

/// `j_{l,s}(k) = 4 / |j_{l+1}(u_{l,s})| * j_l(u_{l,s} k)` on `[0, 1]`.
pub fn normalized_radial(params: &BandlimitParams, l: usize, s: usize, k: f64) -> f64 {
    let u = params.bessel_zeros[l][s];
    let norm = 4.0 / spherical_jn(l + 1, u).abs();
    norm * spherical_jn(l, u * k)
}

/// Number of real degrees of freedom on the real-volume constraint surface;
/// equals the complex coefficient count.
/// Copy `x` into the coefficient layout of `to`, zero-filling entries whose
/// degree exceeds `x.ell_max`. The flat layout is degree-major, so the old
/// vector is a prefix of the new one and every retained entry is preserved
/// bit-for-bit.
pub fn embed_coeffs(x: &VolumeCoefficients, to: &BandlimitParams) -> VolumeCoefficients {
    assert!(to.ell_max >= x.ell_max, "cannot embed into a smaller degree cutoff");
    for l in 0..=x.ell_max {
        assert_eq!(to.s_of_ell[l], x.s_of_ell[l], "radial truncation changed at degree {l}");
    }
    let mut out = VolumeCoefficients::zeros(to);
    out.data[..x.data.len()].copy_from_slice(&x.data);
    out
}

pub fn real_dof_count(params: &BandlimitParams) -> usize {
    params.coeff_count()
}

/// Sparse columns of the map from real degrees of freedom to complex
/// coefficients. Column order: `l` ascending, `m = 0..=l`, `s` ascending,
/// with two columns (real then imaginary part) per `m > 0` entry.
///
/// For `m = 0` the symmetry forces `x` real for even `l` and imaginary for
/// odd `l`; for `m > 0` the `m < 0` partner is `(-1)^{l+m} conj(x)`.
pub fn real_basis_columns(params: &BandlimitParams) -> Vec<Vec<(usize, C64)>> {
    let proto = VolumeCoefficients::zeros(params);
    let mut cols = Vec::with_capacity(real_dof_count(params));
    let i = C64::new(0.0, 1.0);
    for l in 0..=params.ell_max {
        for m in 0..=(l as i64) {
            for s in 0..params.s_of_ell[l] {
                let idx_p = proto.index(l, m, s);
                if m == 0 {
                    let unit = if l % 2 == 0 { C64::new(1.0, 0.0) } else { i };
                    cols.push(vec![(idx_p, unit)]);
                } else {
                    let idx_n = proto.index(l, -m, s);
                    let sign = if (l as i64 + m) % 2 == 0 { 1.0 } else { -1.0 };
                    cols.push(vec![(idx_p, C64::new(1.0, 0.0)), (idx_n, C64::new(sign, 0.0))]);
                    cols.push(vec![(idx_p, i), (idx_n, -sign * i)]);
                }
            }
        }
    }
    cols
}

pub fn from_real_dof(params: &BandlimitParams, dof: &[f64]) -> VolumeCoefficients {
    let cols = real_basis_columns(params);
    assert_eq!(dof.len(), cols.len());
    let mut out = VolumeCoefficients::zeros(params);
    for (t, col) in dof.iter().zip(&cols) {
        for &(row, unit) in col {
            out.data[row] += unit * *t;
        }
    }
    out
}

pub fn to_real_dof(params: &BandlimitParams, x: &VolumeCoefficients) -> Vec<f64> {
    let mut out = Vec::with_capacity(real_dof_count(params));
    for l in 0..=params.ell_max {
        for m in 0..=(l as i64) {
            for s in 0..params.s_of_ell[l] {
                let v = x.get(l, m, s);
                if m == 0 {
                    out.push(if l % 2 == 0 { v.re } else { v.im });
                } else {
                    out.push(v.re);
                    out.push(v.im);
                }
            }
        }
    }
    out
}

/// Solves the Hermitian normal equations `A x = y` restricted to the
/// real-volume constraint surface.
///
/// With `B` the sparse real-to-complex basis, this solves `Re(B^H A B) t =
/// Re(B^H y)` by Cholesky; a relative ridge of `1e-10 tr(A)/M` is added once
/// if the factorization fails, and failure after that is reported as a
/// numerical error.
pub fn solve_real_constrained(
    params: &BandlimitParams,
    a: &Array2<C64>,
    y: &[C64],
) -> Result<VolumeCoefficients> {
    let m = params.coeff_count();
    assert_eq!(a.dim(), (m, m));
    assert_eq!(y.len(), m);
    let cols = real_basis_columns(params);
    let n = cols.len();
    let mut a_real = DMatrix::<f64>::zeros(n, n);
    let mut y_real = DVector::<f64>::zeros(n);
    for (p, col_p) in cols.iter().enumerate() {
        let mut acc_y = C64::new(0.0, 0.0);
        for &(r, up) in col_p {
            acc_y += up.conj() * y[r];
        }
        y_real[p] = acc_y.re;
        for (q, col_q) in cols.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &(r, up) in col_p {
                for &(c, uq) in col_q {
                    acc += up.conj() * a[(r, c)] * uq;
                }
            }
            a_real[(p, q)] = acc.re;
        }
    }
    let trace: f64 = (0..n).map(|i| a_real[(i, i)]).sum();
    let solved = Cholesky::new(a_real.clone())
        .map(|ch| ch.solve(&y_real))
        .or_else(|| {
            let ridge = 1e-10 * trace / n as f64;
            let mut damped = a_real;
            for i in 0..n {
                damped[(i, i)] += ridge;
            }
            Cholesky::new(damped).map(|ch| ch.solve(&y_real))
        })
        .ok_or_else(|| {
            Error::numerical(format!(
                "normal equations not positive definite ({n} unknowns, trace {trace:.3e}), \
                 even with ridge"
            ))
        })?;
    Ok(from_real_dof(params, solved.as_slice()))
}
