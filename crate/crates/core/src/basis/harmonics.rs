//! Complex spherical harmonics.

use super::legendre::assoc_legendre;
use crate::C64;

/// Complex spherical harmonic
///
/// ```text
/// Y_l^m(theta, phi) = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) P_l^m(cos theta) e^{i m phi}
/// ```
///
/// with the Condon-Shortley phase inside `P_l^m`. Negative orders follow
/// `Y_l^{-m} = (-1)^m conj(Y_l^m)`.
pub fn sph_harmonic(l: usize, m: i64, theta: f64, phi: f64) -> C64 {
    let mabs = m.unsigned_abs() as usize;
    assert!(mabs <= l, "order must satisfy |m| <= l");
    let norm = normalization(l, mabs);
    let plm = assoc_legendre(l, mabs, theta.cos());
    let base = norm * plm;
    let phase = C64::from_polar(1.0, mabs as f64 * phi);
    if m >= 0 {
        base * phase
    } else {
        let v = base * phase;
        let sign = if mabs % 2 == 0 { 1.0 } else { -1.0 };
        sign * v.conj()
    }
}

/// `Y_l^m(pi/2, 0)`: the equatorial value entering the projection-slice
/// coupling. Real by construction; zero whenever `l + m` is odd.
pub fn sph_harmonic_equator(l: usize, m: i64) -> f64 {
    let v = sph_harmonic(l, m, std::f64::consts::FRAC_PI_2, 0.0);
    debug_assert!(v.im.abs() < 1e-14 * v.re.abs().max(1.0));
    v.re
}

fn normalization(l: usize, m: usize) -> f64 {
    // (l-m)!/(l+m)! as a running product to avoid overflow for large l.
    let mut ratio = 1.0;
    for k in (l - m + 1)..=(l + m) {
        ratio /= k as f64;
    }
    ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI) * ratio).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::quadrature::gauss_legendre;

    #[test]
    fn explicit_low_orders() {
        let pi = std::f64::consts::PI;
        for &(theta, phi) in &[(0.3, 1.1), (1.2, -0.7), (2.4, 3.0)] {
            let y00 = sph_harmonic(0, 0, theta, phi);
            assert!((y00.re - 0.5 / pi.sqrt()).abs() < 1e-14 && y00.im.abs() < 1e-14);

            let y10 = sph_harmonic(1, 0, theta, phi);
            let want = (3.0 / (4.0 * pi)).sqrt() * theta.cos();
            assert!((y10.re - want).abs() < 1e-14 && y10.im.abs() < 1e-14);

            let y11 = sph_harmonic(1, 1, theta, phi);
            let amp = -(3.0 / (8.0 * pi)).sqrt() * theta.sin();
            let want = C64::from_polar(1.0, phi) * amp;
            assert!((y11 - want).norm() < 1e-14);

            let y22 = sph_harmonic(2, 2, theta, phi);
            let amp = 0.25 * (15.0 / (2.0 * pi)).sqrt() * theta.sin() * theta.sin();
            let want = C64::from_polar(1.0, 2.0 * phi) * amp;
            assert!((y22 - want).norm() < 1e-13);
        }
    }

    #[test]
    fn conjugation_symmetry() {
        for l in 0..=8usize {
            for m in 1..=l as i64 {
                let (theta, phi) = (0.9, 2.3);
                let a = sph_harmonic(l, -m, theta, phi);
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let b = sph_harmonic(l, m, theta, phi).conj() * sign;
                assert!((a - b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn orthonormal_under_quadrature() {
        // Gauss-Legendre in cos(theta) x trapezoid in phi integrates
        // polynomials of this degree exactly; tolerance 1e-12.
        let (nodes, weights) = gauss_legendre(32);
        let nphi = 64usize;
        let dphi = 2.0 * std::f64::consts::PI / nphi as f64;
        let lmax = 6usize;
        let mut idx = Vec::new();
        for l in 0..=lmax {
            for m in -(l as i64)..=(l as i64) {
                idx.push((l, m));
            }
        }
        for &(l1, m1) in &idx {
            for &(l2, m2) in &idx {
                let mut acc = C64::new(0.0, 0.0);
                for (&x, &w) in nodes.iter().zip(&weights) {
                    let theta = x.acos();
                    for p in 0..nphi {
                        let phi = p as f64 * dphi;
                        acc += w
                            * dphi
                            * sph_harmonic(l1, m1, theta, phi)
                            * sph_harmonic(l2, m2, theta, phi).conj();
                    }
                }
                let want = if l1 == l2 && m1 == m2 { 1.0 } else { 0.0 };
                assert!(
                    (acc - C64::new(want, 0.0)).norm() < 1e-12,
                    "({l1},{m1}) vs ({l2},{m2}): {acc}"
                );
            }
        }
    }

    #[test]
    fn equator_parity() {
        for l in 0..=10usize {
            for m in -(l as i64)..=(l as i64) {
                let v = sph_harmonic_equator(l, m);
                if (l as i64 + m) % 2 != 0 {
                    assert!(v.abs() < 1e-14, "Y_{l}^{m} equator should vanish");
                }
            }
        }
    }
}
