//! Wigner D-matrices for the rotation of spherical-harmonic expansions.
//!
//! Convention: for the active rotation of a function, `(R f)(x) = f(R^{-1} x)`,
//! the harmonics transform as
//!
//! ```text
//! Y_l^m(R^{-1} r) = sum_{m'} D^l_{m', m}(R) Y_l^{m'}(r)
//! D^l_{m', m}(alpha, beta, gamma) = e^{-i m' alpha} d^l_{m', m}(beta) e^{-i m gamma}
//! ```
//!
//! with ZYZ Euler angles `R = Rz(alpha) Ry(beta) Rz(gamma)` and the standard
//! little-d sum. This gives the homomorphism `D(R1 R2) = D(R1) D(R2)`.

use super::rotation::{Rotation, RotationGrid};
use crate::C64;

const MAX_FACT: usize = 64;

fn factorials() -> [f64; MAX_FACT] {
    let mut f = [1.0f64; MAX_FACT];
    for k in 1..MAX_FACT {
        f[k] = f[k - 1] * k as f64;
    }
    f
}

/// Wigner little-d element `d^l_{mp, m}(beta)`.
pub fn wigner_small_d(l: usize, mp: i64, m: i64, beta: f64) -> f64 {
    let li = l as i64;
    assert!(mp.abs() <= li && m.abs() <= li);
    assert!(2 * l + 1 < MAX_FACT, "degree too large for factorial table");
    let f = factorials();
    let fa = |k: i64| -> f64 {
        debug_assert!(k >= 0);
        f[k as usize]
    };
    let pref = (fa(li + mp) * fa(li - mp) * fa(li + m) * fa(li - m)).sqrt();
    let c = (beta / 2.0).cos();
    let s = (beta / 2.0).sin();
    let kmin = 0.max(m - mp);
    let kmax = (li + m).min(li - mp);
    let mut sum = 0.0;
    for k in kmin..=kmax {
        let denom = fa(li + m - k) * fa(k) * fa(li - k - mp) * fa(k - m + mp);
        let sign = if (k - m + mp) % 2 == 0 { 1.0 } else { -1.0 };
        let cpow = 2 * li - 2 * k + m - mp;
        let spow = 2 * k - m + mp;
        sum += sign / denom * c.powi(cpow as i32) * s.powi(spow as i32);
    }
    pref * sum
}

/// Full `(2l+1) x (2l+1)` Wigner D-matrix for one degree, indexed
/// `[mp + l][m + l]`.
pub fn wigner_d_matrix(l: usize, rot: &Rotation) -> Vec<Vec<C64>> {
    let (alpha, beta, gamma) = rot.euler_zyz();
    let li = l as i64;
    let dim = 2 * l + 1;
    let mut out = vec![vec![C64::new(0.0, 0.0); dim]; dim];
    for mp in -li..=li {
        let ea = C64::from_polar(1.0, -(mp as f64) * alpha);
        for m in -li..=li {
            let eg = C64::from_polar(1.0, -(m as f64) * gamma);
            let d = wigner_small_d(l, mp, m, beta);
            out[(mp + li) as usize][(m + li) as usize] = ea * d * eg;
        }
    }
    out
}

/// D-matrices for all degrees `0..=lmax` of one rotation.
pub fn wigner_d_stack(lmax: usize, rot: &Rotation) -> Vec<Vec<Vec<C64>>> {
    (0..=lmax).map(|l| wigner_d_matrix(l, rot)).collect()
}

/// Per-rotation Wigner tables for a whole grid.
#[derive(Debug, Clone)]
pub struct WignerTables {
    pub lmax: usize,
    /// `tables[k][l][mp + l][m + l]` for rotation `k` of the grid.
    pub tables: Vec<Vec<Vec<Vec<C64>>>>,
}

impl WignerTables {
    pub fn build(grid: &RotationGrid, lmax: usize) -> Self {
        let tables = grid
            .rotations
            .iter()
            .map(|r| wigner_d_stack(lmax, r))
            .collect();
        WignerTables { lmax, tables }
    }

    /// `D^l_{mp, m}` for rotation index `k`.
    pub fn d(&self, k: usize, l: usize, mp: i64, m: i64) -> C64 {
        let li = l as i64;
        self.tables[k][l][(mp + li) as usize][(m + li) as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::harmonics::sph_harmonic;
    use crate::basis::rotation::sample_uniform_rotation;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn matmul(a: &[Vec<C64>], b: &[Vec<C64>]) -> Vec<Vec<C64>> {
        let n = a.len();
        let mut c = vec![vec![C64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        c
    }

    #[test]
    fn degree_zero_and_identity() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..10 {
            let r = sample_uniform_rotation(&mut rng);
            let d0 = wigner_d_matrix(0, &r);
            assert!((d0[0][0] - C64::new(1.0, 0.0)).norm() < 1e-14);
        }
        for l in 0..=6 {
            let d = wigner_d_matrix(l, &Rotation::identity());
            for i in 0..(2 * l + 1) {
                for j in 0..(2 * l + 1) {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((d[i][j] - C64::new(want, 0.0)).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn known_small_d_values() {
        let beta = 0.8317f64;
        let (c, s) = (beta.cos(), beta.sin());
        assert!((wigner_small_d(1, 0, 0, beta) - c).abs() < 1e-14);
        assert!((wigner_small_d(1, 1, 1, beta) - (1.0 + c) / 2.0).abs() < 1e-14);
        assert!((wigner_small_d(1, 1, 0, beta) + s / 2f64.sqrt()).abs() < 1e-14);
        assert!((wigner_small_d(1, 1, -1, beta) - (1.0 - c) / 2.0).abs() < 1e-14);
        assert!((wigner_small_d(2, 0, 0, beta) - 0.5 * (3.0 * c * c - 1.0)).abs() < 1e-13);
        assert!((wigner_small_d(2, 2, 2, beta) - ((1.0 + c) / 2.0).powi(2)).abs() < 1e-13);
    }

    #[test]
    fn unitarity() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..20 {
            let r = sample_uniform_rotation(&mut rng);
            for l in 0..=8usize {
                let d = wigner_d_matrix(l, &r);
                let n = 2 * l + 1;
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = C64::new(0.0, 0.0);
                        for k in 0..n {
                            acc += d[k][i].conj() * d[k][j];
                        }
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!(
                            (acc - C64::new(want, 0.0)).norm() < 1e-10,
                            "l={l} i={i} j={j}: {acc}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn homomorphism() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..15 {
            let r1 = sample_uniform_rotation(&mut rng);
            let r2 = sample_uniform_rotation(&mut rng);
            let r12 = r1 * r2;
            for l in 0..=6usize {
                let d1 = wigner_d_matrix(l, &r1);
                let d2 = wigner_d_matrix(l, &r2);
                let d12 = wigner_d_matrix(l, &r12);
                let prod = matmul(&d1, &d2);
                for i in 0..(2 * l + 1) {
                    for j in 0..(2 * l + 1) {
                        assert!(
                            (d12[i][j] - prod[i][j]).norm() < 1e-10,
                            "l={l}: {} vs {}",
                            d12[i][j],
                            prod[i][j]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn rotates_spherical_harmonics() {
        // Y_l^m(R^{-1} r) = sum_{m'} D^l_{m',m}(R) Y_l^{m'}(r): this equality
        // pins the convention used by the projection synthesis.
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..12 {
            let r = sample_uniform_rotation(&mut rng);
            let v = {
                let raw = [
                    rng.gen::<f64>() - 0.5,
                    rng.gen::<f64>() - 0.5,
                    rng.gen::<f64>() - 0.5,
                ];
                let n = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
                [raw[0] / n, raw[1] / n, raw[2] / n]
            };
            let vr = r.apply_inv(v);
            let dir = |p: [f64; 3]| -> (f64, f64) { (p[2].clamp(-1.0, 1.0).acos(), p[1].atan2(p[0])) };
            let (th, ph) = dir(v);
            let (thr, phr) = dir(vr);
            for l in 0..=5usize {
                let d = wigner_d_matrix(l, &r);
                for m in -(l as i64)..=(l as i64) {
                    let lhs = sph_harmonic(l, m, thr, phr);
                    let mut rhs = C64::new(0.0, 0.0);
                    for mp in -(l as i64)..=(l as i64) {
                        rhs += d[(mp + l as i64) as usize][(m + l as i64) as usize]
                            * sph_harmonic(l, mp, th, ph);
                    }
                    assert!((lhs - rhs).norm() < 1e-11, "l={l} m={m}: {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn in_plane_composition_scales_rows() {
        // D^l_{N,m}(Rz(g) R) = e^{-i N g} D^l_{N,m}(R): the steerability
        // identity used to rotate projections in place.
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let r = sample_uniform_rotation(&mut rng);
        let g = 0.6234;
        let rz = Rotation::about_z(g);
        for l in 0..=4usize {
            let d = wigner_d_matrix(l, &r);
            let dz = wigner_d_matrix(l, &(rz * r));
            for n in -(l as i64)..=(l as i64) {
                for m in -(l as i64)..=(l as i64) {
                    let want = C64::from_polar(1.0, -(n as f64) * g)
                        * d[(n + l as i64) as usize][(m + l as i64) as usize];
                    let got = dz[(n + l as i64) as usize][(m + l as i64) as usize];
                    assert!((got - want).norm() < 1e-11);
                }
            }
        }
    }
}
