//! Rotations, uniform SO(3) sampling, and the discrete rotation grid used by
//! the EM engine.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// A 3-D rotation stored both as a unit quaternion `(w, x, y, z)` and as the
/// equivalent active rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub quat: [f64; 4],
    pub mat: [[f64; 3]; 3],
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation::from_quaternion([1.0, 0.0, 0.0, 0.0])
    }

    /// Builds from a quaternion, normalizing it first.
    pub fn from_quaternion(q: [f64; 4]) -> Self {
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        assert!(n > 0.0, "zero quaternion");
        let q = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
        let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
        let mat = [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ];
        Rotation { quat: q, mat }
    }

    /// Active rotation about the z axis.
    pub fn about_z(angle: f64) -> Self {
        Rotation::from_quaternion([(angle / 2.0).cos(), 0.0, 0.0, (angle / 2.0).sin()])
    }

    /// Active rotation about the y axis.
    pub fn about_y(angle: f64) -> Self {
        Rotation::from_quaternion([(angle / 2.0).cos(), 0.0, (angle / 2.0).sin(), 0.0])
    }

    /// ZYZ Euler angles `(alpha, beta, gamma)` such that
    /// `self = Rz(alpha) Ry(beta) Rz(gamma)`.
    pub fn euler_zyz(&self) -> (f64, f64, f64) {
        let m = &self.mat;
        let cb = m[2][2].clamp(-1.0, 1.0);
        let sb = (m[0][2] * m[0][2] + m[1][2] * m[1][2]).sqrt();
        if sb > 1e-12 {
            let beta = sb.atan2(cb);
            let alpha = m[1][2].atan2(m[0][2]);
            let gamma = m[2][1].atan2(-m[2][0]);
            (alpha, beta, gamma)
        } else if cb > 0.0 {
            // beta = 0: only alpha + gamma is determined.
            (m[1][0].atan2(m[0][0]), 0.0, 0.0)
        } else {
            // beta = pi: only alpha - gamma is determined.
            ((-m[1][0]).atan2(-m[0][0]), std::f64::consts::PI, 0.0)
        }
    }

    pub fn from_euler_zyz(alpha: f64, beta: f64, gamma: f64) -> Self {
        Rotation::about_z(alpha) * Rotation::about_y(beta) * Rotation::about_z(gamma)
    }

    pub fn inverse(&self) -> Self {
        let q = self.quat;
        Rotation::from_quaternion([q[0], -q[1], -q[2], -q[3]])
    }

    /// Applies the rotation to a vector.
    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.mat;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// Applies the inverse rotation to a vector.
    pub fn apply_inv(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.mat;
        [
            m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
            m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
            m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
        ]
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        let [w1, x1, y1, z1] = self.quat;
        let [w2, x2, y2, z2] = rhs.quat;
        Rotation::from_quaternion([
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ])
    }
}

/// Draws one rotation uniformly w.r.t. Haar measure (subgroup-algorithm
/// quaternion construction from three uniform variates).
pub fn sample_uniform_rotation<R: Rng>(rng: &mut R) -> Rotation {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let u3: f64 = rng.gen();
    let two_pi = 2.0 * std::f64::consts::PI;
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    Rotation::from_quaternion([
        a * (two_pi * u2).sin(),
        a * (two_pi * u2).cos(),
        b * (two_pi * u3).sin(),
        b * (two_pi * u3).cos(),
    ])
}

/// The fixed candidate rotation set `Omega^K` shared by the simulator model
/// and the EM engine.
#[derive(Debug, Clone)]
pub struct RotationGrid {
    pub rotations: Vec<Rotation>,
    pub seed: u64,
}

impl RotationGrid {
    /// `K` rotations drawn uniformly from SO(3) with a fixed seed; the result
    /// is reproducible bit-for-bit across runs.
    pub fn uniform(k: usize, seed: u64) -> Self {
        assert!(k >= 1, "grid must contain at least one rotation");
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let rotations = (0..k).map(|_| sample_uniform_rotation(&mut rng)).collect();
        RotationGrid { rotations, seed }
    }

    /// Same as [`RotationGrid::uniform`] but with the first element replaced
    /// by the identity; handy for degenerate single-rotation setups.
    pub fn uniform_with_identity(k: usize, seed: u64) -> Self {
        let mut g = RotationGrid::uniform(k, seed);
        g.rotations[0] = Rotation::identity();
        g
    }

    pub fn from_rotations(rotations: Vec<Rotation>) -> Self {
        assert!(!rotations.is_empty());
        RotationGrid { rotations, seed: 0 }
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }
}
