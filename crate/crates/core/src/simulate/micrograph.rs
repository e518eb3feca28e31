//! Micrograph assembly from placed projections plus noise calibration.

use ndarray::{s, Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::placement::sample_corners;
use super::SimConfig;
use crate::basis::{pixel_coord, sample_uniform_rotation, BandlimitParams, PswfBasis, Rotation};
use crate::error::{Error, Result};
use crate::forward::{project, BetaTable, VolumeCoefficients};

/// Ground-truth position and orientation of one placed projection.
#[derive(Clone, Copy, Debug)]
pub struct Placement {
    /// Top-left pixel of the projection's square support.
    pub corner: [usize; 2],
    pub rotation: Rotation,
}

impl Placement {
    /// Support center in fractional pixels for side length `l`.
    pub fn center(&self, l: usize) -> [f64; 2] {
        let h = (l as f64 - 1.0) / 2.0;
        [self.corner[0] as f64 + h, self.corner[1] as f64 + h]
    }
}

/// One synthetic measurement together with its generation ground truth.
#[derive(Clone, Debug)]
pub struct Micrograph {
    pub pixels: Array2<f64>,
    /// Variance of the added Gaussian noise; zero while noiseless.
    pub sigma2: f64,
    pub placements: Vec<Placement>,
    /// Side length of one projection within this micrograph.
    pub l_proj: usize,
}

/// Placement and noise use distinct ChaCha streams of the same seed so the
/// two draw sequences never interleave.
const STREAM_PLACEMENT: u64 = 0;
const STREAM_NOISE: u64 = 1;

fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Samples rotations and corners sequentially, renders one projection per
/// rotation in parallel, and sums them into an empty micrograph, so the
/// result depends only on the seed.
fn assemble<F>(config: &SimConfig, l: usize, render: F) -> Result<Micrograph>
where
    F: Fn(&Rotation) -> Result<Array2<f64>> + Sync,
{
    config.validate()?;
    let count = config.target_count(l);
    let mut rng = rng_for(config.seed, STREAM_PLACEMENT);
    let rotations: Vec<Rotation> =
        (0..count).map(|_| sample_uniform_rotation(&mut rng)).collect();
    let corners = sample_corners(config.n, l, count, config.mode, &mut rng)?;
    let images: Vec<Array2<f64>> = rotations.par_iter().map(&render).collect::<Result<_>>()?;
    let mut pixels = Array2::zeros((config.n, config.n));
    let mut placements = Vec::with_capacity(count);
    for ((corner, rotation), image) in corners.into_iter().zip(rotations).zip(images) {
        let mut support =
            pixels.slice_mut(s![corner[0]..corner[0] + l, corner[1]..corner[1] + l]);
        support += &image;
        placements.push(Placement { corner, rotation });
    }
    Ok(Micrograph { pixels, sigma2: 0.0, placements, l_proj: l })
}

/// Samples the volume at a spatial point in `[-1, 1]^3`, zero outside the
/// grid.
fn trilinear(volume: &Array3<f64>, p: [f64; 3]) -> f64 {
    let l = volume.shape()[0];
    let half = l as f64 / 2.0;
    let offset = (l as f64 - 1.0) / 2.0;
    let g = [
        p[0] * half + offset,
        p[1] * half + offset,
        p[2] * half + offset,
    ];
    let base = [g[0].floor(), g[1].floor(), g[2].floor()];
    let frac = [g[0] - base[0], g[1] - base[1], g[2] - base[2]];
    let mut acc = 0.0;
    for da in 0..2usize {
        for db in 0..2usize {
            for dc in 0..2usize {
                let idx = [
                    base[0] as i64 + da as i64,
                    base[1] as i64 + db as i64,
                    base[2] as i64 + dc as i64,
                ];
                if idx.iter().any(|&v| v < 0 || v >= l as i64) {
                    continue;
                }
                let w = |f: f64, d: usize| if d == 0 { 1.0 - f } else { f };
                acc += w(frac[0], da)
                    * w(frac[1], db)
                    * w(frac[2], dc)
                    * volume[(idx[0] as usize, idx[1] as usize, idx[2] as usize)];
            }
        }
    }
    acc
}

/// Line-sum projection of a gridded cubic volume along z after rotating by
/// `rot`, with tri-linear resampling; the sum is weighted by the lattice
/// step so it approximates the line integral.
pub fn project_gridded(volume: &Array3<f64>, rot: &Rotation) -> Array2<f64> {
    let l = volume.shape()[0];
    let step = 2.0 / l as f64;
    Array2::from_shape_fn((l, l), |(i, j)| {
        let px = pixel_coord(l, i);
        let py = pixel_coord(l, j);
        let mut acc = 0.0;
        for k in 0..l {
            acc += trilinear(volume, rot.apply_inv([px, py, pixel_coord(l, k)]));
        }
        acc * step
    })
}

/// Noiseless micrograph from line-sum projections of a gridded volume.
pub fn place_method_one(volume: &Array3<f64>, config: &SimConfig) -> Result<Micrograph> {
    let sh = volume.shape();
    if sh[0] != sh[1] || sh[0] != sh[2] {
        return Err(Error::validation(format!("volume must be cubic, got {sh:?}")));
    }
    assemble(config, sh[0], |rot| Ok(project_gridded(volume, rot)))
}

/// Noiseless micrograph in which every projection is synthesized from the
/// coefficient model, so estimation sees exactly its own forward operator.
pub fn place_method_two(
    x: &VolumeCoefficients,
    params: &BandlimitParams,
    basis: &PswfBasis,
    beta: &BetaTable,
    config: &SimConfig,
) -> Result<Micrograph> {
    assemble(config, params.grid_size, |rot| Ok(project(x, beta, basis, rot)?.image))
}

/// Calibrates `sigma^2 = mean_t ||I_t||_F^2 / (L^2 snr)` and adds i.i.d.
/// Gaussian noise. Supports are disjoint in every placement mode, so the
/// per-projection energies are read off the noiseless pixels.
pub fn add_noise(m: &mut Micrograph, snr: f64, seed: u64) -> Result<()> {
    if m.placements.is_empty() {
        return Err(Error::validation(
            "cannot calibrate noise on a micrograph with no placements",
        ));
    }
    if !(snr > 0.0) {
        return Err(Error::validation(format!("snr {snr} must be positive")));
    }
    let l = m.l_proj;
    let mut total = 0.0;
    for p in &m.placements {
        let support =
            m.pixels.slice(s![p.corner[0]..p.corner[0] + l, p.corner[1]..p.corner[1] + l]);
        total += support.iter().map(|v| v * v).sum::<f64>();
    }
    let mean_energy = total / m.placements.len() as f64;
    if mean_energy == 0.0 {
        return Err(Error::validation(
            "all projections have zero energy; the target SNR is unsatisfiable",
        ));
    }
    let sigma2 = mean_energy / ((l * l) as f64 * snr);
    let sigma = sigma2.sqrt();
    let mut rng = rng_for(seed, STREAM_NOISE);
    for v in m.pixels.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * z;
    }
    m.sigma2 = sigma2;
    Ok(())
}

fn finish(m: Micrograph, config: &SimConfig) -> Result<Micrograph> {
    match config.downsample_to {
        Some(target) => super::downsample::downsample(&m, target),
        None => Ok(m),
    }
}

/// Full pipeline over a gridded volume: place, add noise, then optionally
/// downsample (noise first, as with real acquisitions).
pub fn simulate_method_one(volume: &Array3<f64>, config: &SimConfig) -> Result<Micrograph> {
    let mut m = place_method_one(volume, config)?;
    add_noise(&mut m, config.snr, config.seed)?;
    finish(m, config)
}

/// Full pipeline over a coefficient volume.
pub fn simulate_method_two(
    x: &VolumeCoefficients,
    params: &BandlimitParams,
    basis: &PswfBasis,
    beta: &BetaTable,
    config: &SimConfig,
) -> Result<Micrograph> {
    let mut m = place_method_two(x, params, basis, beta, config)?;
    add_noise(&mut m, config.snr, config.seed)?;
    finish(m, config)
}
