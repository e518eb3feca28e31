//! Driver state: patch collections, the shift prior, and run configuration.

use crate::basis::rotation::RotationGrid;
use crate::error::{Error, Result};
use crate::forward::coeffs::VolumeCoefficients;
use crate::forward::patch::make_patch;
use crate::forward::project::{synthesize_image, Projection};
use crate::simulate::Micrograph;
use ndarray::Array2;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Distribution of in-patch translations on the `(2L)^2` shift lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftDistribution {
    /// `rho[(s_x, s_y)]`, indexed over `{0 .. 2L-1}^2`.
    pub rho: Array2<f64>,
}

impl ShiftDistribution {
    /// Uniform distribution for patch side `l`.
    pub fn uniform(l: usize) -> Self {
        let side = 2 * l;
        let mass = 1.0 / (side * side) as f64;
        ShiftDistribution { rho: Array2::from_elem((side, side), mass) }
    }

    /// All mass on one shift.
    pub fn point_mass(l: usize, shift: (usize, usize)) -> Self {
        let side = 2 * l;
        assert!(shift.0 < side && shift.1 < side, "shift outside the lattice");
        let mut rho = Array2::zeros((side, side));
        rho[shift] = 1.0;
        ShiftDistribution { rho }
    }

    /// Side of the lattice, `2L`.
    pub fn side(&self) -> usize {
        self.rho.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.rho.dim();
        if a != b || a == 0 || a % 2 != 0 {
            return Err(Error::validation(format!(
                "shift distribution must be square with even side, got {a} x {b}"
            )));
        }
        if self.rho.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::validation(
                "shift distribution entries must be finite and nonnegative".to_string(),
            ));
        }
        let total: f64 = self.rho.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::validation(format!(
                "shift distribution sums to {total}, expected 1"
            )));
        }
        Ok(())
    }

    /// Rescale in place so the entries sum to one.
    pub fn normalize(&mut self) {
        let total: f64 = self.rho.iter().sum();
        assert!(total > 0.0, "cannot normalize a zero shift distribution");
        self.rho.mapv_inplace(|v| v / total);
    }

    /// Draw one shift; entries with zero mass are never returned.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (usize, usize) {
        let u: f64 = rng.gen::<f64>();
        let mut acc = 0.0;
        let side = self.side();
        let mut last = (side - 1, side - 1);
        for ((i, j), &p) in self.rho.indexed_iter() {
            if p == 0.0 {
                continue;
            }
            acc += p;
            last = (i, j);
            if u < acc {
                return (i, j);
            }
        }
        last
    }
}

/// A fixed collection of `L x L` patches sharing one noise variance.
#[derive(Debug, Clone)]
pub struct PatchSet {
    pub patches: Vec<Array2<f64>>,
    pub sigma2: f64,
    /// Patch side `L`.
    pub l: usize,
}

impl PatchSet {
    pub fn new(patches: Vec<Array2<f64>>, sigma2: f64) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::validation("patch set is empty".to_string()));
        }
        let l = patches[0].nrows();
        for (i, p) in patches.iter().enumerate() {
            if p.dim() != (l, l) {
                return Err(Error::validation(format!(
                    "patch {i} has shape {:?}, expected ({l}, {l})",
                    p.dim()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("patch {i} has non-finite pixels")));
            }
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::validation(format!(
                "noise variance must be positive and finite, got {sigma2}"
            )));
        }
        Ok(PatchSet { patches, sigma2, l })
    }

    /// Re-check the construction invariants (fields are public).
    pub fn validate(&self) -> Result<()> {
        if self.patches.is_empty() {
            return Err(Error::validation("patch set is empty".to_string()));
        }
        for (i, p) in self.patches.iter().enumerate() {
            if p.dim() != (self.l, self.l) {
                return Err(Error::validation(format!(
                    "patch {i} has shape {:?}, expected ({}, {})",
                    p.dim(),
                    self.l,
                    self.l
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("patch {i} has non-finite pixels")));
            }
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(Error::validation(format!(
                "noise variance must be positive and finite, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }

    /// Cut micrographs into non-overlapping `L x L` tiles, row-major per
    /// micrograph; each side must divide evenly. The recorded noise variance
    /// is the mean of the per-micrograph values.
    pub fn from_micrographs(micrographs: &[Micrograph], l: usize) -> Result<Self> {
        if micrographs.is_empty() {
            return Err(Error::validation("no micrographs given".to_string()));
        }
        let mut patches = Vec::new();
        let mut sigma2 = 0.0;
        for (idx, m) in micrographs.iter().enumerate() {
            let n = m.pixels.nrows();
            if n % l != 0 {
                return Err(Error::validation(format!(
                    "micrograph {idx} side {n} is not a multiple of the patch side {l}"
                )));
            }
            let tiles = n / l;
            for ti in 0..tiles {
                for tj in 0..tiles {
                    patches.push(
                        m.pixels
                            .slice(ndarray::s![ti * l..(ti + 1) * l, tj * l..(tj + 1) * l])
                            .to_owned(),
                    );
                }
            }
            sigma2 += m.sigma2;
        }
        PatchSet::new(patches, sigma2 / micrographs.len() as f64)
    }

    pub fn n_patches(&self) -> usize {
        self.patches.len()
    }

    /// Synthetic patches drawn from the generative model itself: shift from
    /// `rho`, orientation uniform over the grid, then template plus noise.
    /// Returns the set and the `(shift, rotation index)` labels.
    #[allow(clippy::too_many_arguments)]
    pub fn sample_from_model(
        x: &VolumeCoefficients,
        basis: &crate::basis::pswf::PswfBasis,
        beta: &crate::forward::beta::BetaTable,
        grid: &RotationGrid,
        rho: &ShiftDistribution,
        sigma2: f64,
        count: usize,
        seed: u64,
    ) -> Result<(Self, Vec<((usize, usize), usize)>)> {
        if count == 0 {
            return Err(Error::validation("requested zero patches".to_string()));
        }
        rho.validate()?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let images: Vec<Array2<f64>> = grid
            .rotations
            .iter()
            .map(|rot| {
                let coeffs = crate::forward::project::project_coeffs(x, beta, basis, rot);
                synthesize_image(basis, &coeffs)
            })
            .collect::<Result<_>>()?;
        let mut patches = Vec::with_capacity(count);
        let mut labels = Vec::with_capacity(count);
        for _ in 0..count {
            let shift = rho.sample(&mut rng);
            let w = rng.gen_range(0..grid.len());
            let proj = Projection { coeffs: vec![], image: images[w].clone() };
            patches.push(make_patch(&proj, shift, sigma2, rng.next_u64())?);
            labels.push((shift, w));
        }
        Ok((PatchSet::new(patches, sigma2)?, labels))
    }
}

/// One frequency-marching stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub ell_max: usize,
    pub max_iters: usize,
}

/// How a stage decides it has converged.
///
/// `Literal` compares the surrogate objective across consecutive training
/// minibatches, which is noisy for small minibatches; `Validation` evaluates
/// it on one fixed held-out minibatch instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    Literal,
    Validation { patches: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmConfig {
    /// Rotation grid size `K`.
    pub k_rotations: usize,
    /// Minibatch fraction `S` in `(0, 1]`.
    pub s_factor: f64,
    /// Stop a stage when the per-patch surrogate improves by less than this.
    pub epsilon: f64,
    pub schedule: Vec<StageSpec>,
    pub seed: u64,
    pub stop: StopRule,
    /// Byte budget for the precomputed overlap tables.
    pub memory_budget: u64,
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_rotations == 0 {
            return Err(Error::validation("rotation grid must be nonempty".to_string()));
        }
        if !(self.s_factor > 0.0 && self.s_factor <= 1.0) {
            return Err(Error::validation(format!(
                "minibatch fraction must lie in (0, 1], got {}",
                self.s_factor
            )));
        }
        if !self.epsilon.is_finite() {
            return Err(Error::validation("epsilon must be finite".to_string()));
        }
        if self.schedule.is_empty() {
            return Err(Error::validation("schedule has no stages".to_string()));
        }
        for w in self.schedule.windows(2) {
            if w[1].ell_max < w[0].ell_max {
                return Err(Error::validation(format!(
                    "schedule degrees must be nondecreasing, got {} after {}",
                    w[1].ell_max, w[0].ell_max
                )));
            }
        }
        if self.schedule.iter().any(|s| s.max_iters == 0) {
            return Err(Error::validation("each stage needs at least one iteration".to_string()));
        }
        if let StopRule::Validation { patches } = self.stop {
            if patches == 0 {
                return Err(Error::validation(
                    "validation minibatch must be nonempty".to_string(),
                ));
            }
        }
        if self.memory_budget == 0 {
            return Err(Error::validation("memory budget must be positive".to_string()));
        }
        Ok(())
    }

    /// `floor(S * n)` patches per minibatch.
    pub fn minibatch_size(&self, n_patches: usize) -> Result<usize> {
        let b = (self.s_factor * n_patches as f64).floor() as usize;
        if b == 0 {
            return Err(Error::validation(format!(
                "minibatch fraction {} of {n_patches} patches rounds down to zero",
                self.s_factor
            )));
        }
        Ok(b.min(n_patches))
    }
}

// Independent ChaCha streams under one master seed. Per-iteration minibatch
// streams are offset so they can never collide with the named ones.
pub(crate) const STREAM_GRID: u64 = 1;
pub(crate) const STREAM_INIT: u64 = 2;
pub(crate) const STREAM_VALIDATION: u64 = 3;
pub(crate) const STREAM_MINIBATCH_BASE: u64 = 1 << 32;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn subseed(seed: u64, stream: u64) -> u64 {
    stream_rng(seed, stream).next_u64()
}

/// Sorted patch indices for iteration `k`: a uniform draw without
/// replacement, or all patches when the minibatch covers the whole set.
pub fn minibatch_indices(seed: u64, iteration: u64, n_patches: usize, batch: usize) -> Vec<usize> {
    assert!(batch > 0 && batch <= n_patches);
    if batch == n_patches {
        return (0..n_patches).collect();
    }
    let mut rng = stream_rng(seed, STREAM_MINIBATCH_BASE + iteration);
    let mut idx = rand::seq::index::sample(&mut rng, n_patches, batch).into_vec();
    idx.sort_unstable();
    idx
}

/// Scalar diagnostics for one iteration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterationRecord {
    pub stage: usize,
    pub ell_max: usize,
    /// Global iteration index, counted across stages.
    pub iteration: usize,
    /// Per-patch surrogate objective on the training minibatch.
    pub q_minibatch: f64,
    /// Per-patch marginal log-likelihood on the training minibatch.
    pub loglik_minibatch: f64,
    /// The value the stopping rule compares (training or validation).
    pub q_stop: f64,
    pub wall_secs: f64,
}

/// Full state of a run after an iteration; also the checkpoint payload.
#[derive(Debug, Clone)]
pub struct EmState {
    pub x: VolumeCoefficients,
    pub rho: ShiftDistribution,
    /// Number of completed parameter updates.
    pub iteration: usize,
    pub stage: usize,
    pub ell_max: usize,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
}

impl EmState {
    pub fn q_history(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.q_stop).collect()
    }
}
