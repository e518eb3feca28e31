//! Synthetic micrograph generation: projections placed under a spacing
//! constraint, SNR-calibrated Gaussian noise, and Fourier-crop downsampling.

pub mod downsample;
pub mod micrograph;
pub mod placement;

pub use downsample::{downsample, fourier_crop};
pub use micrograph::{
    add_noise, place_method_one, place_method_two, project_gridded, simulate_method_one,
    simulate_method_two, Micrograph, Placement,
};
pub use placement::{sample_corners, separation_ok};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spacing rule enforced between placed projections.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementMode {
    /// Corners of every pair differ by at least `2L - 1` on both axes,
    /// leaving a full projection length between supports.
    Separated,
    /// Supports are disjoint but may touch.
    Arbitrary,
}

/// How ground-truth projections are rendered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenMethod {
    /// Line sums through a gridded volume with tri-linear interpolation.
    TrueVolume,
    /// Coefficient-space synthesis, exactly matching the estimation model.
    ExpandedVolume,
}

/// Micrograph generation parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    /// Micrograph side length in pixels.
    pub n: usize,
    /// Target occupancy fraction `T L^2 / N^2`.
    pub gamma: f64,
    /// Target signal-to-noise ratio; infinity means noiseless.
    pub snr: f64,
    pub mode: PlacementMode,
    pub method: GenMethod,
    pub seed: u64,
    /// Optional projection side to Fourier-crop the finished micrograph to.
    pub downsample_to: Option<usize>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("micrograph side must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::validation(format!(
                "occupancy {} outside (0, 1)",
                self.gamma
            )));
        }
        if !(self.snr > 0.0) {
            return Err(Error::validation(format!(
                "snr {} must be positive",
                self.snr
            )));
        }
        Ok(())
    }

    /// Number of projections for side length `l`: the occupancy fraction
    /// times the number of projection-sized cells, rounded.
    pub fn target_count(&self, l: usize) -> usize {
        (self.gamma * (self.n * self.n) as f64 / (l * l) as f64).round() as usize
    }
}
