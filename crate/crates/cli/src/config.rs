//! Experiment description loaded from a JSON file and shared by every
//! subcommand. One file pins the basis, the simulator, the EM schedule and
//! the evaluation thresholds, so its hash identifies a run end to end.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use micrem_core::basis::params::DEFAULT_PSWF_TRUNCATION;
use micrem_core::error::{Error, Result};
use micrem_core::eval::pick::DEFAULT_EMPTY_ENERGY_FRACTION;
use micrem_core::{BandlimitParams, EmConfig, SimConfig};

/// Bandlimit and patch geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisSection {
    /// Bandlimit in cycles per pixel, in `(0, 1]`.
    #[serde(default = "default_c")]
    pub c: f64,
    /// Patch and projection side length `L` in pixels.
    pub patch_size: usize,
    /// Relative prolate eigenvalue cutoff.
    #[serde(default = "default_truncation")]
    pub pswf_truncation: f64,
}

fn default_c() -> f64 {
    0.5
}

fn default_truncation() -> f64 {
    DEFAULT_PSWF_TRUNCATION
}

/// Where the simulator's ground-truth volume comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum TruthSpec {
    /// Random bandlimited coefficients with the reality symmetry.
    RandomCoefficients { seed: u64 },
    /// A cubic volume read from an MRC file, side equal to the patch size.
    VolumeFile { path: PathBuf },
}

/// Simulator parameters plus dataset shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSection {
    #[serde(flatten)]
    pub config: SimConfig,
    /// Number of micrographs to generate; micrograph `i` uses seed
    /// `sim.seed + i`.
    #[serde(default = "default_count")]
    pub count: usize,
    pub truth: TruthSpec,
}

fn default_count() -> usize {
    1
}

/// Picking controls and optional quality gates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PickSection {
    /// A pick is declared empty when its posterior-weighted template energy
    /// falls below this fraction of the patch noise energy.
    #[serde(default = "default_energy_fraction")]
    pub energy_fraction: f64,
    /// Exit nonzero when the empty-detection F1 falls below this.
    #[serde(default)]
    pub min_f1: Option<f64>,
    /// Exit nonzero when localization accuracy falls below this.
    #[serde(default)]
    pub min_localization: Option<f64>,
}

fn default_energy_fraction() -> f64 {
    DEFAULT_EMPTY_ENERGY_FRACTION
}

impl Default for PickSection {
    fn default() -> Self {
        PickSection {
            energy_fraction: DEFAULT_EMPTY_ENERGY_FRACTION,
            min_f1: None,
            min_localization: None,
        }
    }
}

/// Evaluation gates.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvalSection {
    /// Exit nonzero unless the FSC stays at or above 0.5 through this shell.
    #[serde(default)]
    pub resolved_through_shell: Option<usize>,
}

/// Everything a run needs, as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub basis: BasisSection,
    pub sim: SimSection,
    pub em: EmConfig,
    #[serde(default)]
    pub pick: PickSection,
    #[serde(default)]
    pub evaluate: EvalSection,
}

impl ExperimentConfig {
    /// Read and validate a JSON config file. Parse failures are validation
    /// errors: a config the user typed is user input, not an artifact.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
            Error::validation(format!("{}: {e}", path.display()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.em.validate()?;
        self.sim.config.validate()?;
        if self.sim.count == 0 {
            return Err(Error::validation("sim.count must be at least 1"));
        }
        if !(self.pick.energy_fraction.is_finite() && self.pick.energy_fraction >= 0.0) {
            return Err(Error::validation(format!(
                "pick.energy_fraction must be finite and nonnegative, got {}",
                self.pick.energy_fraction
            )));
        }
        for (name, t) in [
            ("pick.min_f1", self.pick.min_f1),
            ("pick.min_localization", self.pick.min_localization),
        ] {
            if let Some(t) = t {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::validation(format!(
                        "{name} must lie in [0, 1], got {t}"
                    )));
                }
            }
        }
        // Surface bad basis parameters here rather than deep in a command.
        self.params()?;
        Ok(())
    }

    /// Highest `ell_max` of the schedule; the model order of the finished
    /// reconstruction.
    pub fn model_ell_max(&self) -> usize {
        self.em
            .schedule
            .iter()
            .map(|s| s.ell_max)
            .max()
            .expect("validate() requires a nonempty schedule")
    }

    /// Bandlimit parameters at the full model order.
    pub fn params(&self) -> Result<BandlimitParams> {
        BandlimitParams::with_threshold(
            self.basis.c,
            self.basis.patch_size,
            self.model_ell_max(),
            self.basis.pswf_truncation,
        )
    }
}
