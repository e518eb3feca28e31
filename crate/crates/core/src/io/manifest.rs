//! Ground-truth sidecar manifest for simulated micrographs, and the content
//! hash that ties every artifact of a run to its configuration.
//!
//! Shift convention shipped with this schema: a placement with top-left
//! corner `(a, b)` contributes to the patch tiled at `(t_i, t_j)` (patch
//! side `L`) at the lattice shift
//!
//! ```text
//! s = ((t_i L - a) mod 2L, (t_j L - b) mod 2L)
//! ```
//!
//! which is exactly the translation the patch-formation model applies to a
//! zero-padded projection, so manifest truth and model shifts agree without
//! any further convention juggling.

use crate::basis::rotation::Rotation;
use crate::error::{Error, Result};
use crate::simulate::{Micrograph, Placement, SimConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

/// SHA-256 of a value's canonical JSON, as lowercase hex. Field order is
/// the struct declaration order, so equal configs hash equally.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)
        .map_err(|e| Error::format(format!("cannot serialize config: {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementRecord {
    /// Top-left pixel of the projection support, `(row, column)`.
    pub corner: [usize; 2],
    /// Orientation as a unit quaternion `(w, x, y, z)`.
    pub quaternion: [f64; 4],
}

impl From<&Placement> for PlacementRecord {
    fn from(p: &Placement) -> Self {
        PlacementRecord { corner: p.corner, quaternion: p.rotation.quat }
    }
}

impl PlacementRecord {
    pub fn to_placement(&self) -> Placement {
        Placement { corner: self.corner, rotation: Rotation::from_quaternion(self.quaternion) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MicrographRecord {
    /// MRC file name, relative to the manifest's directory.
    pub file: String,
    pub sigma2: f64,
    /// Side length of one projection within this micrograph.
    pub l_proj: usize,
    pub placements: Vec<PlacementRecord>,
}

impl MicrographRecord {
    pub fn new(file: impl Into<String>, m: &Micrograph) -> Self {
        MicrographRecord {
            file: file.into(),
            sigma2: m.sigma2,
            l_proj: m.l_proj,
            placements: m.placements.iter().map(PlacementRecord::from).collect(),
        }
    }
}

/// Sidecar manifest for one simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimManifest {
    pub config: SimConfig,
    /// Hash of `config`; artifacts from different hashes must not be mixed.
    pub config_hash: String,
    pub micrographs: Vec<MicrographRecord>,
}

impl SimManifest {
    pub fn new(config: SimConfig, micrographs: Vec<MicrographRecord>) -> Result<Self> {
        let config_hash = config_hash(&config)?;
        Ok(SimManifest { config, config_hash, micrographs })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(format!("cannot serialize manifest: {e}")))?;
        fs::write(path, text)?;
        Ok(())
    }

    /// Loads and re-verifies the embedded hash, so a manifest whose config
    /// was edited after the fact is refused.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        let manifest: SimManifest = serde_json::from_str(&text)
            .map_err(|e| Error::format(format!("{}: {e}", path.as_ref().display())))?;
        let expected = config_hash(&manifest.config)?;
        if manifest.config_hash != expected {
            return Err(Error::validation(format!(
                "{}: embedded config hash {} does not match the config ({expected})",
                path.as_ref().display(),
                manifest.config_hash
            )));
        }
        Ok(manifest)
    }

    /// Rebuilds the in-memory micrographs by pairing each record with its
    /// MRC payload next to the manifest.
    pub fn load_micrographs(&self, dir: impl AsRef<Path>) -> Result<Vec<Micrograph>> {
        self.micrographs
            .iter()
            .map(|rec| {
                let pixels = super::mrc::read_mrc_image(dir.as_ref().join(&rec.file))?;
                Ok(Micrograph {
                    pixels,
                    sigma2: rec.sigma2,
                    placements: rec.placements.iter().map(|p| p.to_placement()).collect(),
                    l_proj: rec.l_proj,
                })
            })
            .collect()
    }
}
