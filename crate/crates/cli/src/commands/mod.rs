//! One module per subcommand plus helpers they share. Every command returns
//! the process exit code, reserving `Err` for real failures.

pub mod cache;
pub mod evaluate;
pub mod pick;
pub mod reconstruct;
pub mod render;
pub mod simulate;

use std::fs;
use std::path::Path;

use serde::Serialize;

use micrem_core::error::{Error, Result};
use micrem_core::io::SimManifest;
use micrem_core::{Micrograph, VolumeCoefficients};

use crate::config::ExperimentConfig;

/// Effective configuration echoed next to every artifact set so a directory
/// is self-describing.
#[derive(Serialize)]
struct ConfigEcho<'a> {
    config_hash: &'a str,
    config: &'a ExperimentConfig,
}

pub(crate) fn write_config_echo(dir: &Path, cfg: &ExperimentConfig, hash: &str) -> Result<()> {
    let echo = ConfigEcho { config_hash: hash, config: cfg };
    let text = serde_json::to_string_pretty(&echo)
        .map_err(|e| Error::validation(format!("config serialization failed: {e}")))?;
    fs::write(dir.join("run_config.json"), text)?;
    Ok(())
}

/// Volume coefficients from a JSON artifact; parse failures are format
/// errors because the file was machine written.
pub(crate) fn read_coefficients(path: &Path) -> Result<VolumeCoefficients> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::validation(format!("serialization failed: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

/// Load a manifest and its micrographs, checking they carry projections of
/// the configured patch size.
pub(crate) fn load_dataset(
    manifest_path: &Path,
    patch_size: usize,
) -> Result<(SimManifest, Vec<Micrograph>)> {
    let manifest = SimManifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mics = manifest.load_micrographs(dir)?;
    for m in &mics {
        if m.l_proj != patch_size {
            return Err(Error::validation(format!(
                "micrographs carry projections of side {}, but the configured patch size is {}",
                m.l_proj, patch_size
            )));
        }
    }
    Ok((manifest, mics))
}
