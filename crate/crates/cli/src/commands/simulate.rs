//! Generate micrographs, their manifest, and the ground truth they came
//! from. Everything a later `reconstruct`, `pick` or `evaluate` needs lands
//! in one directory.

use std::fs;
use std::path::Path;

use micrem_core::error::{Error, Result};
use micrem_core::forward::{fit_volume, render_volume};
use micrem_core::io::{
    config_hash, load_or_build_basis, read_mrc_volume, write_mrc_image, write_mrc_volume,
    MicrographRecord, SimManifest,
};
use micrem_core::simulate::{simulate_method_one, simulate_method_two};
use micrem_core::{BetaTable, GenMethod, VolumeCoefficients};

use super::{write_config_echo, write_json};
use crate::config::{ExperimentConfig, TruthSpec};

pub fn run(cfg: &ExperimentConfig, out: &Path, cache: Option<&Path>) -> Result<i32> {
    fs::create_dir_all(out)?;
    let hash = config_hash(cfg)?;
    let params = cfg.params()?;
    let l = cfg.basis.patch_size;
    let method = cfg.sim.config.method;

    // Ground truth: coefficients drive the model-exact generator, a gridded
    // volume drives the line-sum generator; keep whichever we have or can
    // derive so both can be archived.
    let mut x: Option<VolumeCoefficients> = None;
    let mut vol = None;
    match &cfg.sim.truth {
        TruthSpec::RandomCoefficients { seed } => {
            x = Some(VolumeCoefficients::random_real(&params, *seed));
        }
        TruthSpec::VolumeFile { path } => {
            let v = read_mrc_volume(path)?;
            if v.shape() != [l, l, l] {
                return Err(Error::validation(format!(
                    "truth volume has shape {:?}, expected the patch size cube [{l}, {l}, {l}]",
                    v.shape()
                )));
            }
            if method == GenMethod::ExpandedVolume {
                x = Some(fit_volume(&params, &v)?);
            }
            vol = Some(v);
        }
    }
    if method == GenMethod::TrueVolume && vol.is_none() {
        vol = Some(render_volume(x.as_ref().expect("one truth source"), &params)?);
    }
    let model = match method {
        GenMethod::ExpandedVolume => {
            let basis = load_or_build_basis(&params, cache)?;
            let beta = BetaTable::build(&params, &basis)?;
            Some((basis, beta))
        }
        GenMethod::TrueVolume => None,
    };

    let mut records = Vec::with_capacity(cfg.sim.count);
    for i in 0..cfg.sim.count {
        let mut per = cfg.sim.config.clone();
        per.seed = per.seed.wrapping_add(i as u64);
        let m = match method {
            GenMethod::TrueVolume => simulate_method_one(vol.as_ref().unwrap(), &per)?,
            GenMethod::ExpandedVolume => {
                let (basis, beta) = model.as_ref().unwrap();
                simulate_method_two(x.as_ref().unwrap(), &params, basis, beta, &per)?
            }
        };
        let file = format!("micrograph_{i:03}.mrc");
        write_mrc_image(out.join(&file), &m.pixels)?;
        log::info!(
            "{file}: {} placements, noise variance {:.6}",
            m.placements.len(),
            m.sigma2
        );
        records.push(MicrographRecord::new(file, &m));
    }
    SimManifest::new(cfg.sim.config.clone(), records)?.save(out.join("manifest.json"))?;

    if let Some(x) = &x {
        write_json(&out.join("truth_coefficients.json"), x)?;
    }
    match (&vol, l % 2) {
        (Some(v), _) => write_mrc_volume(out.join("truth_volume.mrc"), v)?,
        (None, 1) => {
            let v = render_volume(x.as_ref().unwrap(), &params)?;
            write_mrc_volume(out.join("truth_volume.mrc"), &v)?;
        }
        // Rendering inverts on a centered grid and needs an odd side.
        (None, _) => log::info!("skipping truth_volume.mrc: patch size {l} is even"),
    }
    write_config_echo(out, cfg, &hash)?;
    log::info!("wrote {} micrographs to {}", cfg.sim.count, out.display());
    Ok(0)
}
