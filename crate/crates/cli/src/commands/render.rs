//! Synthesize one projection of a coefficient volume at given Euler angles
//! and write it as an MRC image.

use std::path::Path;

use micrem_core::error::{Error, Result};
use micrem_core::forward::project;
use micrem_core::io::{load_or_build_basis, write_mrc_image};
use micrem_core::{BandlimitParams, BetaTable, Rotation};

use super::read_coefficients;
use crate::config::ExperimentConfig;

pub fn run(
    cfg: &ExperimentConfig,
    coefficients: &Path,
    euler: &str,
    out: &Path,
    cache: Option<&Path>,
) -> Result<i32> {
    let x = read_coefficients(coefficients)?;
    let params = BandlimitParams::with_threshold(
        cfg.basis.c,
        cfg.basis.patch_size,
        x.ell_max,
        cfg.basis.pswf_truncation,
    )?;
    if params.s_of_ell != x.s_of_ell {
        return Err(Error::validation(
            "coefficients were produced under different bandlimit parameters",
        ));
    }

    let angles: Vec<f64> = euler
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::validation(format!("--euler wants three comma-separated radians: {e}")))?;
    if angles.len() != 3 {
        return Err(Error::validation(format!(
            "--euler wants three comma-separated radians, got {}",
            angles.len()
        )));
    }
    let rot = Rotation::from_euler_zyz(angles[0], angles[1], angles[2]);

    let basis = load_or_build_basis(&params, cache)?;
    let beta = BetaTable::build(&params, &basis)?;
    let proj = project(&x, &beta, &basis, &rot)?;
    write_mrc_image(out, &proj.image)?;
    log::info!("wrote {}", out.display());
    Ok(0)
}
