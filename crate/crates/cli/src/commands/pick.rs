//! MAP shift picking over a dataset's patches, scored against the
//! simulator's ground truth.

use std::path::Path;

use serde::Serialize;

use micrem_core::error::{Error, Result};
use micrem_core::eval::{all_empty_baseline_f1, patch_truths, pick, score_picks, PickReport};
use micrem_core::io::{config_hash, load_checkpoint_for};
use micrem_core::{BandlimitParams, PatchSet, RotationGrid, ShiftDistribution};

use super::{load_dataset, read_coefficients, write_json};
use crate::config::ExperimentConfig;

pub struct PickArgs<'a> {
    pub manifest: &'a Path,
    pub coefficients: Option<&'a Path>,
    pub checkpoint: Option<&'a Path>,
    pub energy_fraction: Option<f64>,
    pub out: &'a Path,
}

/// Scored picks plus provenance, as written to the output JSON.
#[derive(Serialize)]
struct PickOutput<'a> {
    config_hash: &'a str,
    /// F1 of the strategy that declares every patch empty; the floor any
    /// useful picker must clear.
    baseline_f1_all_empty: f64,
    report: &'a PickReport,
}

pub fn run(cfg: &ExperimentConfig, args: PickArgs<'_>) -> Result<i32> {
    let hash = config_hash(cfg)?;
    let l = cfg.basis.patch_size;
    let (_, mics) = load_dataset(args.manifest, l)?;
    let set = PatchSet::from_micrographs(&mics, l)?;

    let (x, rho) = match (args.coefficients, args.checkpoint) {
        (Some(p), None) => (read_coefficients(p)?, ShiftDistribution::uniform(l)),
        (None, Some(p)) => {
            let state = load_checkpoint_for(p, &hash)?;
            (state.x, state.rho)
        }
        _ => {
            return Err(Error::validation(
                "pass exactly one of --coefficients or --checkpoint",
            ))
        }
    };
    let params =
        BandlimitParams::with_threshold(cfg.basis.c, l, x.ell_max, cfg.basis.pswf_truncation)?;
    if params.s_of_ell != x.s_of_ell {
        return Err(Error::validation(
            "coefficients were produced under different bandlimit parameters",
        ));
    }

    let grid = RotationGrid::uniform(cfg.em.k_rotations, cfg.em.seed);
    let theta = args.energy_fraction.unwrap_or(cfg.pick.energy_fraction);
    let result = pick(&set, &params, &x, &rho, &grid, theta)?;
    if result.degenerate {
        log::warn!("every template has zero energy; picks follow the shift prior");
    }

    let truths = patch_truths(&mics, l)?;
    let report = score_picks(&result, &truths, l)?;
    let baseline = all_empty_baseline_f1(&truths);
    log::info!(
        "empty-detection F1 {:.4} (all-empty baseline {:.4}), precision {:.4}, sensitivity {:.4}",
        report.f1_empty,
        baseline,
        report.precision,
        report.sensitivity
    );
    log::info!(
        "localization accuracy {:.4} over {} half-occupied patches",
        report.localization_accuracy,
        report.n_half_occupied
    );
    write_json(
        args.out,
        &PickOutput { config_hash: &hash, baseline_f1_all_empty: baseline, report: &report },
    )?;

    let mut ok = true;
    if let Some(t) = cfg.pick.min_f1 {
        if report.f1_empty < t {
            log::error!("F1 {:.4} is below the configured minimum {t}", report.f1_empty);
            ok = false;
        }
    }
    if let Some(t) = cfg.pick.min_localization {
        if report.localization_accuracy < t {
            log::error!(
                "localization {:.4} is below the configured minimum {t}",
                report.localization_accuracy
            );
            ok = false;
        }
    }
    Ok(if ok { 0 } else { 1 })
}
