//! Fourier shell correlation of a volume against a reference, with optional
//! rigid alignment first. The curve goes to stdout or a CSV file; summary
//! lines go to the log.

use std::fs;
use std::path::Path;

use ndarray::Array3;

use micrem_core::error::{Error, Result};
use micrem_core::eval::{align, fsc, AlignOptions};
use micrem_core::io::read_mrc_volume;
use micrem_core::FscCurve;

use crate::config::ExperimentConfig;

fn correlation(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    let ma = a.mean().unwrap_or(0.0);
    let mb = b.mean().unwrap_or(0.0);
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let (x, y) = (x - ma, y - mb);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb).sqrt()
    }
}

pub fn run(
    volume: &Path,
    reference: &Path,
    do_align: bool,
    out: Option<&Path>,
    required: Option<usize>,
    cfg: Option<&ExperimentConfig>,
) -> Result<i32> {
    let a = read_mrc_volume(volume)?;
    let b = read_mrc_volume(reference)?;
    if a.shape() != b.shape() {
        return Err(Error::validation(format!(
            "volume shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let l = a.shape()[0];

    let curve = if do_align {
        let (aligned, info) = align(&a, &b, &AlignOptions::default())?;
        log::info!(
            "aligned with correlation {:.4} (reflected {}, shift {:?})",
            info.correlation,
            info.reflected,
            info.shift
        );
        fsc(&aligned, &b)?
    } else {
        let c = correlation(&a, &b);
        if c < 0.5 {
            log::warn!(
                "raw correlation is only {c:.3}; if the volumes share a structure but not a \
                 frame, rerun with --align"
            );
        }
        fsc(&a, &b)?
    };

    let nyquist = FscCurve::nyquist_shell(l);
    // Highest shell still at or above 0.5; -1 when even shell 0 is below.
    let resolved: i64 = match curve.resolution_shell {
        None => nyquist as i64,
        Some(s) => s as i64 - 1,
    };
    match out {
        Some(p) => fs::write(p, curve.to_csv())?,
        None => print!("{}", curve.to_csv()),
    }
    log::info!("resolved through shell {resolved} of Nyquist {nyquist}");

    let required = required.or_else(|| cfg.and_then(|c| c.evaluate.resolved_through_shell));
    if let Some(r) = required {
        if resolved < r as i64 {
            log::error!("required resolution through shell {r}, got {resolved}");
            return Ok(1);
        }
    }
    Ok(0)
}
