//! Versioned binary checkpoints of the EM state.
//!
//! A checkpoint embeds the config hash of the run that produced it; loading
//! against a different configuration is refused, which keeps resumed
//! trajectories identical to uninterrupted ones.

use super::codec::{Reader, Writer};
use crate::em::state::{EmState, IterationRecord, ShiftDistribution};
use crate::error::{Error, Result};
use crate::forward::coeffs::VolumeCoefficients;
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 4] = b"MEMC";
const VERSION: u32 = 1;

pub fn save_checkpoint(path: impl AsRef<Path>, state: &EmState, config_hash: &str) -> Result<()> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.bytes(config_hash.as_bytes());
    w.u64(state.seed);
    w.usize(state.iteration);
    w.usize(state.stage);
    w.usize(state.ell_max);
    w.usize(state.x.ell_max);
    w.usize_slice(&state.x.s_of_ell);
    w.c64_slice(&state.x.data);
    w.array2_f64(&state.rho.rho);
    w.usize(state.records.len());
    for r in &state.records {
        w.usize(r.stage);
        w.usize(r.ell_max);
        w.usize(r.iteration);
        w.f64(r.q_minibatch);
        w.f64(r.loglik_minibatch);
        w.f64(r.q_stop);
        w.f64(r.wall_secs);
    }
    fs::write(path, w.buf)?;
    Ok(())
}

/// Loads a checkpoint together with the config hash it was written under.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(EmState, String)> {
    let bytes = fs::read(path.as_ref())?;
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::format(format!(
            "{}: not a checkpoint file",
            path.as_ref().display()
        )));
    }
    let mut r = Reader::new(&bytes[4..]);
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(format!(
            "{}: checkpoint version {version}, this build reads {VERSION}",
            path.as_ref().display()
        )));
    }
    let hash = String::from_utf8(r.bytes()?.to_vec())
        .map_err(|_| Error::format("config hash is not UTF-8"))?;
    let seed = r.u64()?;
    let iteration = r.usize()?;
    let stage = r.usize()?;
    let ell_max = r.usize()?;
    let x = VolumeCoefficients {
        ell_max: r.usize()?,
        s_of_ell: r.usize_vec()?,
        data: r.c64_vec()?,
    };
    let rho = ShiftDistribution { rho: r.array2_f64()? };
    let n_records = r.usize()?;
    let mut records = Vec::with_capacity(n_records.min(1 << 20));
    for _ in 0..n_records {
        records.push(IterationRecord {
            stage: r.usize()?,
            ell_max: r.usize()?,
            iteration: r.usize()?,
            q_minibatch: r.f64()?,
            loglik_minibatch: r.f64()?,
            q_stop: r.f64()?,
            wall_secs: r.f64()?,
        });
    }
    r.finish()?;
    Ok((EmState { x, rho, iteration, stage, ell_max, seed, records }, hash))
}

/// Loads a checkpoint for resumption, refusing one written under a
/// different configuration.
pub fn load_checkpoint_for(path: impl AsRef<Path>, expected_hash: &str) -> Result<EmState> {
    let (state, hash) = load_checkpoint(path.as_ref())?;
    if hash != expected_hash {
        return Err(Error::validation(format!(
            "{}: checkpoint was written under config {hash}, current config is {expected_hash}",
            path.as_ref().display()
        )));
    }
    Ok(state)
}
