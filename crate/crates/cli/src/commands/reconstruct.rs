//! Estimate volume coefficients from a simulated dataset, checkpointing
//! every update so an interrupted run resumes exactly.

use std::fs;
use std::path::Path;
use std::time::Instant;

use micrem_core::em::{run_with, RunOptions};
use micrem_core::error::Result;
use micrem_core::forward::render_volume;
use micrem_core::io::{
    config_hash, load_checkpoint_for, load_or_build_basis, save_checkpoint, write_mrc_volume,
};
use micrem_core::{EmState, PatchSet};

use super::{load_dataset, write_config_echo, write_json};
use crate::config::ExperimentConfig;

pub fn run(
    cfg: &ExperimentConfig,
    manifest_path: &Path,
    out: &Path,
    resume: Option<&Path>,
    cache: Option<&Path>,
) -> Result<i32> {
    fs::create_dir_all(out)?;
    let ckpt_dir = out.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    let hash = config_hash(cfg)?;

    let (_, mics) = load_dataset(manifest_path, cfg.basis.patch_size)?;
    let set = PatchSet::from_micrographs(&mics, cfg.basis.patch_size)?;
    log::info!(
        "{} patches of side {}, noise variance {:.6}",
        set.patches.len(),
        set.l,
        set.sigma2
    );

    let base = cfg.params()?;
    let basis = load_or_build_basis(&base, cache)?;
    let resume_state = match resume {
        // Refusing a mismatched hash keeps a resumed trajectory identical to
        // the uninterrupted one.
        Some(p) => Some(load_checkpoint_for(p, &hash)?),
        None => None,
    };
    if let Some(s) = &resume_state {
        log::info!(
            "resuming at update {} (stage {}, ell_max {})",
            s.iteration,
            s.stage,
            s.ell_max
        );
    }

    let mut snapshot = |state: &EmState| {
        let path = ckpt_dir.join(format!("iter_{:04}.ckpt", state.iteration));
        save_checkpoint(path, state, &hash)?;
        if let Some(r) = state.records.last() {
            log::info!(
                "stage {} ell_max {} update {}: stop statistic {:.6e} ({:.2}s)",
                r.stage,
                r.ell_max,
                r.iteration,
                r.q_stop,
                r.wall_secs
            );
        }
        Ok(())
    };
    let opts = RunOptions {
        init: None,
        resume: resume_state,
        on_iteration: Some(&mut snapshot),
        basis: Some(&basis),
    };
    let t0 = Instant::now();
    let state = run_with(&set, &base, &cfg.em, opts)?;
    log::info!(
        "finished after {} updates in {:.1}s",
        state.iteration,
        t0.elapsed().as_secs_f64()
    );

    save_checkpoint(out.join("state_final.ckpt"), &state, &hash)?;
    write_json(&out.join("coefficients.json"), &state.x)?;
    let mut csv =
        String::from("stage,ell_max,iteration,q_minibatch,loglik_minibatch,q_stop,wall_secs\n");
    for r in &state.records {
        csv.push_str(&format!(
            "{},{},{},{:.10e},{:.10e},{:.10e},{:.3}\n",
            r.stage, r.ell_max, r.iteration, r.q_minibatch, r.loglik_minibatch, r.q_stop,
            r.wall_secs
        ));
    }
    fs::write(out.join("history.csv"), csv)?;
    match render_volume(&state.x, &base) {
        Ok(v) => write_mrc_volume(out.join("volume.mrc"), &v)?,
        // Even patch sizes cannot be rendered on a centered grid; the
        // coefficients and checkpoint above still carry the full result.
        Err(e) => log::warn!("volume rendering skipped: {e}"),
    }
    write_config_echo(out, cfg, &hash)?;
    Ok(0)
}
