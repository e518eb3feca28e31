//! Frequency-marching EM driver.
//!
//! Each iteration draws a minibatch from its own RNG stream keyed by the
//! global iteration index, runs the correlation E-step at the current
//! parameters, and applies the factorized M-step. A stage ends when its
//! iteration budget is exhausted or the stopping statistic improves by at
//! most `epsilon`; the stopping E-step is recorded but not followed by an
//! update. Because every random draw is keyed by `(seed, stream)` and all
//! reductions are merged in fixed block order, a run is a pure function of
//! `(patches, params, config, init)` at any thread count, and a checkpoint
//! resumes by replaying its record list against the schedule.

use crate::basis::params::BandlimitParams;
use crate::basis::pswf::PswfBasis;
use crate::basis::rotation::RotationGrid;
use crate::basis::wigner::WignerTables;
use crate::em::estep::{eval_patch, eval_patch_image, lnrho_table, TemplateBank};
use crate::em::mstep::{solve_m_step_x, system_from_accum, MStepAccum, PATCH_BLOCK};
use crate::em::precompute::{PairTransforms, PhiTable};
use crate::em::state::{
    minibatch_indices, stream_rng, subseed, EmConfig, EmState, IterationRecord, PatchSet,
    ShiftDistribution, StageSpec, StopRule, STREAM_GRID, STREAM_INIT, STREAM_VALIDATION,
};
use crate::error::{Error, Result};
use crate::fft::forward_real;
use crate::forward::beta::BetaTable;
use crate::forward::coeffs::{embed_coeffs, VolumeCoefficients};
use crate::forward::patch::zero_pad_double;
use ndarray::Array2;
use rayon::prelude::*;
use std::time::Instant;

/// Optional knobs for [`run_with`].
#[derive(Default)]
pub struct RunOptions<'a> {
    /// Starting volume and shift prior; a seeded Gaussian volume with a
    /// uniform prior when absent.
    pub init: Option<(VolumeCoefficients, ShiftDistribution)>,
    /// Continue a previous run from its returned or snapshotted state.
    pub resume: Option<EmState>,
    /// Called after every parameter update with the current state; an error
    /// aborts the run.
    pub on_iteration: Option<&'a mut dyn FnMut(&EmState) -> Result<()>>,
    /// Reuse a prebuilt basis (e.g. from the on-disk cache) instead of
    /// rebuilding it; must match `base` exactly.
    pub basis: Option<&'a PswfBasis>,
}

/// Run the full schedule with default options.
pub fn run(patches: &PatchSet, base: &BandlimitParams, config: &EmConfig) -> Result<EmState> {
    run_with(patches, base, config, RunOptions::default())
}

/// E-step plus sufficient statistics over the indexed patches, reduced in
/// fixed blocks so the result is independent of thread count.
pub(crate) fn estep_accumulate(
    tr: &PairTransforms,
    bank: &TemplateBank,
    lnrho: &Array2<f64>,
    set: &PatchSet,
    idx: &[usize],
) -> MStepAccum {
    let k = bank.fpad.len();
    let side = 2 * tr.l;
    let blocks: Vec<MStepAccum> = idx
        .par_chunks(PATCH_BLOCK)
        .map(|block| {
            let mut acc = MStepAccum::new(k, side);
            for &i in block {
                let patch = &set.patches[i];
                let fzp = forward_real(&tr.fft, &zero_pad_double(&patch.view()));
                let norm2 = patch.iter().map(|v| v * v).sum();
                let eval = eval_patch(tr, bank, &fzp, norm2, lnrho, set.sigma2);
                acc.add_patch(&tr.fft, &fzp, &eval.post, eval.q, eval.loglik);
            }
            acc
        })
        .collect();
    let mut total = MStepAccum::new(k, side);
    for b in blocks {
        total.merge(b);
    }
    total
}

/// Summed surrogate objective and log-likelihood over the indexed patches,
/// without the M-step statistics.
pub(crate) fn estep_diagnostics(
    tr: &PairTransforms,
    bank: &TemplateBank,
    lnrho: &Array2<f64>,
    set: &PatchSet,
    idx: &[usize],
) -> (f64, f64) {
    let sums: Vec<(f64, f64)> = idx
        .par_chunks(PATCH_BLOCK)
        .map(|block| {
            let mut q = 0.0;
            let mut ll = 0.0;
            for &i in block {
                let eval = eval_patch_image(tr, bank, &set.patches[i], lnrho, set.sigma2);
                q += eval.q;
                ll += eval.loglik;
            }
            (q, ll)
        })
        .collect();
    let mut q = 0.0;
    let mut ll = 0.0;
    for (a, b) in sums {
        q += a;
        ll += b;
    }
    (q, ll)
}

/// Where a resumed run left off inside the schedule.
struct ReplayPoint {
    stage: usize,
    stage_it: usize,
    q_prev: f64,
    updates: usize,
}

/// Walk the record list against the schedule. A stage is complete when it
/// used its full iteration budget or its last record improved on the one
/// before it by at most `epsilon` (the stop record that ended the stage).
fn replay(records: &[IterationRecord], schedule: &[StageSpec], epsilon: f64) -> Result<ReplayPoint> {
    let mut pos = 0usize;
    let mut updates = 0usize;
    for (stage, spec) in schedule.iter().enumerate() {
        let mut stage_it = 0usize;
        let mut q_prev = f64::NEG_INFINITY;
        let mut stopped = false;
        while pos < records.len() && stage_it < spec.max_iters {
            let rec = &records[pos];
            if rec.stage != stage || rec.ell_max != spec.ell_max || rec.iteration != pos {
                return Err(Error::validation(format!(
                    "checkpoint record {pos} does not match the schedule: \
                     stage {} degree {} at global index {}",
                    rec.stage, rec.ell_max, rec.iteration
                )));
            }
            pos += 1;
            if stage_it >= 1 && rec.q_stop - q_prev <= epsilon {
                stopped = true;
                break;
            }
            q_prev = rec.q_stop;
            stage_it += 1;
            updates += 1;
        }
        if !stopped && stage_it < spec.max_iters {
            // Ran out of records inside this stage: resume here.
            if pos != records.len() {
                return Err(Error::validation(
                    "checkpoint has records beyond a finished stage".to_string(),
                ));
            }
            return Ok(ReplayPoint { stage, stage_it, q_prev, updates });
        }
    }
    if pos != records.len() {
        return Err(Error::validation(
            "checkpoint has more records than the schedule allows".to_string(),
        ));
    }
    // Every stage already complete.
    Ok(ReplayPoint {
        stage: schedule.len(),
        stage_it: 0,
        q_prev: f64::NEG_INFINITY,
        updates,
    })
}

/// Run the marching schedule, optionally from an initial guess or a
/// checkpoint.
pub fn run_with(
    patches: &PatchSet,
    base: &BandlimitParams,
    config: &EmConfig,
    mut opts: RunOptions<'_>,
) -> Result<EmState> {
    config.validate()?;
    patches.validate()?;
    if base.grid_size != patches.l {
        return Err(Error::validation(format!(
            "bandlimit grid size {} does not match patch size {}",
            base.grid_size, patches.l
        )));
    }
    let top_ell = config.schedule.last().unwrap().ell_max;
    if top_ell > base.ell_max {
        return Err(Error::validation(format!(
            "schedule reaches degree {top_ell} but the basis stops at {}",
            base.ell_max
        )));
    }
    let n = patches.patches.len();
    let batch = config.minibatch_size(n)?;
    let seed = config.seed;

    let built;
    let basis = match opts.basis {
        Some(b) => {
            if b.grid_size != base.grid_size
                || b.c_eff.to_bits() != base.kernel_bandlimit().to_bits()
                || b.truncation.to_bits() != base.pswf_truncation.to_bits()
            {
                return Err(Error::validation(
                    "supplied basis was built for different bandlimit parameters",
                ));
            }
            b
        }
        None => {
            built = PswfBasis::build(base)?;
            &built
        }
    };
    let beta = BetaTable::build(base, basis)?;
    let tr = PairTransforms::build(basis, config.memory_budget)?;
    let grid = RotationGrid::uniform(config.k_rotations, subseed(seed, STREAM_GRID));
    let wigner = WignerTables::build(&grid, base.ell_max);

    let val_idx: Vec<usize> = match config.stop {
        StopRule::Literal => Vec::new(),
        StopRule::Validation { patches: v } => {
            let take = v.min(n);
            let mut idx =
                rand::seq::index::sample(&mut stream_rng(seed, STREAM_VALIDATION), n, take)
                    .into_vec();
            idx.sort_unstable();
            idx
        }
    };

    let (mut x, mut rho, mut records, start) = match opts.resume.take() {
        Some(state) => {
            if state.seed != seed {
                return Err(Error::validation(format!(
                    "checkpoint seed {} does not match configured seed {seed}",
                    state.seed
                )));
            }
            let start = replay(&state.records, &config.schedule, config.epsilon)?;
            (state.x, state.rho, state.records, start)
        }
        None => {
            let (x0, rho0) = opts.init.take().unwrap_or_else(|| {
                let first = base.restricted(config.schedule[0].ell_max);
                (
                    VolumeCoefficients::random_real(&first, subseed(seed, STREAM_INIT)),
                    ShiftDistribution::uniform(patches.l),
                )
            });
            if rho0.side() != 2 * patches.l {
                return Err(Error::validation(format!(
                    "initial shift prior side {} does not match the lattice side {}",
                    rho0.side(),
                    2 * patches.l
                )));
            }
            rho0.validate()?;
            if x0.ell_max > config.schedule[0].ell_max {
                return Err(Error::validation(format!(
                    "initial volume degree {} exceeds the first stage degree {}",
                    x0.ell_max, config.schedule[0].ell_max
                )));
            }
            let start = ReplayPoint { stage: 0, stage_it: 0, q_prev: f64::NEG_INFINITY, updates: 0 };
            (x0, rho0, Vec::new(), start)
        }
    };
    let mut updates = start.updates;

    for (stage, spec) in config.schedule.iter().enumerate().skip(start.stage) {
        let params_s = base.restricted(spec.ell_max);
        x = embed_coeffs(&x, &params_s);
        let phi = PhiTable::build(&params_s, &beta, basis, &wigner);
        let mut stage_it = if stage == start.stage { start.stage_it } else { 0 };
        let mut q_prev = if stage == start.stage { start.q_prev } else { f64::NEG_INFINITY };
        while stage_it < spec.max_iters {
            let t0 = Instant::now();
            let k_global = records.len();
            let idx = minibatch_indices(seed, k_global as u64, n, batch);
            let bank = TemplateBank::build(&tr, &phi, basis, &x)?;
            let lnrho = lnrho_table(&rho);
            let acc = estep_accumulate(&tr, &bank, &lnrho, patches, &idx);
            let q_mb = acc.q_sum / idx.len() as f64;
            let ll_mb = acc.loglik_sum / idx.len() as f64;
            let q_stop = match config.stop {
                StopRule::Literal => q_mb,
                StopRule::Validation { .. } => {
                    let (q, _) = estep_diagnostics(&tr, &bank, &lnrho, patches, &val_idx);
                    q / val_idx.len() as f64
                }
            };
            records.push(IterationRecord {
                stage,
                ell_max: spec.ell_max,
                iteration: k_global,
                q_minibatch: q_mb,
                loglik_minibatch: ll_mb,
                q_stop,
                wall_secs: t0.elapsed().as_secs_f64(),
            });
            log::info!(
                "iter {k_global} stage {stage} (degree {}): Q = {q_stop:.6}, \
                 loglik = {ll_mb:.6}, {:.2}s",
                spec.ell_max,
                t0.elapsed().as_secs_f64()
            );
            if stage_it >= 1 && q_stop - q_prev <= config.epsilon {
                break;
            }
            let sys = system_from_accum(&acc, &tr, &phi);
            x = solve_m_step_x(&params_s, &sys)?;
            let total: f64 = acc.rho_acc.iter().sum();
            if total <= 0.0 {
                return Err(Error::numerical("shift update lost all mass".to_string()));
            }
            rho = ShiftDistribution { rho: acc.rho_acc.mapv(|v| v / total) };
            q_prev = q_stop;
            stage_it += 1;
            updates += 1;
            if let Some(cb) = opts.on_iteration.as_mut() {
                let snapshot = EmState {
                    x: x.clone(),
                    rho: rho.clone(),
                    iteration: updates,
                    stage,
                    ell_max: spec.ell_max,
                    seed,
                    records: records.clone(),
                };
                cb(&snapshot)?;
            }
        }
    }

    let last = config.schedule.len() - 1;
    Ok(EmState {
        x,
        rho,
        iteration: updates,
        stage: last,
        ell_max: config.schedule[last].ell_max,
        seed,
        records,
    })
}
