//! Particle picking from a fitted model and its scoring against the
//! simulator's ground truth.
//!
//! Each patch gets the MAP shift of the rotation-marginalized posterior. A
//! patch is declared empty when that shift lies on the zero-template cross
//! or when the posterior-weighted template energy falls below a fraction of
//! the expected noise energy. Scoring computes the empty-detection F1 with
//! empty as the positive class and, over patches at least half-occupied by
//! one projection, the fraction localized within one pixel per axis.

use crate::basis::params::BandlimitParams;
use crate::basis::pswf::PswfBasis;
use crate::basis::rotation::RotationGrid;
use crate::basis::wigner::WignerTables;
use crate::em::estep::{eval_patch_image, lnrho_table, TemplateBank};
use crate::em::precompute::{PairTransforms, PhiTable};
use crate::em::state::{PatchSet, ShiftDistribution};
use crate::error::{Error, Result};
use crate::forward::beta::BetaTable;
use crate::forward::coeffs::VolumeCoefficients;
use crate::forward::patch::is_empty_shift;
use crate::simulate::Micrograph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default energy threshold: empty when the posterior-weighted template
/// energy is below this fraction of `L^2 sigma^2`.
pub const DEFAULT_EMPTY_ENERGY_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchPick {
    /// MAP shift of the rotation-marginalized posterior.
    pub shift: (usize, usize),
    pub empty: bool,
    /// Posterior mass of the picked shift.
    pub mass: f64,
    /// Posterior-weighted template energy.
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PickResult {
    pub picks: Vec<PatchPick>,
    /// True when every template is identically zero, which collapses the
    /// picked shifts to the prior argmax.
    pub degenerate: bool,
}

/// MAP-shift picking over a patch set.
pub fn pick(
    set: &PatchSet,
    params: &BandlimitParams,
    x: &VolumeCoefficients,
    rho: &ShiftDistribution,
    grid: &RotationGrid,
    theta: f64,
) -> Result<PickResult> {
    set.validate()?;
    rho.validate()?;
    if params.grid_size != set.l {
        return Err(Error::validation(format!(
            "bandlimit grid size {} does not match patch size {}",
            params.grid_size, set.l
        )));
    }
    if rho.side() != 2 * set.l {
        return Err(Error::validation(format!(
            "shift distribution side {} does not match the lattice side {}",
            rho.side(),
            2 * set.l
        )));
    }
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::validation(format!(
            "energy threshold must be finite and nonnegative, got {theta}"
        )));
    }
    let basis = PswfBasis::build(params)?;
    let beta = BetaTable::build(params, &basis)?;
    let wigner = WignerTables::build(grid, params.ell_max);
    // Picking problems are patch sized, so the overlap tables stay small.
    let tr = PairTransforms::build(&basis, u64::MAX)?;
    let phi = PhiTable::build(params, &beta, &basis, &wigner);
    let bank = TemplateBank::build(&tr, &phi, &basis, x)?;
    let degenerate = bank.energy.iter().all(|e| e.iter().all(|&v| v == 0.0));
    let lnrho = lnrho_table(rho);
    let l = set.l;
    let floor = theta * (l * l) as f64 * set.sigma2;

    let picks: Vec<PatchPick> = set
        .patches
        .par_iter()
        .map(|patch| {
            let eval = eval_patch_image(&tr, &bank, patch, &lnrho, set.sigma2);
            let side = 2 * l;
            let mut best = (0usize, 0usize);
            let mut best_mass = f64::NEG_INFINITY;
            let mut energy = 0.0;
            for sx in 0..side {
                for sy in 0..side {
                    let mut mass = 0.0;
                    for w in 0..grid.len() {
                        let p = eval.post[(w, sx, sy)];
                        mass += p;
                        energy += p * bank.energy[w][(sx, sy)];
                    }
                    if mass > best_mass {
                        best_mass = mass;
                        best = (sx, sy);
                    }
                }
            }
            let empty = is_empty_shift(best, l) || energy < floor;
            PatchPick { shift: best, empty, mass: best_mass, energy }
        })
        .collect();
    Ok(PickResult { picks, degenerate })
}

/// Ground-truth pose of one patch, derived from the simulator's placements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchTruth {
    /// Shift of the placement with the largest overlap; `None` when no
    /// projection touches the patch.
    pub shift: Option<(usize, usize)>,
    /// Overlap area of that placement as a fraction of the patch.
    pub overlap: f64,
    /// True when that overlap covers at least half the patch.
    pub half_occupied: bool,
}

/// Per-patch ground truth for micrographs tiled the way
/// [`PatchSet::from_micrographs`] tiles them.
///
/// A projection with corner `(a, b)` overlapping the tile at `(ti, tj)`
/// appears in that patch at the lattice shift
/// `((ti L - a) mod 2L, (tj L - b) mod 2L)`, which is exactly the shift the
/// patch-formation model assigns to it.
pub fn patch_truths(micrographs: &[Micrograph], l: usize) -> Result<Vec<PatchTruth>> {
    if micrographs.is_empty() {
        return Err(Error::validation("no micrographs given".to_string()));
    }
    let mut out = Vec::new();
    for (idx, m) in micrographs.iter().enumerate() {
        if m.l_proj != l {
            return Err(Error::validation(format!(
                "micrograph {idx} carries projections of side {}, not the patch side {l}",
                m.l_proj
            )));
        }
        let n = m.pixels.nrows();
        if n % l != 0 {
            return Err(Error::validation(format!(
                "micrograph {idx} side {n} is not a multiple of the patch side {l}"
            )));
        }
        let tiles = n / l;
        let li = l as i64;
        for ti in 0..tiles as i64 {
            for tj in 0..tiles as i64 {
                let mut best_area = 0i64;
                let mut best_shift = None;
                for p in &m.placements {
                    let dx = p.corner[0] as i64 - ti * li;
                    let dy = p.corner[1] as i64 - tj * li;
                    if dx.abs() >= li || dy.abs() >= li {
                        continue;
                    }
                    let area = (li - dx.abs()) * (li - dy.abs());
                    if area > best_area {
                        best_area = area;
                        best_shift = Some((
                            (-dx).rem_euclid(2 * li) as usize,
                            (-dy).rem_euclid(2 * li) as usize,
                        ));
                    }
                }
                out.push(PatchTruth {
                    shift: best_shift,
                    overlap: best_area as f64 / (li * li) as f64,
                    half_occupied: 2 * best_area >= li * li,
                });
            }
        }
    }
    Ok(out)
}

/// Picking metrics against ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PickReport {
    pub picks: Vec<PatchPick>,
    pub degenerate: bool,
    /// F1 for empty-patch detection, empty as the positive class.
    pub f1_empty: f64,
    pub precision: f64,
    pub sensitivity: f64,
    /// Fraction of half-occupied patches whose picked shift is within one
    /// pixel per axis (circularly) of the true shift.
    pub localization_accuracy: f64,
    pub n_true_empty: usize,
    pub n_half_occupied: usize,
}

fn circular_within(a: usize, b: usize, side: usize, tol: usize) -> bool {
    let d = (a as i64 - b as i64).rem_euclid(side as i64) as usize;
    d <= tol || side - d <= tol
}

/// Score predictions against per-patch ground truth.
pub fn score_picks(result: &PickResult, truths: &[PatchTruth], l: usize) -> Result<PickReport> {
    if result.picks.len() != truths.len() {
        return Err(Error::validation(format!(
            "{} picks but {} ground-truth patches",
            result.picks.len(),
            truths.len()
        )));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    let mut n_half = 0usize;
    let mut localized = 0usize;
    for (pick, truth) in result.picks.iter().zip(truths) {
        let truly_empty = truth.shift.is_none();
        match (pick.empty, truly_empty) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
        if truth.half_occupied {
            n_half += 1;
            let want = truth.shift.expect("half-occupied patch has a shift");
            if circular_within(pick.shift.0, want.0, 2 * l, 1)
                && circular_within(pick.shift.1, want.1, 2 * l, 1)
            {
                localized += 1;
            }
        }
    }
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let sensitivity = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1_empty =
        if 2 * tp + fp + fn_ == 0 { 1.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
    let localization_accuracy = if n_half == 0 { 1.0 } else { localized as f64 / n_half as f64 };
    Ok(PickReport {
        picks: result.picks.clone(),
        degenerate: result.degenerate,
        f1_empty,
        precision,
        sensitivity,
        localization_accuracy,
        n_true_empty: truths.iter().filter(|t| t.shift.is_none()).count(),
        n_half_occupied: n_half,
    })
}

/// F1 of the classifier that marks every patch empty; the low-SNR floor.
pub fn all_empty_baseline_f1(truths: &[PatchTruth]) -> f64 {
    if truths.is_empty() {
        return 1.0;
    }
    let e = truths.iter().filter(|t| t.shift.is_none()).count() as f64 / truths.len() as f64;
    2.0 * e / (1.0 + e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::micrograph::{place_method_two, Placement};
    use crate::simulate::{GenMethod, PlacementMode, SimConfig};
    use crate::forward::patch::patch_template;
    use crate::forward::project::project;
    use ndarray::Array2;

    struct Fixture {
        params: BandlimitParams,
        basis: PswfBasis,
        beta: BetaTable,
        grid: RotationGrid,
        x: VolumeCoefficients,
    }

    fn fixture(l: usize, ell_max: usize, k: usize) -> Fixture {
        let params = BandlimitParams::new(0.5, l, ell_max).unwrap();
        let basis = PswfBasis::build(&params).unwrap();
        let beta = BetaTable::build(&params, &basis).unwrap();
        let grid = RotationGrid::uniform(k, 77);
        let x = VolumeCoefficients::random_real(&params, 71);
        Fixture { params, basis, beta, grid, x }
    }

    /// Projections vanish outside the inscribed disk, so a label is only
    /// recoverable when its window actually shows some template mass.
    fn visible_energy(f: &Fixture, w: usize, shift: (usize, usize)) -> f64 {
        let img = project(&f.x, &f.beta, &f.basis, &f.grid.rotations[w]).unwrap().image;
        patch_template(&img.view(), shift).iter().map(|v| v * v).sum()
    }

    #[test]
    fn noiseless_patches_pick_their_generating_pose() {
        let f = fixture(5, 2, 3);
        let rho = ShiftDistribution::uniform(5);
        let (set, labels) = PatchSet::sample_from_model(
            &f.x, &f.basis, &f.beta, &f.grid, &rho, 1e-10, 30, 44,
        )
        .unwrap();
        let result = pick(&set, &f.params, &f.x, &rho, &f.grid, 0.05).unwrap();
        assert!(!result.degenerate);
        let mut recovered = 0;
        for (p, (shift, w)) in result.picks.iter().zip(&labels) {
            if visible_energy(&f, *w, *shift) > 1e-6 {
                assert_eq!(p.shift, *shift, "label ({shift:?}, {w})");
                assert!(!p.empty);
                recovered += 1;
            } else {
                // Nothing of the projection is visible; the patch is pure
                // noise and must be flagged empty.
                assert!(p.empty, "signal-free patch at {shift:?} not flagged");
            }
        }
        assert!(recovered >= 10, "only {recovered} informative labels");
    }

    #[test]
    fn zero_volume_degenerates_to_the_prior_argmax() {
        let f = fixture(5, 1, 2);
        let mut rho = ShiftDistribution::uniform(5);
        rho.rho[(2, 3)] *= 50.0;
        rho.normalize();
        let zero = VolumeCoefficients::zeros(&f.params);
        let (set, _) = PatchSet::sample_from_model(
            &f.x, &f.basis, &f.beta, &f.grid, &rho, 0.5, 8, 45,
        )
        .unwrap();
        let result = pick(&set, &f.params, &zero, &rho, &f.grid, 0.05).unwrap();
        assert!(result.degenerate);
        for p in &result.picks {
            assert_eq!(p.shift, (2, 3));
            assert!(p.empty);
            assert_eq!(p.energy, 0.0);
        }
    }

    /// Scaling demands well separated posteriors: near ties may flip under
    /// the rounding reshuffle, so keep the noise small.
    #[test]
    fn consistent_rescaling_leaves_picks_unchanged() {
        let f = fixture(5, 1, 3);
        let rho = ShiftDistribution::uniform(5);
        let (set, _) = PatchSet::sample_from_model(
            &f.x, &f.basis, &f.beta, &f.grid, &rho, 1e-6, 20, 46,
        )
        .unwrap();
        let base = pick(&set, &f.params, &f.x, &rho, &f.grid, 0.05).unwrap();

        let c = 3.0;
        let scaled_patches: Vec<Array2<f64>> =
            set.patches.iter().map(|p| p.mapv(|v| c * v)).collect();
        let scaled_set = PatchSet::new(scaled_patches, set.sigma2 * c * c).unwrap();
        let mut scaled_x = f.x.clone();
        for v in &mut scaled_x.data {
            *v *= c;
        }
        let scaled = pick(&scaled_set, &f.params, &scaled_x, &rho, &f.grid, 0.05).unwrap();
        for (a, b) in base.picks.iter().zip(scaled.picks.iter()) {
            assert_eq!(a.empty, b.empty);
            // Signal-free patches tie across shifts up to FFT roundoff, and
            // rescaling reshuffles that roundoff; only decisive picks must
            // keep their shift.
            if !a.empty {
                assert_eq!(a.shift, b.shift);
            }
        }
    }

    /// The ground-truth shift formula must reproduce the patch pixels via
    /// the patch-formation model, and picking must recover it.
    #[test]
    fn truth_shifts_match_the_patch_model() {
        let f = fixture(5, 2, 3);
        let l = 5usize;
        let rot = f.grid.rotations[1];
        let img = project(&f.x, &f.beta, &f.basis, &rot).unwrap().image;
        let n = 3 * l;
        let corner = [4usize, 9];
        let mut pixels = Array2::<f64>::zeros((n, n));
        for i in 0..l {
            for j in 0..l {
                pixels[(corner[0] + i, corner[1] + j)] = img[(i, j)];
            }
        }
        let m = Micrograph {
            pixels,
            sigma2: 1e-8,
            placements: vec![Placement { corner, rotation: rot }],
            l_proj: l,
        };
        let truths = patch_truths(std::slice::from_ref(&m), l).unwrap();
        assert_eq!(truths.len(), 9);

        // Tile (1, 2) covers rows 5..10, cols 10..15: offsets (-1, -1).
        let t12 = truths[1 * 3 + 2];
        assert_eq!(t12.shift, Some((1, 1)));
        assert!(t12.half_occupied);
        assert!((t12.overlap - 16.0 / 25.0).abs() < 1e-12);
        // Tile (0, 1) covers rows 0..5, cols 5..10: offsets (4, 4).
        let t01 = truths[1];
        assert_eq!(t01.shift, Some((6, 6)));
        assert!(!t01.half_occupied);
        assert!((t01.overlap - 1.0 / 25.0).abs() < 1e-12);
        // Tile (0, 0) sees nothing.
        assert_eq!(truths[0].shift, None);
        assert_eq!(truths[0].overlap, 0.0);

        // The claimed shift reproduces each overlapping tile bit for bit.
        let set = PatchSet::from_micrographs(std::slice::from_ref(&m), l).unwrap();
        for (patch, truth) in set.patches.iter().zip(&truths) {
            if let Some(shift) = truth.shift {
                let template = patch_template(&img.view(), shift);
                for (a, b) in patch.iter().zip(template.iter()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }

        // Noiseless picking recovers every shift whose window shows signal;
        // the disk support zeroes corner pixels, so a sliver overlap can be
        // literally invisible.
        let rho = ShiftDistribution::uniform(l);
        let result = pick(&set, &f.params, &f.x, &rho, &f.grid, 0.05).unwrap();
        let report = score_picks(&result, &truths, l).unwrap();
        assert_eq!(report.localization_accuracy, 1.0);
        assert_eq!(report.n_half_occupied, 1);
        let mut recovered = 0;
        for (p, t) in result.picks.iter().zip(&truths) {
            match t.shift {
                Some(shift) if visible_energy(&f, 1, shift) > 1e-6 => {
                    assert_eq!(p.shift, shift, "patch with overlap {}", t.overlap);
                    assert!(!p.empty);
                    recovered += 1;
                }
                _ => assert!(p.empty, "invisible patch not flagged empty"),
            }
        }
        assert_eq!(recovered, 3);
    }

    #[test]
    fn scoring_counts_match_a_hand_tally() {
        let l = 4usize;
        let mk = |shift, empty| PatchPick { shift, empty, mass: 0.5, energy: 1.0 };
        let result = PickResult {
            picks: vec![
                mk((0, 4), true),   // true empty, predicted empty: TP
                mk((1, 4), true),   // true empty, predicted empty: TP
                mk((2, 2), false),  // true empty, predicted occupied: FN
                mk((3, 3), true),   // occupied, predicted empty: FP
                mk((1, 1), false),  // occupied, correct shift
                mk((2, 7), false),  // half-occupied, off by (1, 1): localized
            ],
            degenerate: false,
        };
        let truths = vec![
            PatchTruth { shift: None, overlap: 0.0, half_occupied: false },
            PatchTruth { shift: None, overlap: 0.0, half_occupied: false },
            PatchTruth { shift: None, overlap: 0.0, half_occupied: false },
            PatchTruth { shift: Some((3, 3)), overlap: 0.2, half_occupied: false },
            PatchTruth { shift: Some((1, 1)), overlap: 0.9, half_occupied: true },
            PatchTruth { shift: Some((1, 6)), overlap: 0.6, half_occupied: true },
        ];
        let report = score_picks(&result, &truths, l).unwrap();
        assert!((report.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((report.sensitivity - 2.0 / 3.0).abs() < 1e-12);
        assert!((report.f1_empty - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.n_true_empty, 3);
        assert_eq!(report.n_half_occupied, 2);
        assert_eq!(report.localization_accuracy, 1.0);
        // Baseline: e = 1/2, F1 = 2e/(1+e) = 2/3.
        assert!((all_empty_baseline_f1(&truths) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn circular_distance_wraps_at_the_lattice_edge() {
        assert!(circular_within(0, 9, 10, 1));
        assert!(circular_within(9, 0, 10, 1));
        assert!(!circular_within(0, 8, 10, 1));
        assert!(circular_within(5, 5, 10, 0));
    }

    /// Localization accuracy must not improve when the noise grows 100x on
    /// identical geometry.
    #[test]
    fn localization_degrades_with_noise() {
        let f = fixture(5, 2, 4);
        let config = |snr: f64, seed: u64| SimConfig {
            n: 15,
            gamma: 0.3,
            snr,
            mode: PlacementMode::Arbitrary,
            method: GenMethod::ExpandedVolume,
            seed,
            downsample_to: None,
        };
        let rho = ShiftDistribution::uniform(5);
        let mut acc_hi = 0.0;
        let mut acc_lo = 0.0;
        for seed in 0..10 {
            let mut mics_hi = Vec::new();
            let mut mics_lo = Vec::new();
            for rep in 0..3 {
                let base =
                    place_method_two(&f.x, &f.params, &f.basis, &f.beta, &config(10.0, seed * 3 + rep))
                        .unwrap();
                let mut hi = base.clone();
                crate::simulate::add_noise(&mut hi, 10.0, seed * 3 + rep).unwrap();
                let mut lo = base;
                crate::simulate::add_noise(&mut lo, 0.1, seed * 3 + rep).unwrap();
                mics_hi.push(hi);
                mics_lo.push(lo);
            }
            let truths = patch_truths(&mics_hi, 5).unwrap();
            let set_hi = PatchSet::from_micrographs(&mics_hi, 5).unwrap();
            let set_lo = PatchSet::from_micrographs(&mics_lo, 5).unwrap();
            let r_hi = pick(&set_hi, &f.params, &f.x, &rho, &f.grid, 0.05).unwrap();
            let r_lo = pick(&set_lo, &f.params, &f.x, &rho, &f.grid, 0.05).unwrap();
            acc_hi += score_picks(&r_hi, &truths, 5).unwrap().localization_accuracy;
            acc_lo += score_picks(&r_lo, &truths, 5).unwrap().localization_accuracy;
        }
        assert!(
            acc_hi >= acc_lo,
            "localization improved with noise: {acc_hi} vs {acc_lo}"
        );
    }
}
