//! Reconstruction quality: volume alignment, Fourier shell correlation, and
//! particle picking scored against the simulator's ground truth.

pub mod align;
pub mod fsc;
pub mod pick;

pub use align::{align, roll_volume, rotate_volume, AlignOptions, Alignment};
pub use fsc::{fsc, FscCurve, FscShell};
pub use pick::{
    all_empty_baseline_f1, patch_truths, pick, score_picks, PatchPick, PatchTruth, PickReport,
    PickResult, DEFAULT_EMPTY_ENERGY_FRACTION,
};
