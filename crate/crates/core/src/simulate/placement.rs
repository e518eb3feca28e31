//! Sequential rejection sampling of projection corner positions.

use rand::Rng;

use super::PlacementMode;
use crate::error::{Error, Result};

/// Attempt budget per requested projection before reporting failure.
pub const MAX_ATTEMPTS_PER_PROJECTION: usize = 10_000;

/// Pairwise spacing predicate on corner positions of `l`-sized supports.
pub fn separation_ok(a: [usize; 2], b: [usize; 2], l: usize, mode: PlacementMode) -> bool {
    let dx = a[0].abs_diff(b[0]);
    let dy = a[1].abs_diff(b[1]);
    match mode {
        PlacementMode::Separated => dx >= 2 * l - 1 && dy >= 2 * l - 1,
        PlacementMode::Arbitrary => dx >= l || dy >= l,
    }
}

/// Draws corners uniformly over `{0..n-l}^2` one at a time, keeping a draw
/// only if it satisfies the spacing rule against everything kept so far.
/// Runs sequentially so the result depends only on the RNG state.
pub fn sample_corners(
    n: usize,
    l: usize,
    count: usize,
    mode: PlacementMode,
    rng: &mut impl Rng,
) -> Result<Vec<[usize; 2]>> {
    if l == 0 || l > n {
        return Err(Error::validation(format!(
            "projection side {l} does not fit micrograph side {n}"
        )));
    }
    let budget = MAX_ATTEMPTS_PER_PROJECTION.saturating_mul(count);
    let mut corners: Vec<[usize; 2]> = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while corners.len() < count {
        if attempts >= budget {
            return Err(Error::validation(format!(
                "placed {} of {count} projections in {attempts} attempts; \
                 density too high for {mode:?} spacing",
                corners.len()
            )));
        }
        attempts += 1;
        let cand = [rng.gen_range(0..=n - l), rng.gen_range(0..=n - l)];
        if corners.iter().all(|&c| separation_ok(cand, c, l, mode)) {
            corners.push(cand);
        }
    }
    Ok(corners)
}
