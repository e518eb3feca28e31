//! Data-independent tables for the normal-equation assembly.
//!
//! The quadratic form behind each M-step factors through two objects that
//! never change across iterations: windowed overlaps of shifted basis images
//! (`PairTransforms::povl`) and per-rotation maps from volume coefficients to
//! prolate coefficients (`PhiTable`). The fully materialized tensors over
//! `(shift, rotation)` are only affordable on small problems, so building
//! them is guarded by an explicit byte budget.

use crate::basis::params::BandlimitParams;
use crate::basis::pswf::PswfBasis;
use crate::basis::wigner::WignerTables;
use crate::error::{Error, Result};
use crate::fft::{forward_real, Fft2};
use crate::forward::beta::BetaTable;
use crate::forward::coeffs::VolumeCoefficients;
use crate::forward::patch::zero_pad_double;
use crate::C64;
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rayon::prelude::*;
use std::ops::Range;

/// Content rows of the crop window at shift component `s`: the set of source
/// rows `u < L` with `(i + s) mod 2L == u` for some window row `i < L`.
/// Empty exactly on the zero cross `s == L`.
pub(crate) fn visible_span(s: usize, l: usize) -> Range<usize> {
    assert!(s < 2 * l);
    match s.cmp(&l) {
        std::cmp::Ordering::Less => s..l,
        std::cmp::Ordering::Equal => 0..0,
        std::cmp::Ordering::Greater => 0..(s - l),
    }
}

/// Inclusive-exclusive prefix table: `out[u][v] = sum of a[..u, ..v]`.
fn prefix_sums(a: &Array2<C64>) -> Array2<C64> {
    let (r, c) = a.dim();
    let mut out = Array2::zeros((r + 1, c + 1));
    for u in 0..r {
        for v in 0..c {
            out[(u + 1, v + 1)] = out[(u, v + 1)] + out[(u + 1, v)] - out[(u, v)] + a[(u, v)];
        }
    }
    out
}

/// Block sum over `rows x cols` from a prefix table; exactly zero for empty
/// ranges because identical prefix entries cancel bit-for-bit.
fn block_sum(prefix: &Array2<C64>, rows: &Range<usize>, cols: &Range<usize>) -> C64 {
    prefix[(rows.end, cols.end)] - prefix[(rows.start, cols.end)]
        - prefix[(rows.end, cols.start)]
        + prefix[(rows.start, cols.start)]
}

/// Shift-independent machinery shared by the E-step and the assembly: FFTs
/// of the padded basis images and the windowed pair-overlap table.
pub struct PairTransforms {
    pub l: usize,
    pub fft: Fft2,
    /// Forward DFT of each zero-padded basis image, `2L x 2L` per pair.
    pub fpsi: Vec<Array2<C64>>,
    /// `povl[s_x * 2L + s_y][(a, b)] = sum over the crop window at that shift
    /// of `conj(psi_a) * psi_b`; Hermitian in `(a, b)`, exactly zero on the
    /// shift cross.
    pub povl: Vec<DMatrix<C64>>,
}

impl PairTransforms {
    /// Estimated resident size in bytes for patch side `l` and `pairs` basis
    /// images.
    pub fn estimate_bytes(l: usize, pairs: usize) -> u64 {
        let side2 = (2 * l * 2 * l) as u64;
        let p = pairs as u64;
        16 * (side2 * p * p + side2 * p)
    }

    pub fn build(basis: &PswfBasis, budget: u64) -> Result<Self> {
        let l = basis.grid_size;
        let p = basis.pair_count();
        let needed = Self::estimate_bytes(l, p);
        if needed > budget {
            return Err(Error::MemoryBudget {
                needed,
                budget,
                what: format!("pair overlap table ({p} pairs, patch side {l})"),
            });
        }
        let side = 2 * l;
        let fft = Fft2::new(side);
        let fpsi: Vec<Array2<C64>> = basis
            .psi
            .iter()
            .map(|img| {
                let mut padded = Array2::zeros((side, side));
                padded.slice_mut(ndarray::s![..l, ..l]).assign(img);
                fft.forward(&mut padded);
                padded
            })
            .collect();

        let spans: Vec<Range<usize>> = (0..side).map(|s| visible_span(s, l)).collect();
        // Upper triangle per unordered pair, mirrored by conjugation.
        let entries: Vec<((usize, usize), Vec<C64>)> = (0..p)
            .flat_map(|a| (a..p).map(move |b| (a, b)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(a, b)| {
                let prod =
                    Array2::from_shape_fn((l, l), |ij| basis.psi[a][ij].conj() * basis.psi[b][ij]);
                let prefix = prefix_sums(&prod);
                let mut vals = Vec::with_capacity(side * side);
                for sx in 0..side {
                    for sy in 0..side {
                        vals.push(block_sum(&prefix, &spans[sx], &spans[sy]));
                    }
                }
                ((a, b), vals)
            })
            .collect();
        let mut povl = vec![DMatrix::<C64>::zeros(p, p); side * side];
        for ((a, b), vals) in entries {
            for (flat, v) in vals.into_iter().enumerate() {
                povl[flat][(a, b)] = v;
                povl[flat][(b, a)] = v.conj();
            }
        }
        Ok(PairTransforms { l, fft, fpsi, povl })
    }

    /// Circular cross-correlations of one patch against every padded basis
    /// image: `maps[pair][(s_x, s_y)] = sum_{ij} patch[i,j] *
    /// (Z psi)[(i+s_x) mod 2L, (j+s_y) mod 2L]`.
    pub fn correlation_maps(&self, patch: &Array2<f64>) -> Vec<Array2<C64>> {
        let fzp = forward_real(&self.fft, &zero_pad_double(&patch.view()));
        self.fpsi
            .iter()
            .map(|fp| {
                let mut buf = Array2::from_shape_fn(fzp.dim(), |ij| fzp[ij].conj() * fp[ij]);
                self.fft.inverse(&mut buf);
                buf
            })
            .collect()
    }
}

/// Per-rotation linear maps from volume coefficients to prolate
/// coefficients: `phi[w][(pair, r)] = beta[l,s;|N|,n] * D^l_{N,m}(omega_w)`
/// for coefficient label `r = (l, m, s)`.
pub struct PhiTable {
    pub labels: Vec<(usize, i64, usize)>,
    pub phi: Vec<DMatrix<C64>>,
}

impl PhiTable {
    pub fn build(
        params: &BandlimitParams,
        beta: &BetaTable,
        basis: &PswfBasis,
        wigner: &WignerTables,
    ) -> Self {
        assert!(wigner.lmax >= params.ell_max, "Wigner tables truncated below the schedule");
        let labels = VolumeCoefficients::zeros(params).labels();
        let p = basis.pair_count();
        let m = labels.len();
        let phi = (0..wigner.tables.len())
            .into_par_iter()
            .map(|w| {
                let mut mat = DMatrix::<C64>::zeros(p, m);
                for (pi, pair) in basis.pairs.iter().enumerate() {
                    let n_abs = pair.n_ang.unsigned_abs() as usize;
                    for (r, &(l, mm, s)) in labels.iter().enumerate() {
                        if l < n_abs || (l + n_abs) % 2 == 1 {
                            continue;
                        }
                        mat[(pi, r)] = beta.value(l, s, n_abs, pair.n_rad)
                            * wigner.d(w, l, pair.n_ang as i64, mm);
                    }
                }
                mat
            })
            .collect();
        PhiTable { labels, phi }
    }

    pub fn coeff_count(&self) -> usize {
        self.labels.len()
    }

    pub fn rotation_count(&self) -> usize {
        self.phi.len()
    }

    /// Prolate coefficients of the projection at grid rotation `w`.
    pub fn project(&self, w: usize, x: &VolumeCoefficients) -> Vec<C64> {
        let xv = DVector::from_column_slice(&x.data);
        (&self.phi[w] * xv).iter().copied().collect()
    }
}

/// Materialized normal-equation tensor `g` over `(shift, rotation)`: one
/// Hermitian coefficient-space matrix per lattice point and grid rotation.
pub struct GTensor {
    pub side: usize,
    pub k: usize,
    /// Indexed by `shift_flat * k + w`.
    pub g: Vec<DMatrix<C64>>,
}

impl GTensor {
    pub fn at(&self, shift: (usize, usize), w: usize) -> &DMatrix<C64> {
        &self.g[(shift.0 * self.side + shift.1) * self.k + w]
    }
}

/// Contract the overlap table with the rotation maps:
/// `g(shift, w) = phi_w^H povl(shift) phi_w`, mirrored to be exactly
/// Hermitian. Only viable on small problems; refuses beyond `budget` bytes.
pub fn precompute_g(tr: &PairTransforms, phi: &PhiTable, budget: u64) -> Result<GTensor> {
    let side = 2 * tr.l;
    let k = phi.rotation_count();
    let m = phi.coeff_count();
    let needed = (side * side * k * m * m) as u64 * 16;
    if needed > budget {
        return Err(Error::MemoryBudget {
            needed,
            budget,
            what: format!("g tensor ({side}x{side} shifts, {k} rotations, {m} coefficients)"),
        });
    }
    let adjoints: Vec<DMatrix<C64>> = phi.phi.iter().map(|p| p.adjoint()).collect();
    let adjoints = &adjoints;
    let g = (0..side * side)
        .into_par_iter()
        .flat_map_iter(|flat| {
            let povl = &tr.povl[flat];
            (0..k).map(move |w| {
                let mut mat = &adjoints[w] * povl * &phi.phi[w];
                for r in 0..m {
                    mat[(r, r)] = C64::new(mat[(r, r)].re, 0.0);
                    for c in r + 1..m {
                        let v = mat[(r, c)];
                        mat[(c, r)] = v.conj();
                    }
                }
                mat
            })
        })
        .collect();
    Ok(GTensor { side, k, g })
}

/// Per-patch linear-term tensor `q`: for each `(shift, rotation)` the vector
/// `q[r] = sum_pair conj(phi_w[pair, r]) * conj(u[pair](shift))` built from
/// the patch correlation maps `u`.
pub struct QTensor {
    pub side: usize,
    pub k: usize,
    /// Indexed by `shift_flat * k + w`.
    pub q: Vec<DVector<C64>>,
}

impl QTensor {
    pub fn at(&self, shift: (usize, usize), w: usize) -> &DVector<C64> {
        &self.q[(shift.0 * self.side + shift.1) * self.k + w]
    }
}

pub fn q_tables(tr: &PairTransforms, phi: &PhiTable, patch: &Array2<f64>) -> QTensor {
    let side = 2 * tr.l;
    let k = phi.rotation_count();
    let maps = tr.correlation_maps(patch);
    let pairs = maps.len();
    let adjoints: Vec<DMatrix<C64>> = phi.phi.iter().map(|p| p.adjoint()).collect();
    let mut q = Vec::with_capacity(side * side * k);
    let mut u_conj = DVector::<C64>::zeros(pairs);
    for sx in 0..side {
        for sy in 0..side {
            for (p, map) in maps.iter().enumerate() {
                u_conj[p] = map[(sx, sy)].conj();
            }
            for adj in adjoints.iter() {
                q.push(adj * &u_conj);
            }
        }
    }
    QTensor { side, k, q }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::rotation::RotationGrid;
    use crate::forward::project::project_coeffs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn toy() -> (BandlimitParams, PswfBasis, BetaTable) {
        let params = BandlimitParams::new(0.5, 5, 2).unwrap();
        let basis = PswfBasis::build(&params).unwrap();
        let beta = BetaTable::build(&params, &basis).unwrap();
        (params, basis, beta)
    }

    fn padded_psi(basis: &PswfBasis, pair: usize) -> Array2<C64> {
        let l = basis.grid_size;
        let mut out = Array2::zeros((2 * l, 2 * l));
        out.slice_mut(ndarray::s![..l, ..l]).assign(&basis.psi[pair]);
        out
    }

    #[test]
    fn visible_span_covers_the_three_regimes() {
        assert_eq!(visible_span(0, 5), 0..5);
        assert_eq!(visible_span(3, 5), 3..5);
        assert_eq!(visible_span(5, 5), 0..0);
        assert_eq!(visible_span(7, 5), 0..2);
        assert_eq!(visible_span(9, 5), 0..4);
    }

    #[test]
    fn overlap_table_matches_direct_window_sums() {
        let (_, basis, _) = toy();
        let tr = PairTransforms::build(&basis, 1 << 30).unwrap();
        let l = basis.grid_size;
        let side = 2 * l;
        let pick = [(0usize, 0usize), (0, 3), (2, 7), (5, 5), (1, 11)];
        for &(a, b) in &pick {
            let pa = padded_psi(&basis, a);
            let pb = padded_psi(&basis, b);
            for &(sx, sy) in &[(0, 0), (2, 3), (l, 1), (l + 2, l + 4), (side - 1, side - 1)] {
                let mut want = C64::new(0.0, 0.0);
                for i in 0..l {
                    for j in 0..l {
                        let u = (i + sx) % side;
                        let v = (j + sy) % side;
                        want += pa[(u, v)].conj() * pb[(u, v)];
                    }
                }
                let got = tr.povl[sx * side + sy][(a, b)];
                assert!(
                    (got - want).norm() <= 1e-13 * (1.0 + want.norm()),
                    "pair ({a},{b}) shift ({sx},{sy}): got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn overlap_table_is_hermitian_and_zero_on_the_cross() {
        let (_, basis, _) = toy();
        let tr = PairTransforms::build(&basis, 1 << 30).unwrap();
        let l = basis.grid_size;
        let side = 2 * l;
        let p = basis.pair_count();
        for flat in [0, 3, side * side - 1] {
            let m = &tr.povl[flat];
            for a in 0..p {
                for b in 0..p {
                    assert_eq!(m[(a, b)], m[(b, a)].conj());
                }
            }
        }
        for s in 0..side {
            for &flat in &[l * side + s, s * side + l] {
                assert!(
                    tr.povl[flat].iter().all(|v| v.re == 0.0 && v.im == 0.0),
                    "cross shift {flat} not exactly zero"
                );
            }
        }
    }

    #[test]
    fn overlap_build_refuses_tiny_budgets() {
        let (_, basis, _) = toy();
        match PairTransforms::build(&basis, 1024) {
            Err(Error::MemoryBudget { needed, budget, .. }) => {
                assert!(needed > budget);
            }
            Err(e) => panic!("expected a budget refusal, got {e}"),
            Ok(_) => panic!("expected a budget refusal, got a build"),
        }
    }

    #[test]
    fn correlation_maps_match_direct_window_products() {
        let (_, basis, _) = toy();
        let tr = PairTransforms::build(&basis, 1 << 30).unwrap();
        let l = basis.grid_size;
        let side = 2 * l;
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let patch = Array2::from_shape_fn((l, l), |_| rng.gen::<f64>() - 0.5);
        let maps = tr.correlation_maps(&patch);
        let scale = maps[1].iter().map(|v| v.norm()).fold(0.0, f64::max);
        for &pair in &[0usize, 1, 7, basis.pair_count() - 1] {
            let pp = padded_psi(&basis, pair);
            for &(sx, sy) in &[(0, 0), (1, 4), (l, l), (side - 2, 3)] {
                let mut want = C64::new(0.0, 0.0);
                for i in 0..l {
                    for j in 0..l {
                        want += patch[(i, j)] * pp[((i + sx) % side, (j + sy) % side)];
                    }
                }
                let got = maps[pair][(sx, sy)];
                assert!(
                    (got - want).norm() <= 1e-12 * (1.0 + scale),
                    "pair {pair} shift ({sx},{sy}): got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn phi_reproduces_the_projection_coefficients() {
        let (params, basis, beta) = toy();
        let grid = RotationGrid::uniform(4, 17);
        let wigner = WignerTables::build(&grid, params.ell_max);
        let phi = PhiTable::build(&params, &beta, &basis, &wigner);
        let x = VolumeCoefficients::random_real(&params, 5);
        for w in 0..grid.len() {
            let via_phi = phi.project(w, &x);
            let direct = project_coeffs(&x, &beta, &basis, &grid.rotations[w]);
            let scale = direct.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (a, b) in via_phi.iter().zip(direct.iter()) {
                assert!((a - b).norm() <= 1e-12 * (1.0 + scale));
            }
        }
    }

    #[test]
    fn g_tensor_matches_the_naive_quadruple_loop() {
        let (params, basis, beta) = toy();
        let grid = RotationGrid::uniform(4, 23);
        let wigner = WignerTables::build(&grid, params.ell_max);
        let phi = PhiTable::build(&params, &beta, &basis, &wigner);
        let tr = PairTransforms::build(&basis, 1 << 30).unwrap();
        let g = precompute_g(&tr, &phi, 1 << 30).unwrap();
        let l = basis.grid_size;
        let side = 2 * l;
        let m = phi.coeff_count();
        let scale = g.g.iter().flat_map(|mat| mat.iter()).map(|v| v.norm()).fold(0.0, f64::max);
        // Every (shift, rotation, r, rt) entry against explicit sums over
        // basis pairs and window pixels.
        for &(sx, sy) in &[(0usize, 0usize), (2, 3), (l, 4), (side - 1, 1)] {
            for w in 0..grid.len() {
                let got = g.at((sx, sy), w);
                for r in 0..m {
                    for rt in 0..m {
                        let mut want = C64::new(0.0, 0.0);
                        for a in 0..basis.pair_count() {
                            for b in 0..basis.pair_count() {
                                let pa = phi.phi[w][(a, r)];
                                let pb = phi.phi[w][(b, rt)];
                                if pa == C64::new(0.0, 0.0) || pb == C64::new(0.0, 0.0) {
                                    continue;
                                }
                                let mut win = C64::new(0.0, 0.0);
                                let pim_a = &basis.psi[a];
                                let pim_b = &basis.psi[b];
                                for i in 0..l {
                                    for j in 0..l {
                                        let u = (i + sx) % side;
                                        let v = (j + sy) % side;
                                        if u < l && v < l {
                                            win += pim_a[(u, v)].conj() * pim_b[(u, v)];
                                        }
                                    }
                                }
                                want += pa.conj() * pb * win;
                            }
                        }
                        let err = (got[(r, rt)] - want).norm();
                        assert!(
                            err <= 1e-12 * (1.0 + scale),
                            "shift ({sx},{sy}) w {w} entry ({r},{rt}): err {err}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn g_tensor_is_exactly_hermitian_and_zero_on_the_cross() {
        let (params, basis, beta) = toy();
        let grid = RotationGrid::uniform(3, 29);
        let wigner = WignerTables::build(&grid, params.ell_max);
        let phi = PhiTable::build(&params, &beta, &basis, &wigner);
        let tr = PairTransforms::build(&basis, 1 << 30).unwrap();
        let g = precompute_g(&tr, &phi, 1 << 30).unwrap();
        let l = basis.grid_size;
        let m = phi.coeff_count();
        for mat in &g.g {
            for r in 0..m {
                for c in 0..m {
                    assert_eq!(mat[(r, c)], mat[(c, r)].conj());
                }
            }
        }
        for w in 0..grid.len() {
            let at_cross = g.at((l, l), w);
            assert!(at_cross.iter().all(|v| v.re == 0.0 && v.im == 0.0));
        }
    }

    #[test]
    fn g_build_refuses_tiny_budgets() {
        let (params, basis, beta) = toy();
        let grid = RotationGrid::uniform(2, 31);
        let wigner = WignerTables::build(&grid, params.ell_max);
        let phi = PhiTable::build(&params, &beta, &basis, &wigner);
        let tr = PairTransforms::build(&basis, 1 << 30).unwrap();
        match precompute_g(&tr, &phi, 4096) {
            Err(Error::MemoryBudget { needed, .. }) => assert!(needed > 4096),
            Err(e) => panic!("expected a budget refusal, got {e}"),
            Ok(_) => panic!("expected a budget refusal, got a build"),
        }
    }

    #[test]
    fn q_tables_contract_the_correlation_maps() {
        let (params, basis, beta) = toy();
        let grid = RotationGrid::uniform(3, 37);
        let wigner = WignerTables::build(&grid, params.ell_max);
        let phi = PhiTable::build(&params, &beta, &basis, &wigner);
        let tr = PairTransforms::build(&basis, 1 << 30).unwrap();
        let l = basis.grid_size;
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let patch = Array2::from_shape_fn((l, l), |_| rng.gen::<f64>() - 0.5);
        let q = q_tables(&tr, &phi, &patch);
        let maps = tr.correlation_maps(&patch);
        let shift = (3usize, 7usize);
        let w = 1;
        let got = q.at(shift, w);
        for r in 0..phi.coeff_count() {
            let mut want = C64::new(0.0, 0.0);
            for a in 0..basis.pair_count() {
                want += phi.phi[w][(a, r)].conj() * maps[a][shift].conj();
            }
            assert!((got[r] - want).norm() <= 1e-12 * (1.0 + want.norm()));
        }
    }
}
