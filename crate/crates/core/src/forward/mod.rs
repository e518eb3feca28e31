//! The forward model: volume coefficients to projections to patches.

pub mod beta;
pub mod coeffs;
pub mod patch;
pub mod project;
pub mod render;

pub use beta::BetaTable;
pub use coeffs::{
    embed_coeffs, from_real_dof, normalized_radial, real_basis_columns, real_dof_count,
    solve_real_constrained, to_real_dof, VolumeCoefficients,
};
pub use patch::{is_empty_shift, make_patch, patch_template, shift_crop, zero_pad_double};
pub use project::{project, project_coeffs, project_coeffs_with_d, synthesize_image, Projection};
pub use render::{ball_frequencies, fit_volume, gaussian_init, render_volume};
