//! Special functions and the two truncated bases the reconstruction lives
//! in: spherical Bessel / spherical harmonic products for the volume, and
//! bandlimited disk prolates for projection images.

pub mod bessel;
pub mod harmonics;
pub mod legendre;
pub mod params;
pub mod pswf;
pub mod quadrature;
pub mod rotation;
pub mod wigner;
pub mod zernike;

pub use params::BandlimitParams;
pub use pswf::{pixel_coord, PswfBasis, PswfPair};
pub use rotation::{sample_uniform_rotation, Rotation, RotationGrid};
pub use wigner::{wigner_d_matrix, wigner_d_stack, wigner_small_d, WignerTables};
