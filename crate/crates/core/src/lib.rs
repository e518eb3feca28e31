//! Simulation of cryo-EM micrographs and 3-D structure recovery directly from
//! micrograph patches, without particle picking.
//!
//! The library is organised around the pipeline stages:
//!
//! * [`basis`]: spherical Bessel / spherical harmonic / Wigner-D primitives,
//!   2-D prolate spheroidal wave functions on the disk, rotation grids, and
//!   the truncation bookkeeping that ties them together.
//! * [`forward`]: volume coefficients, the coefficient-to-projection map, and
//!   the pad/shift/crop patch former.
//! * [`simulate`]: synthetic micrograph generation (projection placement,
//!   noise calibration, Fourier-crop downsampling).
//! * [`em`]: the stochastic approximate expectation-maximization engine that
//!   estimates volume coefficients and the patch shift distribution.
//! * [`eval`]: volume alignment, Fourier shell correlation, and particle
//!   picking / localization scoring.
//! * [`io`]: MRC volumes/images, JSON manifests, binary basis caches and
//!   checkpoints.

pub mod basis;
pub mod em;
pub mod error;
pub mod eval;
pub mod fft;
pub mod forward;
pub mod io;
pub mod simulate;

pub use basis::{BandlimitParams, PswfBasis, Rotation, RotationGrid};
pub use em::{EmConfig, EmState, PatchSet, ShiftDistribution};
pub use error::{Error, Result};
pub use eval::{Alignment, FscCurve, PickReport};
pub use forward::{BetaTable, Projection, VolumeCoefficients};
pub use simulate::{GenMethod, Micrograph, Placement, PlacementMode, SimConfig};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
