//! Persistence: MRC images and volumes, ground-truth manifests, binary
//! basis caches, and EM checkpoints, all tied together by a config hash.

pub mod basis_cache;
pub mod checkpoint;
pub(crate) mod codec;
pub mod manifest;
pub mod mrc;

pub use basis_cache::{basis_cache_file, load_or_build_basis, read_basis_cache, write_basis_cache};
pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint};
pub use manifest::{config_hash, MicrographRecord, PlacementRecord, SimManifest};
pub use mrc::{read_mrc_image, read_mrc_volume, write_mrc_image, write_mrc_volume};
