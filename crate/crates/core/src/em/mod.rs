//! Stochastic EM for volume and shift-prior estimation from patch sets.

pub mod estep;
pub mod mstep;
pub mod precompute;
pub mod runner;
pub mod state;

pub use estep::{patch_likelihood, posterior, TemplateBank};
pub use mstep::{
    assemble_direct, assemble_from_tensors, assemble_system, solve_m_step_x, update_rho,
    NormalSystem,
};
pub use precompute::{precompute_g, q_tables, GTensor, PairTransforms, PhiTable, QTensor};
pub use runner::{run, run_with, RunOptions};
pub use state::{
    minibatch_indices, EmConfig, EmState, IterationRecord, PatchSet, ShiftDistribution, StageSpec,
    StopRule,
};
