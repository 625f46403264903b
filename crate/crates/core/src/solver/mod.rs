//! Explicit anisotropic diffusion inpainting: divergence operator, forward
//! Euler steps, FSI cycles and the per-level solve loop.

mod decomposition;
mod scheme;
mod stencil;

pub use decomposition::{divergence_decomposed, HWeights, Kernel2x2, KernelSet};
pub use scheme::{
    explicit_step, explicit_step_with, fsi_cycle, fsi_cycle_weighted, fsi_gamma, fsi_gammas,
    impose_dirichlet, solve_level, SolveOutcome, SolverConfig, StopMode, DEFAULT_CYCLE_LEN,
    DEFAULT_MAX_ITERATIONS, DEFAULT_TAU, TAU_MAX,
};
pub(crate) use scheme::solve_with;
pub use stencil::{divergence_stencil, Stencil};
