//! The discretized bifurcation problem and its local branch.
//!
//! `h = H + w` is represented by nodal values of `w` on a tensor grid:
//! uniform and spectral in `q`, uniform with second-order differences in `p`.

mod blocks;
mod branch;
mod grid;
mod linear;
mod newton;
mod residual;

pub use branch::{continue_branch, Branch, BranchPoint, BranchStatus};
pub use grid::{Grid, HeightField, DEFAULT_NP, DEFAULT_NQ};
pub use linear::{
    apply_lt, discrete_bifurcation, discrete_wronskian, if0_functional, kernel_at, mode_matrix, mode_null_vector,
    mode_sigma_ratio, transversality, DiscreteBifurcation, KernelReport, LinearImage, ModeSingularity, Transversality,
    CANDIDATE_RATIO, REFINEMENT_DROP,
};
pub use newton::{newton_solve, NewtonOptions, NewtonOutcome};
pub use residual::{check_admissible, height_p, residual_f, Residual};
