//! Performance functional, Hamiltonian, adjoint equation and directional
//! derivatives of the self-exciting control problem.

mod bsde;
mod hamiltonian;
mod performance;
mod policy;
mod reward;
mod sensitivity;

pub use bsde::{gamma_process, linear_bsde_solve, BranchPoint, LinearBsde, PathFn, DEFAULT_INNER_PATHS};
pub use hamiltonian::{hamiltonian, hamiltonian_dpi, hamiltonian_dx, AdjointTriple, HamiltonianPoint, PathContext};
pub use performance::{
    paired_performance, path_reward, performance, performance_samples, ControlProblem, MCConfig, PairedEstimate,
    Scenario,
};
pub use policy::{Bounds, ControlPolicy, Direction, FeedbackFn, PolicyKind};
pub use reward::{RunningReward, TerminalFn};
pub use sensitivity::{derivative_process, directional_derivative, DEFAULT_Y_STEP};
