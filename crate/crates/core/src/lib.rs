//! Monte Carlo simulation and verification for stochastic control of SDEs
//! driven by SDE-intensity self-exciting jump processes.
//!
//! * [`process`] simulates the counting process, its marks and intensity.
//! * [`path_engine`] solves the controlled state equation on event-aware grids.
//! * [`martingale`] builds compensators and tests the martingale property.
//! * [`control`] evaluates the performance functional, the Hamiltonian and
//!   its partials, the linear adjoint BSDE and directional derivatives.
//! * [`logutility`] reproduces the log-utility problem end to end.

// Negated comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod logutility;
pub mod martingale;
pub mod path_engine;
pub mod process;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use stats::MCEstimate;
