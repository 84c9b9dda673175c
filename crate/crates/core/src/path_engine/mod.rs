//! Joint simulation of the Brownian driver, the self-exciting inputs and the
//! controlled state equation
//!
//! ```text
//! dX_t = b(t, X_t, π_t) dt + σ(t, X_t, π_t) dB_t + γ(t−, X_{t−}, π_{t−}) dU_t
//! ```
//!
//! on grids that contain every event time as a knot.

mod coeffs;
mod grid;
mod state;

pub use coeffs::{fd_step, CoefFn, GeneralCoefficients, LogLinear, Partials, StateCoefficients, TimeFn};
pub use grid::TimeGrid;
pub use state::{
    brownian_increments, exact_loglinear_path, exact_loglinear_state, simulate_state, simulate_state_with, JumpRule,
    Scheme, StatePath,
};
