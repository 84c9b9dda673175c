use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use super::performance::{ControlProblem, MCConfig};
use super::policy::{Bounds, ControlPolicy};
use super::reward::TerminalFn;
use crate::error::{invalid, Error, Result};
use crate::path_engine::{
    brownian_increments, simulate_state_with, LogLinear, Scheme, StateCoefficients, StatePath, TimeGrid,
};
use crate::process::{simulate_events_from, EventPath, EventState};
use crate::stats::{KahanSum, MCEstimate};

/// Default number of continuation paths per conditional expectation.
pub const DEFAULT_INNER_PATHS: usize = 256;

/// `dΓ = Γ_{t−}(α dt + vol dB + κ dU)` from `Γ = 1` at the grid start, by the
/// same scheme as the state equation and on the same noise.
pub fn gamma_process(
    coeffs: &LogLinear,
    events: &EventPath,
    grid: &TimeGrid,
    increments: Vec<f64>,
    scheme: Scheme,
) -> Result<StatePath> {
    let as_state = StateCoefficients::LogLinear(coeffs.clone());
    let zero = ControlPolicy::constant(Bounds::unbounded(), 0.0);
    simulate_state_with(&as_state, &zero, events, grid, increments, 1.0, scheme, 0)
}

pub type PathFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Linear BSDE `p_t = E[(Γ_T/Γ_t)F + ∫_t^T (Γ_s/Γ_t)φ_s ds | F_t]` with
/// `φ_s = driver(s, X_s)` and `F = terminal(X_T)`.
#[derive(Clone)]
pub struct LinearBsde {
    pub gamma: LogLinear,
    pub driver: PathFn,
    pub terminal: TerminalFn,
}

impl fmt::Debug for LinearBsde {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LinearBsde {{ gamma: {:?}, .. }}", self.gamma)
    }
}

impl LinearBsde {
    pub fn new(
        gamma: LogLinear,
        driver: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        terminal: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { gamma, driver: Arc::new(driver), terminal: Arc::new(terminal) }
    }
}

/// Where nested paths branch off an outer path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    pub path_id: u64,
    pub events: EventState,
    pub x: f64,
}

impl BranchPoint {
    /// Branch point at knot `t` of an outer path.
    pub fn from_path(events: &EventPath, state: &StatePath, t: f64) -> Result<Self> {
        Ok(Self { path_id: state.path_id, events: events.state_at(t)?, x: state.at_knot(t)? })
    }
}

/// One continuation sample of the BSDE representation.
fn inner_sample(
    problem: &ControlProblem,
    policy: &ControlPolicy,
    bsde: &LinearBsde,
    branch: &BranchPoint,
    mc: &MCConfig,
    inner: u64,
) -> Result<f64> {
    let key = mc.key(branch.path_id).branch(inner + 1);
    let events =
        simulate_events_from(&problem.model, &problem.kernel, &branch.events, mc.horizon, &key, mc.max_events)?;
    if events.max_events_hit {
        return Err(Error::Explosion { path: branch.path_id, cap: mc.max_events });
    }
    let grid = TimeGrid::for_path(mc.horizon, mc.base_steps, &events)?;
    let increments = brownian_increments(&grid, &key);
    let x = simulate_state_with(
        &problem.coeffs,
        policy,
        &events,
        &grid,
        increments.clone(),
        branch.x,
        mc.scheme,
        branch.path_id,
    )?;
    let g = gamma_process(&bsde.gamma, &events, &grid, increments, mc.scheme)?;
    let mut acc = KahanSum::new();
    for k in 0..grid.steps() {
        let (t0, t1) = (grid.knots[k], grid.knots[k + 1]);
        let left = g.x_post[k] * (bsde.driver)(t0, x.x_post[k]);
        let right = g.x_pre[k + 1] * (bsde.driver)(t1, x.x_pre[k + 1]);
        acc.add(0.5 * (left + right) * (t1 - t0));
    }
    acc.add(g.terminal() * (bsde.terminal)(x.terminal()));
    let v = acc.total();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteState { path: branch.path_id, t: grid.start() })
    }
}

/// Nested Monte Carlo estimate of `p_t` at a branch point: `inner_paths`
/// continuations with fresh substreams, the state under `policy`, and `Γ`
/// from `bsde.gamma`, all by `mc.scheme`.
pub fn linear_bsde_solve(
    problem: &ControlProblem,
    policy: &ControlPolicy,
    bsde: &LinearBsde,
    branch: &BranchPoint,
    mc: &MCConfig,
    inner_paths: usize,
) -> Result<MCEstimate> {
    if inner_paths < 2 {
        return Err(Error::InsufficientPaths { needed: 2, got: inner_paths });
    }
    mc.validate()?;
    if branch.events.time > mc.horizon {
        return Err(Error::TimeOutOfRange { t: branch.events.time, lo: 0.0, hi: mc.horizon });
    }
    if !branch.x.is_finite() {
        return Err(invalid("x", "branch state must be finite"));
    }
    let samples: Vec<Result<f64>> =
        (0..inner_paths as u64).into_par_iter().map(|i| inner_sample(problem, policy, bsde, branch, mc, i)).collect();
    let samples: Vec<f64> = samples.into_iter().collect::<Result<_>>()?;
    MCEstimate::from_samples(&samples)
}
