use super::performance::{performance_samples, ControlProblem, MCConfig};
use super::policy::{ControlPolicy, Direction};
use crate::error::{invalid, Error, Result};
use crate::path_engine::{StateCoefficients, StatePath};
use crate::process::EventPath;
use crate::stats::MCEstimate;

/// Default central-difference step for directional derivatives.
pub const DEFAULT_Y_STEP: f64 = 1e-3;

/// Euler solution of the linear sensitivity equation
///
/// ```text
/// dx = (b_x x + b_π β) dt + (σ_x x + σ_π β) dB + (γ_x x_− + γ_π β_−) dU,  x_0 = 0
/// ```
///
/// with partials taken along `state`, on the same increments and events.
/// Returns `x` at every knot (post-jump values).
pub fn derivative_process(
    coeffs: &StateCoefficients,
    policy: &ControlPolicy,
    direction: &Direction,
    events: &EventPath,
    state: &StatePath,
) -> Result<Vec<f64>> {
    if !policy.is_open_loop() {
        return Err(Error::Unsupported("sensitivity of feedback policies".into()));
    }
    let grid = &state.grid;
    let mut out = Vec::with_capacity(grid.len());
    let mut x = 0.0;
    out.push(x);
    for k in 0..grid.steps() {
        let (t, tn) = (grid.knots[k], grid.knots[k + 1]);
        let d = coeffs.partials(t, state.x_post[k], state.control[k]);
        let beta = direction.value(t);
        let mut next = x
            + (d.db_dx * x + d.db_dpi * beta) * (tn - t)
            + (d.dsigma_dx * x + d.dsigma_dpi * beta) * state.brownian_increments[k];
        if let Some(i) = grid.event_index[k + 1] {
            let j = coeffs.partials(tn, state.x_pre[k + 1], state.control_left[k + 1]);
            next += (j.dgamma_dx * next + j.dgamma_dpi * direction.left_value(tn)) * events.marks[i];
        }
        if !next.is_finite() {
            return Err(Error::NonFiniteState { path: state.path_id, t: tn });
        }
        out.push(next);
        x = next;
    }
    Ok(out)
}

/// Central difference `(J(π + yβ) − J(π − yβ)) / 2y` with both evaluations on the same noise.
pub fn directional_derivative(
    problem: &ControlProblem,
    policy: &ControlPolicy,
    direction: &Direction,
    y_step: f64,
    mc: &MCConfig,
) -> Result<MCEstimate> {
    if !(y_step > 0.0 && y_step.is_finite()) {
        return Err(invalid("y_step", format!("must be positive, got {y_step}")));
    }
    if mc.paths < 2 {
        return Err(Error::InsufficientPaths { needed: 2, got: mc.paths });
    }
    let up = policy.perturbed(direction.clone(), y_step);
    let down = policy.perturbed(direction.clone(), -y_step);
    let s = performance_samples(problem, &[up, down], mc)?;
    let diffs: Vec<f64> = s[0].iter().zip(&s[1]).map(|(a, b)| (a - b) / (2.0 * y_step)).collect();
    MCEstimate::from_samples(&diffs)
}
