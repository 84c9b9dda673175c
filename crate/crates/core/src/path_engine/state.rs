use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::coeffs::{LogLinear, StateCoefficients};
use super::grid::TimeGrid;
use crate::control::ControlPolicy;
use crate::error::{invalid, Error, Result};
use crate::process::EventPath;
use crate::rng::{Purpose, StreamKey};

/// Time stepping between knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Scheme {
    /// Euler–Maruyama.
    #[default]
    Euler,
    /// Log-space step of the log-linear family: trapezoid for the `dt`
    /// integral (with left limits of the control at the right end of each
    /// step), Itô sum for `∫vol dB`. Jumps stay multiplicative.
    LogExact,
}

/// How a log-linear state responds to a mark `Y` at an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum JumpRule {
    /// `X_post = X_pre·(1 + κY)`, as in the state equation.
    Multiplicative,
    /// `X_post = X_pre·exp(κY − ½κ²Y²)`, as in the closed-form exponential.
    Exponential,
}

/// Solution of the state equation on the knots of a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatePath {
    pub path_id: u64,
    pub grid: TimeGrid,
    /// `X_{t−}` at each knot (equal to `x_post` away from events).
    pub x_pre: Vec<f64>,
    /// `X_t` at each knot.
    pub x_post: Vec<f64>,
    /// `π_t` at each knot.
    pub control: Vec<f64>,
    /// `π_{t−}` at each knot.
    pub control_left: Vec<f64>,
    /// `B_{t_{k+1}} − B_{t_k}` for each step.
    pub brownian_increments: Vec<f64>,
}

impl StatePath {
    pub fn terminal(&self) -> f64 {
        *self.x_post.last().unwrap()
    }

    /// `X_t` at the knot equal to `t`.
    pub fn at_knot(&self, t: f64) -> Result<f64> {
        self.grid.knot_index(t).map(|k| self.x_post[k]).ok_or_else(|| invalid("t", format!("{t} is not a grid knot")))
    }
}

/// Normal increments over the steps of `grid`, from the path's Brownian substream.
pub fn brownian_increments(grid: &TimeGrid, key: &StreamKey) -> Vec<f64> {
    let mut rng = key.stream(Purpose::Brownian);
    grid.knots
        .windows(2)
        .map(|w| {
            let z: f64 = rng.sample(StandardNormal);
            (w[1] - w[0]).sqrt() * z
        })
        .collect()
}

/// Euler–Maruyama solution with Brownian increments drawn from `key`.
pub fn simulate_state(
    coeffs: &StateCoefficients,
    policy: &ControlPolicy,
    events: &EventPath,
    grid: &TimeGrid,
    key: &StreamKey,
    x0: f64,
) -> Result<StatePath> {
    let inc = brownian_increments(grid, key);
    simulate_state_with(coeffs, policy, events, grid, inc, x0, Scheme::Euler, key.path)
}

/// Solution driven by the given increments.
#[allow(clippy::too_many_arguments)]
pub fn simulate_state_with(
    coeffs: &StateCoefficients,
    policy: &ControlPolicy,
    events: &EventPath,
    grid: &TimeGrid,
    increments: Vec<f64>,
    x0: f64,
    scheme: Scheme,
    path_id: u64,
) -> Result<StatePath> {
    match scheme {
        Scheme::Euler => {
            let step = |t: f64, tn: f64, x: f64, pi: f64, _pi_left: f64, db: f64| {
                x + coeffs.b(t, x, pi) * (tn - t) + coeffs.sigma(t, x, pi) * db
            };
            run(coeffs, policy, events, grid, increments, x0, path_id, step, JumpRule::Multiplicative)
        }
        Scheme::LogExact => {
            let StateCoefficients::LogLinear(l) = coeffs else {
                return Err(Error::Unsupported("log-exact stepping needs log-linear coefficients".into()));
            };
            run(coeffs, policy, events, grid, increments, x0, path_id, log_step(l), JumpRule::Multiplicative)
        }
    }
}

fn log_step(l: &LogLinear) -> impl Fn(f64, f64, f64, f64, f64, f64) -> f64 + '_ {
    move |t, tn, x, pi, pi_left, db| {
        let dt = tn - t;
        let (v0, v1) = (l.vol.eval(t), l.vol.eval(tn));
        let drift = 0.5 * ((l.alpha.eval(t) - pi) + (l.alpha.eval(tn) - pi_left)) * dt;
        let ito = 0.25 * (v0 * v0 + v1 * v1) * dt;
        x * (drift - ito + v0 * db).exp()
    }
}

/// The closed-form exponential solution of the log-linear equation,
/// evaluated on every knot of `grid` with the given Brownian increments.
/// `dt` integrals use the trapezoid rule, jump integrals are exact sums.
pub fn exact_loglinear_path(
    coeffs: &LogLinear,
    policy: &ControlPolicy,
    events: &EventPath,
    grid: &TimeGrid,
    increments: Vec<f64>,
    x0: f64,
) -> Result<StatePath> {
    if !(x0 > 0.0) {
        return Err(invalid("x0", format!("must be positive, got {x0}")));
    }
    let wrapped = StateCoefficients::LogLinear(coeffs.clone());
    run(&wrapped, policy, events, grid, increments, x0, 0, log_step(coeffs), JumpRule::Exponential)
}

/// `X_t` from the closed-form exponential solution; `t` must be a knot.
pub fn exact_loglinear_state(
    coeffs: &StateCoefficients,
    policy: &ControlPolicy,
    events: &EventPath,
    grid: &TimeGrid,
    increments: Vec<f64>,
    t: f64,
    x0: f64,
) -> Result<f64> {
    let StateCoefficients::LogLinear(l) = coeffs else {
        return Err(Error::Unsupported("closed-form solution exists only for log-linear coefficients".into()));
    };
    exact_loglinear_path(l, policy, events, grid, increments, x0)?.at_knot(t)
}

#[allow(clippy::too_many_arguments)]
fn run(
    coeffs: &StateCoefficients,
    policy: &ControlPolicy,
    events: &EventPath,
    grid: &TimeGrid,
    increments: Vec<f64>,
    x0: f64,
    path_id: u64,
    step: impl Fn(f64, f64, f64, f64, f64, f64) -> f64,
    jump_rule: JumpRule,
) -> Result<StatePath> {
    if !x0.is_finite() {
        return Err(invalid("x0", "must be finite"));
    }
    if increments.len() != grid.steps() {
        return Err(Error::GridMismatch(format!("{} increments for {} grid steps", increments.len(), grid.steps())));
    }
    let loglinear = match coeffs {
        StateCoefficients::LogLinear(l) => Some(l),
        StateCoefficients::General(_) => None,
    };
    if loglinear.is_some() && x0 <= 0.0 {
        return Err(Error::PositivityViolation { path: path_id, t: grid.start(), x: x0 });
    }

    let n = grid.len();
    let mut x_pre = Vec::with_capacity(n);
    let mut x_post = Vec::with_capacity(n);
    let mut control = Vec::with_capacity(n);
    let mut control_left = Vec::with_capacity(n);
    let t0 = grid.start();
    x_pre.push(x0);
    x_post.push(x0);
    let pi0 = policy.value(t0, x0)?;
    control.push(pi0);
    control_left.push(pi0);

    for k in 0..grid.steps() {
        let (t, tn) = (grid.knots[k], grid.knots[k + 1]);
        let x = x_post[k];
        let pi = control[k];
        // Feedback rules see the start-of-step state when the stepper needs
        // the left limit of the control ahead of time.
        let pi_left_guess = policy.value_left(tn, x)?;
        let pre = step(t, tn, x, pi, pi_left_guess, increments[k]);
        if !pre.is_finite() {
            return Err(Error::NonFiniteState { path: path_id, t: tn });
        }
        let pi_left = if policy.is_open_loop() { pi_left_guess } else { policy.value_left(tn, pre)? };
        let post = match grid.event_index[k + 1] {
            None => pre,
            Some(i) => {
                let y = events.marks[i];
                match (loglinear, jump_rule) {
                    (Some(l), rule) => {
                        let kappa = l.kappa.eval(tn);
                        if kappa < 0.0 || y < 0.0 {
                            return Err(invalid(
                                "kappa",
                                format!("log-linear jumps need kappa >= 0 and marks >= 0 (kappa={kappa}, Y={y})"),
                            ));
                        }
                        match rule {
                            JumpRule::Multiplicative => pre + coeffs.gamma(tn, pre, pi_left) * y,
                            JumpRule::Exponential => {
                                let ky = kappa * y;
                                pre * (ky - 0.5 * ky * ky).exp()
                            }
                        }
                    }
                    (None, _) => pre + coeffs.gamma(tn, pre, pi_left) * y,
                }
            }
        };
        if !post.is_finite() {
            return Err(Error::NonFiniteState { path: path_id, t: tn });
        }
        if loglinear.is_some() && (pre <= 0.0 || post <= 0.0) {
            return Err(Error::PositivityViolation { path: path_id, t: tn, x: pre.min(post) });
        }
        x_pre.push(pre);
        x_post.push(post);
        control_left.push(pi_left);
        control.push(policy.value(tn, post)?);
    }

    Ok(StatePath { path_id, grid: grid.clone(), x_pre, x_post, control, control_left, brownian_increments: increments })
}
