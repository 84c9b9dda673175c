use rayon::prelude::*;
use serde::Serialize;

use super::policy::ControlPolicy;
use super::reward::RunningReward;
use crate::error::{invalid, Error, Result};
use crate::path_engine::{brownian_increments, simulate_state_with, Scheme, StateCoefficients, StatePath, TimeGrid};
use crate::process::{simulate_events, EventPath, IntensityModel, MarkKernel, DEFAULT_MAX_EVENTS};
use crate::rng::StreamKey;
use crate::stats::{KahanSum, MCEstimate};

/// Model, state equation, reward and initial state of a control problem.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub model: IntensityModel,
    pub kernel: MarkKernel,
    pub coeffs: StateCoefficients,
    pub reward: RunningReward,
    pub x0: f64,
}

impl ControlProblem {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.kernel.validate(&self.model)?;
        if !self.x0.is_finite() {
            return Err(invalid("x0", "must be finite"));
        }
        if self.reward.needs_positive_state() && self.x0 <= 0.0 {
            return Err(invalid("x0", format!("log rewards need a positive initial state, got {}", self.x0)));
        }
        Ok(())
    }
}

/// Monte Carlo settings shared by all path functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCConfig {
    pub paths: usize,
    pub master_seed: u64,
    pub horizon: f64,
    pub base_steps: usize,
    pub scheme: Scheme,
    pub max_events: usize,
}

impl MCConfig {
    pub fn new(paths: usize, master_seed: u64, horizon: f64, base_steps: usize) -> Self {
        Self { paths, master_seed, horizon, base_steps, scheme: Scheme::Euler, max_events: DEFAULT_MAX_EVENTS }
    }

    pub fn with_scheme(self, scheme: Scheme) -> Self {
        Self { scheme, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(invalid("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if self.base_steps == 0 {
            return Err(invalid("base_steps", "must be positive"));
        }
        if self.max_events == 0 {
            return Err(invalid("max_events", "must be positive"));
        }
        Ok(())
    }

    pub fn key(&self, path: u64) -> StreamKey {
        StreamKey::new(self.master_seed, path)
    }
}

/// One simulated outer path: events, grid, and Brownian increments.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub path_id: u64,
    pub events: EventPath,
    pub grid: TimeGrid,
    pub increments: Vec<f64>,
}

impl Scenario {
    /// Draws the driving noise of path `path_id`. It does not depend on the control.
    pub fn draw(problem: &ControlProblem, mc: &MCConfig, path_id: u64) -> Result<Self> {
        let key = mc.key(path_id);
        let events = simulate_events(&problem.model, &problem.kernel, mc.horizon, &key, mc.max_events)?;
        if events.max_events_hit {
            return Err(Error::Explosion { path: path_id, cap: mc.max_events });
        }
        let grid = TimeGrid::for_path(mc.horizon, mc.base_steps, &events)?;
        let increments = brownian_increments(&grid, &key);
        Ok(Self { path_id, events, grid, increments })
    }

    pub fn state(&self, problem: &ControlProblem, policy: &ControlPolicy, scheme: Scheme) -> Result<StatePath> {
        simulate_state_with(
            &problem.coeffs,
            policy,
            &self.events,
            &self.grid,
            self.increments.clone(),
            problem.x0,
            scheme,
            self.path_id,
        )
    }
}

fn checked(value: f64, path: u64, t: f64, x: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else if x <= 0.0 {
        Err(Error::PositivityViolation { path, t, x })
    } else {
        Err(Error::NonFiniteState { path, t })
    }
}

/// `∫ h dt + g(X_T)` along one state path. The time integral uses the
/// trapezoid rule with right-continuous values at the left end of each step
/// and left limits at the right end.
pub fn path_reward(reward: &RunningReward, state: &StatePath) -> Result<f64> {
    let knots = &state.grid.knots;
    let id = state.path_id;
    let mut acc = KahanSum::new();
    for k in 0..state.grid.steps() {
        let (t0, t1) = (knots[k], knots[k + 1]);
        let h0 = checked(reward.h(t0, state.x_post[k], state.control[k]), id, t0, state.x_post[k])?;
        let h1 = checked(reward.h(t1, state.x_pre[k + 1], state.control_left[k + 1]), id, t1, state.x_pre[k + 1])?;
        acc.add(0.5 * (h0 + h1) * (t1 - t0));
    }
    let t_end = *knots.last().unwrap();
    acc.add(checked(reward.g(state.terminal()), id, t_end, state.terminal())?);
    Ok(acc.total())
}

fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

/// Per-path rewards of every policy, all driven by the same noise.
/// `result[j][i]` is the reward of policy `j` on path `i`.
pub fn performance_samples(
    problem: &ControlProblem,
    policies: &[ControlPolicy],
    mc: &MCConfig,
) -> Result<Vec<Vec<f64>>> {
    problem.validate()?;
    mc.validate()?;
    let rows: Vec<Result<Vec<f64>>> = (0..mc.paths as u64)
        .into_par_iter()
        .map(|i| {
            let scenario = Scenario::draw(problem, mc, i)?;
            policies.iter().map(|pol| path_reward(&problem.reward, &scenario.state(problem, pol, mc.scheme)?)).collect()
        })
        .collect();
    let rows = first_error(rows)?;
    Ok((0..policies.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect())
}

/// Monte Carlo estimate of `J(π) = E[∫ h dt + g(X_T)]`.
pub fn performance(problem: &ControlProblem, policy: &ControlPolicy, mc: &MCConfig) -> Result<MCEstimate> {
    if mc.paths < 2 {
        return Err(Error::InsufficientPaths { needed: 2, got: mc.paths });
    }
    let samples = performance_samples(problem, std::slice::from_ref(policy), mc)?;
    MCEstimate::from_samples(&samples[0])
}

/// `J(a)`, `J(b)` and the paired difference `J(a) − J(b)` under common random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedEstimate {
    pub first: MCEstimate,
    pub second: MCEstimate,
    pub difference: MCEstimate,
}

pub fn paired_performance(
    problem: &ControlProblem,
    first: &ControlPolicy,
    second: &ControlPolicy,
    mc: &MCConfig,
) -> Result<PairedEstimate> {
    if mc.paths < 2 {
        return Err(Error::InsufficientPaths { needed: 2, got: mc.paths });
    }
    let s = performance_samples(problem, &[first.clone(), second.clone()], mc)?;
    let diff: Vec<f64> = s[0].iter().zip(&s[1]).map(|(a, b)| a - b).collect();
    Ok(PairedEstimate {
        first: MCEstimate::from_samples(&s[0])?,
        second: MCEstimate::from_samples(&s[1])?,
        difference: MCEstimate::from_samples(&diff)?,
    })
}
