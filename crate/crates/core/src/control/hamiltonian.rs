use serde::Serialize;

use super::reward::RunningReward;
use crate::error::Result;
use crate::martingale::{marker_value, segment_mark, MarkerProcess};
use crate::path_engine::StateCoefficients;
use crate::process::EventPath;

/// Adjoint values `(p, q, w)` at one time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AdjointTriple {
    pub p: f64,
    pub q: f64,
    pub w: f64,
}

impl AdjointTriple {
    pub fn new(p: f64, q: f64, w: f64) -> Self {
        Self { p, q, w }
    }

    /// `p_T = g'(X_T)`; `q` and `w` vanish at the horizon.
    pub fn terminal(reward: &RunningReward, x_terminal: f64) -> Self {
        Self { p: reward.g_prime(x_terminal), q: 0.0, w: 0.0 }
    }
}

/// Current segment mark and intensity of the driving path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathContext {
    pub marker: f64,
    pub intensity: f64,
}

impl PathContext {
    /// Context at `t`; at the path start the marker takes its right limit.
    pub fn at(events: &EventPath, t: f64) -> Result<Self> {
        let marker =
            if t <= events.start { segment_mark(events, 0)? } else { marker_value(&MarkerProcess::linear(events), t)? };
        Ok(Self { marker, intensity: events.intensity(t) })
    }
}

/// Inputs shared by the Hamiltonian and its partials.
#[derive(Debug, Clone, Copy)]
pub struct HamiltonianPoint {
    pub t: f64,
    pub x: f64,
    pub pi: f64,
    pub adjoint: AdjointTriple,
    pub context: PathContext,
}

/// `h + (b + Ȳλγ)p + σq + λ(Ȳ²γ + Ȳx)w`.
pub fn hamiltonian(at: &HamiltonianPoint, coeffs: &StateCoefficients, reward: &RunningReward) -> f64 {
    let HamiltonianPoint {
        t,
        x,
        pi,
        adjoint: AdjointTriple { p, q, w },
        context: PathContext { marker: y, intensity: l },
    } = *at;
    let gamma = coeffs.gamma(t, x, pi);
    reward.h(t, x, pi)
        + (coeffs.b(t, x, pi) + y * l * gamma) * p
        + coeffs.sigma(t, x, pi) * q
        + l * (y * y * gamma + y * x) * w
}

/// `∂H/∂x`, affine in `(p, q, w)`.
pub fn hamiltonian_dx(at: &HamiltonianPoint, coeffs: &StateCoefficients, reward: &RunningReward) -> f64 {
    let HamiltonianPoint {
        t,
        x,
        pi,
        adjoint: AdjointTriple { p, q, w },
        context: PathContext { marker: y, intensity: l },
    } = *at;
    let d = coeffs.partials(t, x, pi);
    reward.dh_dx(t, x, pi) + (d.db_dx + y * l * d.dgamma_dx) * p + d.dsigma_dx * q + l * w * (y + y * y * d.dgamma_dx)
}

/// `∂H/∂π`.
pub fn hamiltonian_dpi(at: &HamiltonianPoint, coeffs: &StateCoefficients, reward: &RunningReward) -> f64 {
    let HamiltonianPoint {
        t,
        x,
        pi,
        adjoint: AdjointTriple { p, q, w },
        context: PathContext { marker: y, intensity: l },
    } = *at;
    let d = coeffs.partials(t, x, pi);
    reward.dh_dpi(t, x, pi) + (d.db_dpi + y * l * d.dgamma_dpi) * p + d.dsigma_dpi * q + l * w * y * y * d.dgamma_dpi
}
