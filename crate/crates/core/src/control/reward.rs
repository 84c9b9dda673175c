use std::fmt;
use std::sync::Arc;

use crate::path_engine::CoefFn;

pub type TerminalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Running reward `h(t, x, π)` and terminal reward `g(x)`.
#[derive(Clone)]
pub enum RunningReward {
    /// `h = ln(xπ)`, `g = θ ln x`.
    LogUtility {
        theta: f64,
    },
    Custom {
        h: CoefFn,
        g: TerminalFn,
        g_prime: TerminalFn,
    },
}

impl fmt::Debug for RunningReward {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunningReward::LogUtility { theta } => write!(f, "LogUtility {{ theta: {theta} }}"),
            RunningReward::Custom { .. } => write!(f, "Custom(..)"),
        }
    }
}

fn central(f: impl Fn(f64) -> f64, at: f64) -> f64 {
    let h = crate::path_engine::fd_step(at);
    (f(at + h) - f(at - h)) / (2.0 * h)
}

impl RunningReward {
    pub fn custom(
        h: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        RunningReward::Custom { h: Arc::new(h), g: Arc::new(g), g_prime: Arc::new(g_prime) }
    }

    /// Non-positive arguments of the logarithms give NaN; callers check.
    pub fn h(&self, t: f64, x: f64, pi: f64) -> f64 {
        match self {
            RunningReward::LogUtility { .. } => {
                if x > 0.0 && pi > 0.0 {
                    (x * pi).ln()
                } else {
                    f64::NAN
                }
            }
            RunningReward::Custom { h, .. } => h(t, x, pi),
        }
    }

    pub fn g(&self, x: f64) -> f64 {
        match self {
            RunningReward::LogUtility { theta } => {
                if x > 0.0 {
                    theta * x.ln()
                } else {
                    f64::NAN
                }
            }
            RunningReward::Custom { g, .. } => g(x),
        }
    }

    pub fn g_prime(&self, x: f64) -> f64 {
        match self {
            RunningReward::LogUtility { theta } => theta / x,
            RunningReward::Custom { g_prime, .. } => g_prime(x),
        }
    }

    pub fn dh_dx(&self, t: f64, x: f64, pi: f64) -> f64 {
        match self {
            RunningReward::LogUtility { .. } => 1.0 / x,
            RunningReward::Custom { .. } => central(|v| self.h(t, v, pi), x),
        }
    }

    pub fn dh_dpi(&self, t: f64, x: f64, pi: f64) -> f64 {
        match self {
            RunningReward::LogUtility { .. } => 1.0 / pi,
            RunningReward::Custom { .. } => central(|v| self.h(t, x, v), pi),
        }
    }

    /// Whether the reward needs a positive state.
    pub fn needs_positive_state(&self) -> bool {
        matches!(self, RunningReward::LogUtility { .. })
    }
}
