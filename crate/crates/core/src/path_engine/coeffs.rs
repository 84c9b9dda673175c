use std::fmt;
use std::sync::Arc;

/// A real function of time.
#[derive(Clone)]
pub enum TimeFn {
    Constant(f64),
    Linear { intercept: f64, slope: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl TimeFn {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TimeFn::Custom(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::Constant(c) => *c,
            TimeFn::Linear { intercept, slope } => intercept + slope * t,
            TimeFn::Custom(f) => f(t),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            TimeFn::Constant(c) => Some(*c),
            _ => None,
        }
    }
}

impl fmt::Debug for TimeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeFn::Constant(c) => write!(f, "Constant({c})"),
            TimeFn::Linear { intercept, slope } => write!(f, "Linear({intercept} + {slope}·t)"),
            TimeFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

pub type CoefFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Arbitrary `(t, x, π) ↦ ℝ` coefficients. Partials are taken by central
/// finite differences.
#[derive(Clone)]
pub struct GeneralCoefficients {
    pub b: CoefFn,
    pub sigma: CoefFn,
    pub gamma: CoefFn,
}

impl GeneralCoefficients {
    pub fn new(
        b: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        sigma: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        gamma: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { b: Arc::new(b), sigma: Arc::new(sigma), gamma: Arc::new(gamma) }
    }

    pub fn zero() -> Self {
        Self::new(|_, _, _| 0.0, |_, _, _| 0.0, |_, _, _| 0.0)
    }
}

/// `b = x(α_t − π)`, `σ = x·vol_t`, `γ = x·κ_t`.
#[derive(Debug, Clone)]
pub struct LogLinear {
    pub alpha: TimeFn,
    pub vol: TimeFn,
    pub kappa: TimeFn,
}

#[derive(Clone)]
pub enum StateCoefficients {
    General(GeneralCoefficients),
    LogLinear(LogLinear),
}

impl fmt::Debug for StateCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateCoefficients::General(_) => write!(f, "General(..)"),
            StateCoefficients::LogLinear(l) => write!(f, "{l:?}"),
        }
    }
}

/// First-order partials of `b`, `σ`, `γ` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Partials {
    pub db_dx: f64,
    pub db_dpi: f64,
    pub dsigma_dx: f64,
    pub dsigma_dpi: f64,
    pub dgamma_dx: f64,
    pub dgamma_dpi: f64,
}

pub fn fd_step(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

fn central(f: impl Fn(f64) -> f64, at: f64) -> f64 {
    let h = fd_step(at);
    (f(at + h) - f(at - h)) / (2.0 * h)
}

impl StateCoefficients {
    pub fn b(&self, t: f64, x: f64, pi: f64) -> f64 {
        match self {
            StateCoefficients::General(g) => (g.b)(t, x, pi),
            StateCoefficients::LogLinear(l) => x * (l.alpha.eval(t) - pi),
        }
    }

    pub fn sigma(&self, t: f64, x: f64, pi: f64) -> f64 {
        match self {
            StateCoefficients::General(g) => (g.sigma)(t, x, pi),
            StateCoefficients::LogLinear(l) => x * l.vol.eval(t),
        }
    }

    pub fn gamma(&self, t: f64, x: f64, pi: f64) -> f64 {
        match self {
            StateCoefficients::General(g) => (g.gamma)(t, x, pi),
            StateCoefficients::LogLinear(l) => x * l.kappa.eval(t),
        }
    }

    /// Closed form for the log-linear family, central differences otherwise.
    pub fn partials(&self, t: f64, x: f64, pi: f64) -> Partials {
        match self {
            StateCoefficients::LogLinear(l) => Partials {
                db_dx: l.alpha.eval(t) - pi,
                db_dpi: -x,
                dsigma_dx: l.vol.eval(t),
                dsigma_dpi: 0.0,
                dgamma_dx: l.kappa.eval(t),
                dgamma_dpi: 0.0,
            },
            StateCoefficients::General(_) => self.fd_partials(t, x, pi),
        }
    }

    pub fn fd_partials(&self, t: f64, x: f64, pi: f64) -> Partials {
        Partials {
            db_dx: central(|v| self.b(t, v, pi), x),
            db_dpi: central(|v| self.b(t, x, v), pi),
            dsigma_dx: central(|v| self.sigma(t, v, pi), x),
            dsigma_dpi: central(|v| self.sigma(t, x, v), pi),
            dgamma_dx: central(|v| self.gamma(t, v, pi), x),
            dgamma_dpi: central(|v| self.gamma(t, x, v), pi),
        }
    }

    /// Largest observed `|∂/∂x|` of the three coefficients over the sample
    /// points: a spot check of the Lipschitz condition in `x`.
    pub fn max_x_slope(&self, ts: &[f64], xs: &[f64], pis: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for &t in ts {
            for &x in xs {
                for &pi in pis {
                    let p = self.fd_partials(t, x, pi);
                    worst = worst.max(p.db_dx.abs()).max(p.dsigma_dx.abs()).max(p.dgamma_dx.abs());
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglinear_partials_match_finite_differences() {
        let c = StateCoefficients::LogLinear(LogLinear {
            alpha: TimeFn::Linear { intercept: 0.1, slope: 0.3 },
            vol: TimeFn::Constant(0.25),
            kappa: TimeFn::custom(|t| 0.2 + 0.1 * t.sin()),
        });
        for &(t, x, pi) in &[(0.0, 1.0, 0.5), (0.7, 3.2, 1.4), (1.0, 0.2, 0.05)] {
            let a = c.partials(t, x, pi);
            let f = c.fd_partials(t, x, pi);
            for (u, v) in [
                (a.db_dx, f.db_dx),
                (a.db_dpi, f.db_dpi),
                (a.dsigma_dx, f.dsigma_dx),
                (a.dsigma_dpi, f.dsigma_dpi),
                (a.dgamma_dx, f.dgamma_dx),
                (a.dgamma_dpi, f.dgamma_dpi),
            ] {
                assert!((u - v).abs() <= 1e-8 * u.abs().max(1.0), "{u} vs {v}");
            }
        }
    }

    #[test]
    fn lipschitz_spot_check() {
        let c =
            StateCoefficients::General(GeneralCoefficients::new(|_, x, _| 2.0 * x, |_, x, _| (x).sin(), |_, _, p| p));
        let s = c.max_x_slope(&[0.0, 1.0], &[-1.0, 0.0, 2.0], &[0.5]);
        assert!((s - 2.0).abs() < 1e-6);
    }
}
