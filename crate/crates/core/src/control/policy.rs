use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::path_engine::TimeFn;

/// Closed admissible interval `𝒱 = [lo, hi]` for control values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || lo.is_nan() {
            return Err(invalid("bounds", format!("need lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn unbounded() -> Self {
        Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// A perturbation direction `β_t` for directional derivatives.
#[derive(Debug, Clone)]
pub enum Direction {
    Zero,
    Constant(f64),
    /// `scale · 1_{[start, T]}(t)`.
    Indicator {
        start: f64,
        scale: f64,
    },
    Custom(TimeFn),
}

impl Direction {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Direction::Zero => 0.0,
            Direction::Constant(c) => *c,
            Direction::Indicator { start, scale } => {
                if t >= *start {
                    *scale
                } else {
                    0.0
                }
            }
            Direction::Custom(f) => f.eval(t),
        }
    }

    /// Left limit `β_{t−}`.
    pub fn left_value(&self, t: f64) -> f64 {
        match self {
            Direction::Indicator { start, scale } => {
                if t > *start {
                    *scale
                } else {
                    0.0
                }
            }
            other => other.value(t),
        }
    }

    pub fn negated(&self) -> Direction {
        match self {
            Direction::Zero => Direction::Zero,
            Direction::Constant(c) => Direction::Constant(-c),
            Direction::Indicator { start, scale } => Direction::Indicator { start: *start, scale: -scale },
            Direction::Custom(f) => {
                let f = f.clone();
                Direction::Custom(TimeFn::custom(move |t| -f.eval(t)))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Direction::Zero => true,
            Direction::Constant(c) => *c == 0.0,
            Direction::Indicator { scale, .. } => *scale == 0.0,
            Direction::Custom(_) => false,
        }
    }
}

pub type FeedbackFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum PolicyKind {
    /// Open-loop `t ↦ π_t`, assumed continuous in `t`.
    Deterministic(TimeFn),
    /// Markov feedback `(t, x) ↦ π`.
    Feedback(FeedbackFn),
    /// `base + y·direction`.
    Perturbed { base: Box<ControlPolicy>, direction: Direction, y: f64 },
}

/// A control rule together with its admissible interval. Values outside
/// the interval are reported as errors, never clamped.
#[derive(Clone)]
pub struct ControlPolicy {
    pub kind: PolicyKind,
    pub bounds: Bounds,
}

impl fmt::Debug for ControlPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            PolicyKind::Deterministic(g) => write!(f, "Deterministic({g:?}) in {:?}", self.bounds),
            PolicyKind::Feedback(_) => write!(f, "Feedback(..) in {:?}", self.bounds),
            PolicyKind::Perturbed { base, direction, y } => {
                write!(f, "Perturbed({base:?} + {y}·{direction:?})")
            }
        }
    }
}

impl ControlPolicy {
    pub fn deterministic(bounds: Bounds, f: TimeFn) -> Self {
        Self { kind: PolicyKind::Deterministic(f), bounds }
    }

    pub fn constant(bounds: Bounds, value: f64) -> Self {
        Self::deterministic(bounds, TimeFn::Constant(value))
    }

    pub fn feedback(bounds: Bounds, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { kind: PolicyKind::Feedback(Arc::new(f)), bounds }
    }

    pub fn perturbed(&self, direction: Direction, y: f64) -> Self {
        Self { kind: PolicyKind::Perturbed { base: Box::new(self.clone()), direction, y }, bounds: self.bounds }
    }

    pub fn is_open_loop(&self) -> bool {
        match &self.kind {
            PolicyKind::Deterministic(_) => true,
            PolicyKind::Feedback(_) => false,
            PolicyKind::Perturbed { base, .. } => base.is_open_loop(),
        }
    }

    fn raw(&self, t: f64, x: f64, left: bool) -> f64 {
        match &self.kind {
            PolicyKind::Deterministic(f) => f.eval(t),
            PolicyKind::Feedback(f) => f(t, x),
            PolicyKind::Perturbed { base, direction, y } => {
                let d = if left { direction.left_value(t) } else { direction.value(t) };
                base.raw(t, x, left) + y * d
            }
        }
    }

    fn checked(&self, t: f64, v: f64) -> Result<f64> {
        if self.bounds.contains(v) {
            Ok(v)
        } else {
            Err(Error::Admissibility { t, value: v, lo: self.bounds.lo, hi: self.bounds.hi })
        }
    }

    /// `π_t` given the current state.
    pub fn value(&self, t: f64, x: f64) -> Result<f64> {
        self.checked(t, self.raw(t, x, false))
    }

    /// `π_{t−}` given the pre-jump state.
    pub fn value_left(&self, t: f64, x: f64) -> Result<f64> {
        self.checked(t, self.raw(t, x, true))
    }
}
