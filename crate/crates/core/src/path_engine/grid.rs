use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::process::EventPath;

/// A uniform base grid on `[0, horizon]` restricted to `[start, horizon]`,
/// refined with every event time of a path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub base_steps: usize,
    pub knots: Vec<f64>,
    /// `event_index[k] = Some(i)` when knot `k` is the time of event `i`.
    pub event_index: Vec<Option<usize>>,
}

impl TimeGrid {
    /// Grid on `[events.start, horizon]` for the given path.
    pub fn for_path(horizon: f64, base_steps: usize, events: &EventPath) -> Result<Self> {
        if events.horizon < horizon && events.horizon != horizon {
            return Err(invalid("horizon", "event path ends before the grid horizon"));
        }
        Self::build(events.start, horizon, base_steps, &events.times)
    }

    /// Uniform grid on `[0, horizon]` with no events.
    pub fn uniform(horizon: f64, base_steps: usize) -> Result<Self> {
        Self::build(0.0, horizon, base_steps, &[])
    }

    pub fn build(start: f64, horizon: f64, base_steps: usize, event_times: &[f64]) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid("horizon", format!("must be positive, got {horizon}")));
        }
        if base_steps == 0 {
            return Err(invalid("base_steps", "must be positive"));
        }
        if !(start >= 0.0 && start <= horizon) {
            return Err(Error::TimeOutOfRange { t: start, lo: 0.0, hi: horizon });
        }
        let mut base: Vec<f64> = vec![start];
        for k in 1..=base_steps {
            let t = if k == base_steps { horizon } else { horizon * k as f64 / base_steps as f64 };
            if t > start {
                base.push(t);
            }
        }
        let events: Vec<f64> = event_times.iter().copied().filter(|&t| t <= horizon).collect();
        let mut knots = Vec::with_capacity(base.len() + events.len());
        let mut event_index = Vec::with_capacity(base.len() + events.len());
        let (mut i, mut j) = (0, 0);
        while i < base.len() || j < events.len() {
            let take_event = j < events.len() && (i == base.len() || events[j] <= base[i]);
            if take_event {
                if i < base.len() && events[j] == base[i] {
                    i += 1;
                }
                knots.push(events[j]);
                event_index.push(Some(j));
                j += 1;
            } else {
                knots.push(base[i]);
                event_index.push(None);
                i += 1;
            }
        }
        Ok(Self { horizon, base_steps, knots, event_index })
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.knots.len() - 1
    }

    /// Index of the knot equal to `t`, if any.
    pub fn knot_index(&self, t: f64) -> Option<usize> {
        let k = self.knots.partition_point(|&s| s < t);
        (k < self.knots.len() && self.knots[k] == t).then_some(k)
    }

    /// Index of the last knot `≤ t`.
    pub fn floor_index(&self, t: f64) -> usize {
        self.knots.partition_point(|&s| s <= t).saturating_sub(1)
    }
}
