//! The SDE-driven self-exciting jump process `(N, U, λ)`.
//!
//! Events arrive with intensity `λ`, which follows `dλ = μ(λ)dt + β dU`
//! where `U` is the running sum of the event marks. Between events `λ`
//! follows the deterministic flow of `μ`; at an event it jumps by `β·Y`.
//!
//! Simulation is exact: candidate points of a Poisson random measure on
//! `time × level` are drawn in horizontal bands of width `λ0`, and a
//! candidate at `(t, u)` becomes an event iff `u ≤ λ_{t−}`. Only the bands
//! below the local majorant `max(λ_t, λ0)` are consulted. Because every
//! band owns its own substream, the point set does not depend on the
//! parameters, which couples runs that differ only in `β`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::rng::{Purpose, StreamKey};

/// Default per-path event cap.
pub const DEFAULT_MAX_EVENTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Drift {
    /// `μ(λ) = δ(λ0 − λ)`.
    MeanReverting {
        delta: f64,
    },
    Zero,
}

/// Parameters of the intensity SDE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntensityModel {
    pub lambda0: f64,
    pub drift: Drift,
    pub beta: f64,
}

impl IntensityModel {
    pub fn new(lambda0: f64, drift: Drift, beta: f64) -> Result<Self> {
        let m = Self { lambda0, drift, beta };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0.is_finite() && self.lambda0 > 0.0) {
            return Err(invalid("lambda0", format!("must be positive and finite, got {}", self.lambda0)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(invalid("beta", format!("must be non-negative and finite, got {}", self.beta)));
        }
        if let Drift::MeanReverting { delta } = self.drift {
            if !(delta.is_finite() && delta >= 0.0) {
                return Err(invalid("delta", format!("must be non-negative and finite, got {delta}")));
            }
        }
        Ok(())
    }

    fn decay(&self) -> f64 {
        match self.drift {
            Drift::MeanReverting { delta } => delta,
            Drift::Zero => 0.0,
        }
    }

    /// `λ` after `dt` time units without events, starting from `lambda_start`.
    pub fn flow(&self, lambda_start: f64, dt: f64) -> f64 {
        let delta = self.decay();
        if delta == 0.0 {
            lambda_start
        } else {
            self.lambda0 + (lambda_start - self.lambda0) * (-delta * dt).exp()
        }
    }

    /// `∫_0^dt λ_s ds` along the event-free flow from `lambda_start`.
    pub fn flow_integral(&self, lambda_start: f64, dt: f64) -> f64 {
        let delta = self.decay();
        if delta == 0.0 {
            lambda_start * dt
        } else {
            self.lambda0 * dt + (lambda_start - self.lambda0) * (-(-delta * dt).exp_m1()) / delta
        }
    }
}

/// Exact event-free solution of the intensity ODE.
pub fn intensity_flow(model: &IntensityModel, lambda_start: f64, dt: f64) -> f64 {
    debug_assert!(dt >= 0.0 && lambda_start > 0.0);
    model.flow(lambda_start, dt)
}

/// When the mark of the `i`-th event is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MarkMode {
    /// `Y_i` is drawn at `T_{i−1}` (at time 0 for `Y_1`) from `ν(λ_{T_{i−1}})`.
    Predictable,
    /// `Y_i` is drawn at `T_i` from `ν(λ_{T_i−})`.
    AtJump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MarkKind {
    Constant {
        value: f64,
    },
    /// `Y = shift + Exp(rate(λ))` with `rate(λ) = base_rate·(λ/λ0)^rate_exponent`.
    ShiftedExponential {
        base_rate: f64,
        rate_exponent: f64,
        shift: f64,
    },
}

/// The family `ν(λ, ·)` of mark distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkKernel {
    pub kind: MarkKind,
    pub mode: MarkMode,
}

impl MarkKernel {
    pub fn constant(value: f64, mode: MarkMode) -> Self {
        Self { kind: MarkKind::Constant { value }, mode }
    }

    /// Checks the support condition `λ + β·Y ≥ λ0` for intensities `λ ≥ λ0`.
    pub fn validate(&self, model: &IntensityModel) -> Result<()> {
        match self.kind {
            MarkKind::Constant { value } => {
                if !(value.is_finite() && value > 0.0) {
                    return Err(invalid("kernel.value", format!("must be positive, got {value}")));
                }
            }
            MarkKind::ShiftedExponential { base_rate, rate_exponent, shift } => {
                if !(base_rate.is_finite() && base_rate > 0.0) {
                    return Err(invalid("kernel.base_rate", format!("must be positive, got {base_rate}")));
                }
                if !rate_exponent.is_finite() {
                    return Err(invalid("kernel.rate_exponent", "must be finite"));
                }
                if !shift.is_finite() || (model.beta > 0.0 && shift < 0.0) {
                    return Err(invalid(
                        "kernel.shift",
                        format!("must be finite and non-negative when beta > 0, got {shift}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn rate(&self, lambda: f64, model: &IntensityModel) -> Option<f64> {
        match self.kind {
            MarkKind::Constant { .. } => None,
            MarkKind::ShiftedExponential { base_rate, rate_exponent, .. } => {
                Some(base_rate * (lambda / model.lambda0).powf(rate_exponent))
            }
        }
    }

    pub fn mean(&self, lambda: f64, model: &IntensityModel) -> f64 {
        match self.kind {
            MarkKind::Constant { value } => value,
            MarkKind::ShiftedExponential { shift, .. } => shift + 1.0 / self.rate(lambda, model).unwrap(),
        }
    }

    fn draw(&self, lambda: f64, model: &IntensityModel, rng: &mut ChaCha8Rng) -> f64 {
        match self.kind {
            MarkKind::Constant { value } => value,
            MarkKind::ShiftedExponential { shift, .. } => {
                let rate = self.rate(lambda, model).unwrap();
                let u: f64 = rng.random();
                shift - (-u).ln_1p() / rate
            }
        }
    }
}

/// Everything needed to continue a path from time `time` onwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventState {
    pub time: f64,
    pub intensity: f64,
    /// Mark of the next event, already drawn (predictable mode only).
    pub pending_mark: Option<f64>,
    pub count: usize,
}

/// A realized event path on `[start, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventPath {
    pub model: IntensityModel,
    pub mode: MarkMode,
    pub start: f64,
    pub horizon: f64,
    pub initial_intensity: f64,
    /// Events already counted at `start` (non-zero for continuations).
    pub initial_count: usize,
    pub times: Vec<f64>,
    pub marks: Vec<f64>,
    pub intensity_pre: Vec<f64>,
    pub intensity_post: Vec<f64>,
    /// Predictable mode: the drawn mark of the first event after the horizon.
    /// At-jump mode: the mark that event receives, found by simulating past
    /// the horizon (an anticipating quantity, kept for contrast experiments).
    pub pending_mark: Option<f64>,
    pub max_events_hit: bool,
}

impl EventPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t < self.start || t > self.horizon || t.is_nan() {
            return Err(Error::TimeOutOfRange { t, lo: self.start, hi: self.horizon });
        }
        Ok(())
    }

    /// Number of events in `(start, t]` of this path.
    pub fn events_up_to(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    /// `N_t`, including events counted before `start`.
    pub fn count(&self, t: f64) -> usize {
        self.initial_count + self.events_up_to(t)
    }

    /// Right-continuous intensity `λ_t`.
    pub fn intensity(&self, t: f64) -> f64 {
        let k = self.events_up_to(t);
        let (t0, l0) =
            if k == 0 { (self.start, self.initial_intensity) } else { (self.times[k - 1], self.intensity_post[k - 1]) };
        self.model.flow(l0, t - t0)
    }

    /// Left limit `λ_{t−}`.
    pub fn intensity_left(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        let (t0, l0) =
            if k == 0 { (self.start, self.initial_intensity) } else { (self.times[k - 1], self.intensity_post[k - 1]) };
        self.model.flow(l0, t - t0)
    }

    /// State of the process at `t`, for branching continuations.
    pub fn state_at(&self, t: f64) -> Result<EventState> {
        self.check_time(t)?;
        let k = self.events_up_to(t);
        let pending_mark = match self.mode {
            MarkMode::Predictable => Some(if k < self.len() {
                self.marks[k]
            } else {
                self.pending_mark.expect("predictable path always carries a pending mark")
            }),
            MarkMode::AtJump => None,
        };
        Ok(EventState { time: t, intensity: self.intensity(t), pending_mark, count: self.initial_count + k })
    }
}

impl EventPath {
    /// Builds a path from given event times and marks; intensities are
    /// reconstructed from the model. Used for replaying recorded paths.
    pub fn from_marks(
        model: &IntensityModel,
        mode: MarkMode,
        horizon: f64,
        times: Vec<f64>,
        marks: Vec<f64>,
        pending_mark: Option<f64>,
    ) -> Result<Self> {
        model.validate()?;
        if times.len() != marks.len() {
            return Err(invalid("marks", "must have one mark per event time"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) || times.first().is_some_and(|&t| t <= 0.0) {
            return Err(invalid("times", "must be positive and strictly increasing"));
        }
        if times.last().is_some_and(|&t| t > horizon) {
            return Err(invalid("times", "must not exceed the horizon"));
        }
        let mut lambda = model.lambda0;
        let mut t = 0.0;
        let mut intensity_pre = Vec::with_capacity(times.len());
        let mut intensity_post = Vec::with_capacity(times.len());
        for (&ti, &y) in times.iter().zip(&marks) {
            let pre = model.flow(lambda, ti - t);
            lambda = pre + model.beta * y;
            t = ti;
            intensity_pre.push(pre);
            intensity_post.push(lambda);
        }
        Ok(Self {
            model: *model,
            mode,
            start: 0.0,
            horizon,
            initial_intensity: model.lambda0,
            initial_count: 0,
            times,
            marks,
            intensity_pre,
            intensity_post,
            pending_mark,
            max_events_hit: false,
        })
    }
}

/// `U_t`: sum of the marks of events at or before `t`.
pub fn jump_process_value(path: &EventPath, t: f64) -> Result<f64> {
    path.check_time(t)?;
    Ok(path.marks[..path.events_up_to(t)].iter().fold(0.0, |acc, y| acc + y))
}

/// `[U]_t = Σ_{T_i ≤ t} Y_i²`.
pub fn quadratic_variation_of_u(path: &EventPath, t: f64) -> Result<f64> {
    path.check_time(t)?;
    Ok(path.marks[..path.events_up_to(t)].iter().fold(0.0, |acc, y| acc + y * y))
}

struct Band {
    index: u32,
    rng: ChaCha8Rng,
    width: f64,
    time: f64,
    level: f64,
}

impl Band {
    fn new(index: u32, key: &StreamKey, width: f64, start: f64) -> Self {
        let mut b = Band { index, rng: key.stream(Purpose::Band(index)), width, time: start, level: 0.0 };
        b.advance();
        b
    }

    fn advance(&mut self) {
        let e: f64 = self.rng.random();
        let u: f64 = self.rng.random();
        self.time += -(-e).ln_1p() / self.width;
        self.level = (self.index as f64 + u) * self.width;
    }

    fn skip_past(&mut self, t: f64) {
        while self.time <= t {
            self.advance();
        }
    }
}

/// Simulates events on `(0, horizon]` starting from `λ_0 = lambda0`.
pub fn simulate_events(
    model: &IntensityModel,
    kernel: &MarkKernel,
    horizon: f64,
    key: &StreamKey,
    max_events: usize,
) -> Result<EventPath> {
    let start = EventState { time: 0.0, intensity: model.lambda0, pending_mark: None, count: 0 };
    simulate_events_from(model, kernel, &start, horizon, key, max_events)
}

/// Continues a path from `state` up to `horizon`. In predictable mode a
/// missing `pending_mark` is drawn from `ν(state.intensity)` first.
pub fn simulate_events_from(
    model: &IntensityModel,
    kernel: &MarkKernel,
    state: &EventState,
    horizon: f64,
    key: &StreamKey,
    max_events: usize,
) -> Result<EventPath> {
    model.validate()?;
    kernel.validate(model)?;
    if horizon.is_nan() || horizon < state.time {
        return Err(invalid("horizon", format!("must be at least the start time {}", state.time)));
    }
    if !(state.intensity.is_finite() && state.intensity >= model.lambda0 * (1.0 - 1e-12)) {
        return Err(invalid(
            "intensity",
            format!("starting intensity {} must be at least lambda0 = {}", state.intensity, model.lambda0),
        ));
    }
    if max_events == 0 {
        return Err(invalid("max_events", "must be positive"));
    }

    let width = model.lambda0;
    let mut marks_rng = key.stream(Purpose::Marks);
    let mut bands: Vec<Band> = Vec::new();

    let mut t = state.time;
    let mut lambda = state.intensity;
    let mut pending = match kernel.mode {
        MarkMode::Predictable => Some(match state.pending_mark {
            Some(y) => y,
            None => kernel.draw(lambda, model, &mut marks_rng),
        }),
        MarkMode::AtJump => None,
    };

    let mut path = EventPath {
        model: *model,
        mode: kernel.mode,
        start: state.time,
        horizon,
        initial_intensity: state.intensity,
        initial_count: state.count,
        times: Vec::new(),
        marks: Vec::new(),
        intensity_pre: Vec::new(),
        intensity_post: Vec::new(),
        pending_mark: None,
        max_events_hit: false,
    };
    let mut lookahead = false;

    loop {
        let majorant = lambda.max(model.lambda0);
        let active = ((majorant / width).ceil() as usize).max(1);
        while bands.len() < active {
            bands.push(Band::new(bands.len() as u32, key, width, state.time));
        }
        for band in bands[..active].iter_mut() {
            band.skip_past(t);
        }
        let best = argmin_time(&bands[..active]);
        let candidate = bands[best].time;
        let level = bands[best].level;
        bands[best].advance();

        if candidate > horizon && !lookahead {
            if kernel.mode == MarkMode::Predictable {
                break;
            }
            lookahead = true;
        }

        let lambda_pre = model.flow(lambda, candidate - t);
        t = candidate;
        lambda = lambda_pre;
        if level > lambda_pre {
            continue;
        }

        let mark = match kernel.mode {
            MarkMode::Predictable => pending.unwrap(),
            MarkMode::AtJump => kernel.draw(lambda_pre, model, &mut marks_rng),
        };
        if lookahead {
            path.pending_mark = Some(mark);
            break;
        }
        lambda = lambda_pre + model.beta * mark;
        path.times.push(t);
        path.marks.push(mark);
        path.intensity_pre.push(lambda_pre);
        path.intensity_post.push(lambda);
        if kernel.mode == MarkMode::Predictable {
            pending = Some(kernel.draw(lambda, model, &mut marks_rng));
        }
        if path.times.len() >= max_events {
            path.max_events_hit = true;
            break;
        }
    }
    if kernel.mode == MarkMode::Predictable {
        path.pending_mark = pending;
    }
    Ok(path)
}

fn argmin_time(bands: &[Band]) -> usize {
    let mut best = 0;
    for (k, b) in bands.iter().enumerate().skip(1) {
        if b.time < bands[best].time {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mean_reverting(delta: f64, lambda0: f64, beta: f64) -> IntensityModel {
        IntensityModel::new(lambda0, Drift::MeanReverting { delta }, beta).unwrap()
    }

    #[test]
    fn flow_fixed_point() {
        let m = mean_reverting(0.5, 1.0, 0.0);
        assert_eq!(intensity_flow(&m, 1.0, 7.3), 1.0);
    }

    #[test]
    fn flow_zero_drift_is_constant() {
        let m = IntensityModel::new(1.0, Drift::Zero, 0.0).unwrap();
        assert_eq!(intensity_flow(&m, 2.5, 1.0), 2.5);
    }

    #[test]
    fn flow_half_life() {
        let m = mean_reverting(0.5, 1.0, 0.0);
        let v = intensity_flow(&m, 2.0, 2.0 * std::f64::consts::LN_2);
        assert!((v - 1.5).abs() < 1e-15, "{v}");
    }

    #[test]
    fn flow_integral_matches_quadrature() {
        let m = mean_reverting(0.7, 1.3, 0.0);
        let (l0, dt) = (3.1, 2.2);
        let n = 200_000;
        let h = dt / n as f64;
        // composite Simpson
        let mut acc = m.flow(l0, 0.0) + m.flow(l0, dt);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * m.flow(l0, i as f64 * h);
        }
        let simpson = acc * h / 3.0;
        assert!((m.flow_integral(l0, dt) - simpson).abs() < 1e-12);
    }

    #[test]
    fn negative_beta_is_rejected() {
        let err = IntensityModel::new(1.0, Drift::Zero, -0.1).unwrap_err();
        assert!(err.to_string().contains("beta"));
        assert!(IntensityModel::new(0.0, Drift::Zero, 0.0).is_err());
    }

    fn two_event_path() -> EventPath {
        let m = IntensityModel::new(1.0, Drift::Zero, 0.0).unwrap();
        EventPath::from_marks(&m, MarkMode::Predictable, 2.0, vec![0.5, 1.0], vec![2.0, 3.0], Some(1.0)).unwrap()
    }

    #[test]
    fn jump_value_examples() {
        let p = two_event_path();
        assert_eq!(jump_process_value(&p, 0.75).unwrap(), 2.0);
        assert_eq!(jump_process_value(&p, 1.0).unwrap(), 5.0);
        assert_eq!(jump_process_value(&p, 0.0).unwrap(), 0.0);
        assert!(matches!(jump_process_value(&p, 2.5), Err(Error::TimeOutOfRange { .. })));
        assert!(jump_process_value(&p, -0.1).is_err());
    }

    #[test]
    fn quadratic_variation_examples() {
        let p = two_event_path();
        assert_eq!(quadratic_variation_of_u(&p, 2.0).unwrap(), 13.0);
        assert_eq!(quadratic_variation_of_u(&p, 0.1).unwrap(), 0.0);
        let m = IntensityModel::new(1.0, Drift::Zero, 0.0).unwrap();
        let single = EventPath::from_marks(&m, MarkMode::Predictable, 1.0, vec![0.3], vec![0.5], Some(0.5)).unwrap();
        assert_eq!(quadratic_variation_of_u(&single, 1.0).unwrap(), 0.25);
    }

    #[test]
    fn tiny_horizon_is_empty() {
        let m = mean_reverting(0.5, 1.0, 1.0);
        let k = MarkKernel::constant(0.5, MarkMode::Predictable);
        let empty = (0..1000)
            .filter(|&i| simulate_events(&m, &k, 1e-12, &StreamKey::new(3, i), 100).unwrap().is_empty())
            .count();
        assert_eq!(empty, 1000);
    }

    #[test]
    fn homogeneous_poisson_mean() {
        let m = IntensityModel::new(1.0, Drift::Zero, 0.0).unwrap();
        let k = MarkKernel::constant(1.0, MarkMode::Predictable);
        let n = 20_000;
        let counts: Vec<f64> =
            (0..n).map(|i| simulate_events(&m, &k, 2.0, &StreamKey::new(11, i), 1000).unwrap().len() as f64).collect();
        let est = crate::stats::MCEstimate::from_samples(&counts).unwrap();
        assert!(est.z_against(2.0).abs() < 3.0, "{est:?}");
    }

    #[test]
    fn self_excitation_raises_event_counts() {
        let k = MarkKernel::constant(0.5, MarkMode::Predictable);
        let excited = mean_reverting(0.5, 1.0, 1.0);
        let calm = mean_reverting(0.5, 1.0, 0.0);
        let n = 5000;
        let diffs: Vec<f64> = (0..n)
            .map(|i| {
                let key = StreamKey::new(5, i);
                let a = simulate_events(&excited, &k, 5.0, &key, 10_000).unwrap().len();
                let b = simulate_events(&calm, &k, 5.0, &key, 10_000).unwrap().len();
                a as f64 - b as f64
            })
            .collect();
        let est = crate::stats::MCEstimate::from_samples(&diffs).unwrap();
        assert!(est.mean > 0.0 && est.z_against(0.0) > 3.0, "{est:?}");
    }

    #[test]
    fn event_cap_truncates_and_flags() {
        let m = IntensityModel::new(50.0, Drift::Zero, 0.0).unwrap();
        let k = MarkKernel::constant(1.0, MarkMode::Predictable);
        let p = simulate_events(&m, &k, 10.0, &StreamKey::new(1, 1), 20).unwrap();
        assert!(p.max_events_hit);
        assert_eq!(p.len(), 20);
    }

    #[test]
    fn support_condition_holds_after_jumps() {
        let m = mean_reverting(0.8, 1.0, 0.7);
        let k = MarkKernel {
            kind: MarkKind::ShiftedExponential { base_rate: 2.0, rate_exponent: 1.0, shift: 0.1 },
            mode: MarkMode::AtJump,
        };
        for i in 0..300 {
            let p = simulate_events(&m, &k, 5.0, &StreamKey::new(9, i), 10_000).unwrap();
            for ((&pre, &post), &y) in p.intensity_pre.iter().zip(&p.intensity_post).zip(&p.marks) {
                assert!(pre >= m.lambda0 - 1e-12);
                assert!(post >= m.lambda0);
                assert!(pre + m.beta * y >= m.lambda0 && y > 0.0);
            }
            assert!(p.pending_mark.is_some(), "at-jump lookahead mark missing");
        }
    }

    #[test]
    fn negative_shift_rejected_with_positive_beta() {
        let m = mean_reverting(0.8, 1.0, 0.7);
        let k = MarkKernel {
            kind: MarkKind::ShiftedExponential { base_rate: 2.0, rate_exponent: 0.0, shift: -0.5 },
            mode: MarkMode::Predictable,
        };
        let err = simulate_events(&m, &k, 1.0, &StreamKey::new(0, 0), 10).unwrap_err();
        assert!(err.to_string().contains("kernel.shift"));
    }

    #[test]
    fn predictable_marks_use_intensity_at_previous_event() {
        // With rate_exponent = 1 the mark law depends on λ; in predictable
        // mode Y_{i+1} is the i-th draw after Y_1, drawn from λ_{T_i}.
        let m = mean_reverting(0.5, 1.0, 1.0);
        let kind = MarkKind::ShiftedExponential { base_rate: 1.0, rate_exponent: 1.0, shift: 0.0 };
        let k = MarkKernel { kind, mode: MarkMode::Predictable };
        let key = StreamKey::new(77, 3);
        let p = simulate_events(&m, &k, 20.0, &key, 1000).unwrap();
        assert!(p.len() >= 2);
        let mut rng = key.stream(Purpose::Marks);
        let mut lambda_draw = m.lambda0;
        for (i, &y) in p.marks.iter().enumerate() {
            let expected = k.draw(lambda_draw, &m, &mut rng);
            assert_eq!(y, expected, "mark {i}");
            lambda_draw = p.intensity_post[i];
        }
        assert_eq!(p.pending_mark, Some(k.draw(lambda_draw, &m, &mut rng)));
    }

    #[test]
    fn continuation_preserves_pending_mark_and_count() {
        let m = mean_reverting(0.5, 1.0, 1.0);
        let k = MarkKernel::constant(0.5, MarkMode::Predictable);
        let p = simulate_events(&m, &k, 4.0, &StreamKey::new(2, 2), 1000).unwrap();
        let st = p.state_at(2.0).unwrap();
        assert_eq!(st.count, p.events_up_to(2.0));
        let c = simulate_events_from(&m, &k, &st, 4.0, &StreamKey::new(2, 2).branch(1), 1000).unwrap();
        assert_eq!(c.start, 2.0);
        assert!(c.times.iter().all(|&t| t > 2.0 && t <= 4.0));
        assert_eq!(c.count(4.0), st.count + c.len());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn raising_beta_never_deletes_events(seed in 0u64..10_000, b1 in 0.0f64..1.0, extra in 0.0f64..1.0) {
            let k = MarkKernel::constant(0.5, MarkMode::Predictable);
            let low = mean_reverting(0.6, 1.0, b1);
            let high = mean_reverting(0.6, 1.0, b1 + extra);
            let key = StreamKey::new(seed, 0);
            let a = simulate_events(&low, &k, 6.0, &key, 100_000).unwrap();
            let b = simulate_events(&high, &k, 6.0, &key, 100_000).unwrap();
            for t in &a.times {
                prop_assert!(b.times.contains(t), "event at {} lost when raising beta", t);
            }
        }

        #[test]
        fn path_invariants(seed in 0u64..10_000, beta in 0.0f64..1.5, delta in 0.0f64..2.0) {
            let m = mean_reverting(delta, 0.8, beta);
            let k = MarkKernel {
                kind: MarkKind::ShiftedExponential { base_rate: 3.0, rate_exponent: 0.5, shift: 0.05 },
                mode: MarkMode::Predictable,
            };
            let p = simulate_events(&m, &k, 3.0, &StreamKey::new(seed, 1), 100_000).unwrap();
            prop_assert!(p.times.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(p.times.len(), p.marks.len());
            let mut last = 0;
            for i in 0..=30 {
                let t = 3.0 * i as f64 / 30.0;
                let n = p.count(t);
                prop_assert!(n >= last);
                last = n;
                prop_assert!(p.intensity(t) >= m.lambda0 - 1e-12);
            }
        }
    }
}
