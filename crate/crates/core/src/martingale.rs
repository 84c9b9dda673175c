//! Marker processes, compensators of `U` and `[U]`, realized covariations
//! and checkpoint tests of the martingale property.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use rayon::prelude::*;

use crate::path_engine::{brownian_increments, TimeFn, TimeGrid};
use crate::process::{
    jump_process_value, simulate_events, EventPath, IntensityModel, MarkKernel, MarkMode, DEFAULT_MAX_EVENTS,
};
use crate::report::TestReport;
use crate::rng::StreamKey;
use crate::stats::{KahanSum, MCEstimate};

/// Fewest paths [`martingale_test`] accepts by default.
pub const MIN_TEST_PATHS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MarkerKind {
    /// The mark of the current segment.
    Linear,
    /// Its square.
    Squared,
}

impl MarkerKind {
    fn apply(self, y: f64) -> f64 {
        match self {
            MarkerKind::Linear => y,
            MarkerKind::Squared => y * y,
        }
    }
}

/// Left-continuous process equal to `Y_i` (or `Y_i²`) on `(T_{i−1}, T_i]`.
#[derive(Debug, Clone, Copy)]
pub struct MarkerProcess<'a> {
    pub kind: MarkerKind,
    pub path: &'a EventPath,
}

impl<'a> MarkerProcess<'a> {
    pub fn linear(path: &'a EventPath) -> Self {
        Self { kind: MarkerKind::Linear, path }
    }

    pub fn squared(path: &'a EventPath) -> Self {
        Self { kind: MarkerKind::Squared, path }
    }
}

/// Mark of the segment after the `k`-th event of the path (0-based within the path).
pub(crate) fn segment_mark(path: &EventPath, k: usize) -> Result<f64> {
    if k < path.len() {
        Ok(path.marks[k])
    } else {
        path.pending_mark.ok_or(Error::ModeError)
    }
}

/// Value of the marker at `s ∈ (start, horizon]`.
pub fn marker_value(marker: &MarkerProcess<'_>, s: f64) -> Result<f64> {
    let path = marker.path;
    if s <= path.start {
        return Err(invalid("s", format!("marker is defined on ({}, {}], got {s}", path.start, path.horizon)));
    }
    if s > path.horizon || s.is_nan() {
        return Err(Error::TimeOutOfRange { t: s, lo: path.start, hi: path.horizon });
    }
    let k = path.times.partition_point(|&t| t < s);
    Ok(marker.kind.apply(segment_mark(path, k)?))
}

/// Options for [`build_compensated_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensatorOptions {
    /// Build a compensator for an at-jump path anyway (contrast experiments).
    pub allow_at_jump: bool,
    /// Multiplies the compensator; anything but 1 breaks the martingale.
    pub scale: f64,
}

impl Default for CompensatorOptions {
    fn default() -> Self {
        Self { allow_at_jump: false, scale: 1.0 }
    }
}

/// `U_t` or `[U]_t` of one path together with `∫ marker·λ ds`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompensatedPair {
    pub kind: MarkerKind,
    pub scale: f64,
    model: IntensityModel,
    start: f64,
    horizon: f64,
    times: Vec<f64>,
    /// Marker value on the segment after each event, starting with the first segment.
    segment_marks: Vec<f64>,
    /// Intensity at the start of each segment.
    segment_intensity: Vec<f64>,
    /// Raw and compensator values at each event time.
    raw_at_event: Vec<f64>,
    comp_at_event: Vec<f64>,
}

impl CompensatedPair {
    fn check(&self, t: f64) -> Result<()> {
        if t < self.start || t > self.horizon || t.is_nan() {
            return Err(Error::TimeOutOfRange { t, lo: self.start, hi: self.horizon });
        }
        Ok(())
    }

    /// `U_t` (linear) or `[U]_t` (squared), counted from the path start.
    pub fn raw(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        let k = self.times.partition_point(|&s| s <= t);
        Ok(if k == 0 { 0.0 } else { self.raw_at_event[k - 1] })
    }

    pub fn compensator(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        let k = self.times.partition_point(|&s| s <= t);
        let (t0, base) = if k == 0 { (self.start, 0.0) } else { (self.times[k - 1], self.comp_at_event[k - 1]) };
        let partial = self.segment_marks[k] * self.model.flow_integral(self.segment_intensity[k], t - t0);
        Ok(self.scale * (base + partial))
    }

    pub fn martingale(&self, t: f64) -> Result<f64> {
        Ok(self.raw(t)? - self.compensator(t)?)
    }
}

/// Compensated `U` (linear marker) or `[U]` (squared marker) of a predictable path.
pub fn build_compensated(path: &EventPath, model: &IntensityModel, kind: MarkerKind) -> Result<CompensatedPair> {
    build_compensated_with(path, model, kind, CompensatorOptions::default())
}

pub fn build_compensated_with(
    path: &EventPath,
    model: &IntensityModel,
    kind: MarkerKind,
    options: CompensatorOptions,
) -> Result<CompensatedPair> {
    model.validate()?;
    if path.mode == MarkMode::AtJump && !options.allow_at_jump {
        return Err(Error::ModeError);
    }
    if !options.scale.is_finite() {
        return Err(invalid("scale", "must be finite"));
    }
    let n = path.len();
    let mut segment_marks = Vec::with_capacity(n + 1);
    let mut segment_intensity = Vec::with_capacity(n + 1);
    let mut raw_at_event = Vec::with_capacity(n);
    let mut comp_at_event = Vec::with_capacity(n);
    let mut raw = KahanSum::new();
    let mut comp = KahanSum::new();
    let mut t0 = path.start;
    let mut lambda = path.initial_intensity;
    for k in 0..=n {
        let y = kind.apply(segment_mark(path, k)?);
        segment_marks.push(y);
        segment_intensity.push(lambda);
        if k == n {
            break;
        }
        let t1 = path.times[k];
        comp.add(y * model.flow_integral(lambda, t1 - t0));
        raw.add(y);
        raw_at_event.push(raw.total());
        comp_at_event.push(comp.total());
        t0 = t1;
        lambda = path.intensity_post[k];
    }
    Ok(CompensatedPair {
        kind,
        scale: options.scale,
        model: *model,
        start: path.start,
        horizon: path.horizon,
        times: path.times.clone(),
        segment_marks,
        segment_intensity,
        raw_at_event,
        comp_at_event,
    })
}

/// An adapted functional evaluated at the left checkpoint of an increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Witness {
    One,
    Count,
    Intensity,
    JumpSum,
}

impl Witness {
    pub const DEFAULT: [Witness; 4] = [Witness::One, Witness::Count, Witness::Intensity, Witness::JumpSum];

    pub fn name(self) -> &'static str {
        match self {
            Witness::One => "one",
            Witness::Count => "N_s",
            Witness::Intensity => "lambda_s",
            Witness::JumpSum => "U_s",
        }
    }

    pub fn eval(self, path: &EventPath, s: f64) -> Result<f64> {
        Ok(match self {
            Witness::One => 1.0,
            Witness::Count => path.count(s) as f64,
            Witness::Intensity => path.intensity(s),
            Witness::JumpSum => jump_process_value(path, s)?,
        })
    }
}

/// Threshold and path floor of [`martingale_test_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleTestOptions {
    pub threshold: f64,
    pub min_paths: usize,
}

impl Default for MartingaleTestOptions {
    fn default() -> Self {
        Self { threshold: 3.0, min_paths: MIN_TEST_PATHS }
    }
}

/// Checkpoints `T/4, T/2, 3T/4, T`.
pub fn default_checkpoints(horizon: f64) -> Vec<f64> {
    vec![0.25 * horizon, 0.5 * horizon, 0.75 * horizon, horizon]
}

/// For every checkpoint pair `s < t` and witness `g`, tests `E[(M_t − M_s)·g(s)] = 0`.
/// `ensemble` pairs each compensated process with the event path it was built from.
pub fn martingale_test(
    suite: &str,
    ensemble: &[(CompensatedPair, &EventPath)],
    checkpoints: &[f64],
    witnesses: &[Witness],
) -> Result<TestReport> {
    martingale_test_with(suite, ensemble, checkpoints, witnesses, MartingaleTestOptions::default())
}

pub fn martingale_test_with(
    suite: &str,
    ensemble: &[(CompensatedPair, &EventPath)],
    checkpoints: &[f64],
    witnesses: &[Witness],
    options: MartingaleTestOptions,
) -> Result<TestReport> {
    let needed = options.min_paths.max(2);
    if ensemble.len() < needed {
        return Err(Error::InsufficientPaths { needed, got: ensemble.len() });
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints.len() < 2 {
        return Err(invalid("checkpoints", "need at least two strictly increasing times"));
    }
    if witnesses.is_empty() {
        return Err(invalid("witnesses", "need at least one witness"));
    }
    let martingale_at: Vec<Vec<f64>> = ensemble
        .iter()
        .map(|(pair, _)| checkpoints.iter().map(|&c| pair.martingale(c)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let mut report = TestReport::new(suite, options.threshold);
    let mut samples = vec![0.0; ensemble.len()];
    for i in 0..checkpoints.len() {
        for j in i + 1..checkpoints.len() {
            let (s, t) = (checkpoints[i], checkpoints[j]);
            for &g in witnesses {
                for (p, (_, path)) in ensemble.iter().enumerate() {
                    samples[p] = (martingale_at[p][j] - martingale_at[p][i]) * g.eval(path, s)?;
                }
                let est = MCEstimate::from_samples(&samples)?;
                let id = format!("{suite}[{s},{t}]x{}", g.name());
                report.push(id, s, t, g.name(), est.mean, est.stderr, est.z_against(0.0));
            }
        }
    }
    report.add_bonferroni_note();
    Ok(report)
}

/// A real-valued path observed at the knots of a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::GridMismatch(format!("{} times but {} values", times.len(), values.len())));
        }
        Ok(Self { times, values })
    }

    /// `U` at the knots of `grid`.
    pub fn jump_process(path: &EventPath, grid: &TimeGrid) -> Result<Self> {
        let values = grid.knots.iter().map(|&t| jump_process_value(path, t)).collect::<Result<_>>()?;
        Self::new(grid.knots.clone(), values)
    }

    fn combine(&self, other: &SampledPath, sign: f64) -> Result<SampledPath> {
        same_grid(self, other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + sign * b).collect();
        Ok(SampledPath { times: self.times.clone(), values })
    }

    pub fn plus(&self, other: &SampledPath) -> Result<SampledPath> {
        self.combine(other, 1.0)
    }

    pub fn minus(&self, other: &SampledPath) -> Result<SampledPath> {
        self.combine(other, -1.0)
    }
}

fn same_grid(a: &SampledPath, b: &SampledPath) -> Result<()> {
    if a.times != b.times {
        return Err(Error::GridMismatch(format!("grids of {} and {} knots differ", a.times.len(), b.times.len())));
    }
    Ok(())
}

/// `Σ_k Δa_k·Δb_k` over the shared grid.
pub fn realized_covariation(a: &SampledPath, b: &SampledPath) -> Result<f64> {
    same_grid(a, b)?;
    let mut acc = KahanSum::new();
    for k in 1..a.values.len() {
        acc.add((a.values[k] - a.values[k - 1]) * (b.values[k] - b.values[k - 1]));
    }
    Ok(acc.total())
}

/// Step coefficients of two synthetic semimartingales
/// `da = q dB + w dU`, `db = s dB + g dU`.
#[derive(Debug, Clone)]
pub struct SyntheticCovariation {
    pub q: TimeFn,
    pub s: TimeFn,
    pub w: TimeFn,
    pub g: TimeFn,
}

impl Default for SyntheticCovariation {
    fn default() -> Self {
        Self {
            q: TimeFn::Linear { intercept: 1.0, slope: 0.5 },
            s: TimeFn::custom(|t| 0.8 + 0.3 * (2.0 * t).sin()),
            w: TimeFn::Linear { intercept: 0.5, slope: 0.25 },
            g: TimeFn::custom(|t| 1.5 - 0.2 * t.cos()),
        }
    }
}

impl SyntheticCovariation {
    /// Builds `a` and `b` on `grid` from Brownian `increments` and the events of `path`,
    /// with coefficients frozen at the left knot of each step.
    pub fn sample(&self, path: &EventPath, grid: &TimeGrid, increments: &[f64]) -> Result<(SampledPath, SampledPath)> {
        if increments.len() != grid.steps() {
            return Err(Error::GridMismatch(format!("{} increments for {} steps", increments.len(), grid.steps())));
        }
        let mut a = vec![0.0; grid.len()];
        let mut b = vec![0.0; grid.len()];
        for k in 0..grid.steps() {
            let t = grid.knots[k];
            let du = grid.event_index[k + 1].map_or(0.0, |i| path.marks[i]);
            let db = increments[k];
            a[k + 1] = a[k] + self.q.eval(t) * db + self.w.eval(t) * du;
            b[k + 1] = b[k] + self.s.eval(t) * db + self.g.eval(t) * du;
        }
        Ok((SampledPath::new(grid.knots.clone(), a)?, SampledPath::new(grid.knots.clone(), b)?))
    }

    /// `∫ q·s dt + Σ w(T_i)·g(T_i)·Y_i²` over the grid span; the time integral
    /// by composite Simpson on a fine uniform grid.
    pub fn predicted(&self, path: &EventPath, start: f64, end: f64) -> f64 {
        let n = 4096;
        let h = (end - start) / n as f64;
        let f = |t: f64| self.q.eval(t) * self.s.eval(t);
        let mut acc = KahanSum::new();
        for i in 0..=n {
            let weight = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc.add(weight * f(start + i as f64 * h));
        }
        let mut total = acc.total() * h / 3.0;
        for (&t, &y) in path.times.iter().zip(&path.marks) {
            if t > start && t <= end {
                total += self.w.eval(t) * self.g.eval(t) * y * y;
            }
        }
        total
    }

    /// Realized covariation minus its predicted value on one path.
    pub fn error(&self, path: &EventPath, grid: &TimeGrid, increments: &[f64]) -> Result<f64> {
        let (a, b) = self.sample(path, grid, increments)?;
        let realized = realized_covariation(&a, &b)?;
        Ok(realized - self.predicted(path, grid.start(), grid.horizon))
    }
}

/// Root-mean-square error of [`SyntheticCovariation::error`] over `paths`
/// event paths of `model`, one value per entry of `steps`.
pub fn covariation_convergence(
    model: &IntensityModel,
    kernel: &MarkKernel,
    synthetic: &SyntheticCovariation,
    horizon: f64,
    steps: &[usize],
    paths: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    if paths == 0 {
        return Err(Error::InsufficientPaths { needed: 1, got: 0 });
    }
    let events: Vec<EventPath> = (0..paths as u64)
        .into_par_iter()
        .map(|i| simulate_events(model, kernel, horizon, &StreamKey::new(master_seed, i), DEFAULT_MAX_EVENTS))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    steps
        .iter()
        .map(|&n| {
            let errs: Vec<Result<f64>> = events
                .par_iter()
                .enumerate()
                .map(|(i, ev)| {
                    let grid = TimeGrid::for_path(horizon, n, ev)?;
                    let inc = brownian_increments(&grid, &StreamKey::new(master_seed, i as u64));
                    synthetic.error(ev, &grid, &inc)
                })
                .collect();
            let sq: KahanSum =
                errs.into_iter().map(|e| e.map(|v| v * v)).collect::<Result<Vec<_>>>()?.into_iter().collect();
            Ok((sq.total() / paths as f64).sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::Drift;
    use proptest::prelude::*;

    fn poisson() -> IntensityModel {
        IntensityModel::new(1.0, Drift::Zero, 0.0).unwrap()
    }

    fn two_events() -> EventPath {
        EventPath::from_marks(&poisson(), MarkMode::Predictable, 3.0, vec![1.0, 2.0], vec![5.0, 7.0], Some(9.0))
            .unwrap()
    }

    #[test]
    fn marker_segments() {
        let p = two_events();
        let m = MarkerProcess::linear(&p);
        assert_eq!(marker_value(&m, 1.5).unwrap(), 7.0);
        assert_eq!(marker_value(&m, 1.0).unwrap(), 5.0);
        assert_eq!(marker_value(&m, 0.3).unwrap(), 5.0);
        assert_eq!(marker_value(&m, 2.5).unwrap(), 9.0);
        assert_eq!(marker_value(&MarkerProcess::squared(&p), 1.5).unwrap(), 49.0);
        assert!(marker_value(&m, 0.0).is_err());
        assert!(marker_value(&m, 3.5).is_err());
    }

    #[test]
    fn marker_before_first_event_uses_predrawn_mark() {
        let p = EventPath::from_marks(&poisson(), MarkMode::Predictable, 3.0, vec![2.0], vec![0.7], Some(1.1)).unwrap();
        assert_eq!(marker_value(&MarkerProcess::linear(&p), 1.0).unwrap(), 0.7);
    }

    #[test]
    fn unit_marks_give_compensated_poisson() {
        let p =
            EventPath::from_marks(&poisson(), MarkMode::Predictable, 3.0, vec![0.4, 1.7, 2.2], vec![1.0; 3], Some(1.0))
                .unwrap();
        let c = build_compensated(&p, &poisson(), MarkerKind::Linear).unwrap();
        for t in [0.0, 0.4, 1.0, 1.7, 2.5, 3.0] {
            let expected = p.count(t) as f64 - t;
            assert!((c.martingale(t).unwrap() - expected).abs() < 1e-14, "t={t}");
        }
    }

    #[test]
    fn no_events_gives_negative_drift() {
        let m = IntensityModel::new(2.0, Drift::MeanReverting { delta: 0.5 }, 0.3).unwrap();
        let p = EventPath::from_marks(&m, MarkMode::Predictable, 1.0, vec![], vec![], Some(0.6)).unwrap();
        let c = build_compensated(&p, &m, MarkerKind::Linear).unwrap();
        assert!((c.martingale(0.75).unwrap() + 0.6 * 2.0 * 0.75).abs() < 1e-14);
        assert_eq!(c.martingale(0.0).unwrap(), 0.0);
    }

    #[test]
    fn at_jump_paths_need_override() {
        let p = EventPath::from_marks(&poisson(), MarkMode::AtJump, 1.0, vec![0.5], vec![1.0], Some(1.0)).unwrap();
        assert_eq!(build_compensated(&p, &poisson(), MarkerKind::Linear), Err(Error::ModeError));
        let opts = CompensatorOptions { allow_at_jump: true, scale: 1.0 };
        assert!(build_compensated_with(&p, &poisson(), MarkerKind::Linear, opts).is_ok());
    }

    #[test]
    fn compensator_matches_quadrature() {
        let m = IntensityModel::new(1.0, Drift::MeanReverting { delta: 0.5 }, 1.0).unwrap();
        let kernel = MarkKernel::constant(0.5, MarkMode::Predictable);
        let p = simulate_events(&m, &kernel, 4.0, &StreamKey::new(3, 3), 10_000).unwrap();
        let c = build_compensated(&p, &m, MarkerKind::Squared).unwrap();
        // Midpoint rule on a fine grid, avoiding evaluation exactly at events.
        let n = 400_000;
        let h = 4.0 / n as f64;
        let marker = MarkerProcess::squared(&p);
        let mut acc = KahanSum::new();
        for i in 0..n {
            let s = (i as f64 + 0.5) * h;
            acc.add(marker_value(&marker, s).unwrap() * p.intensity(s) * h);
        }
        assert!((c.compensator(4.0).unwrap() - acc.total()).abs() < 1e-4);
    }

    #[test]
    fn qv_of_u_on_event_grid() {
        let p =
            EventPath::from_marks(&poisson(), MarkMode::Predictable, 1.0, vec![0.3, 0.8], vec![2.0, 3.0], Some(1.0))
                .unwrap();
        let g = TimeGrid::for_path(1.0, 7, &p).unwrap();
        let u = SampledPath::jump_process(&p, &g).unwrap();
        assert_eq!(realized_covariation(&u, &u).unwrap(), 13.0);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = SampledPath::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let b = SampledPath::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(realized_covariation(&a, &b), Err(Error::GridMismatch(_))));
        assert!(SampledPath::new(vec![0.0], vec![]).is_err());
    }

    #[test]
    fn brownian_quadratic_variation() {
        let g = TimeGrid::uniform(1.0, 4096).unwrap();
        let inc = brownian_increments(&g, &StreamKey::new(11, 0));
        let mut b = vec![0.0];
        for d in &inc {
            b.push(b.last().unwrap() + d);
        }
        let p = SampledPath::new(g.knots.clone(), b).unwrap();
        let qv = realized_covariation(&p, &p).unwrap();
        assert!((qv - 1.0).abs() <= 3.0 * (2.0 / 4096.0f64).sqrt());
    }

    #[test]
    fn smooth_times_rough_vanishes() {
        let g = TimeGrid::uniform(1.0, 10_000).unwrap();
        let inc = brownian_increments(&g, &StreamKey::new(2, 0));
        let mut b = vec![0.0];
        for d in &inc {
            b.push(b.last().unwrap() + d);
        }
        let smooth: Vec<f64> = g.knots.iter().map(|t| t.sin()).collect();
        let a = SampledPath::new(g.knots.clone(), smooth).unwrap();
        let b = SampledPath::new(g.knots.clone(), b).unwrap();
        assert!(realized_covariation(&a, &b).unwrap().abs() <= 5.0 * (1e-4f64).sqrt());
    }

    #[test]
    fn too_few_paths_rejected() {
        let p = two_events();
        let c = build_compensated(&p, &poisson(), MarkerKind::Linear).unwrap();
        let ens = vec![(c, &p); 10];
        assert!(matches!(
            martingale_test("m", &ens, &[1.0, 2.0], &Witness::DEFAULT),
            Err(Error::InsufficientPaths { .. })
        ));
    }

    #[test]
    fn compensated_poisson_passes_and_scaled_fails() {
        let m = poisson();
        let kernel = MarkKernel::constant(1.0, MarkMode::Predictable);
        let paths: Vec<EventPath> =
            (0..20_000).map(|i| simulate_events(&m, &kernel, 2.0, &StreamKey::new(5, i), 1000).unwrap()).collect();
        let good: Vec<_> = paths.iter().map(|p| (build_compensated(p, &m, MarkerKind::Linear).unwrap(), p)).collect();
        let report = martingale_test("poisson", &good, &default_checkpoints(2.0), &Witness::DEFAULT).unwrap();
        assert_eq!(report.records.len(), 24);
        assert!(report.max_abs_z() < 4.5, "max z {}", report.max_abs_z());
        let opts = CompensatorOptions { allow_at_jump: false, scale: 1.1 };
        let bad: Vec<_> =
            paths.iter().map(|p| (build_compensated_with(p, &m, MarkerKind::Linear, opts).unwrap(), p)).collect();
        let report = martingale_test("scaled", &bad, &[0.0, 2.0], &[Witness::One]).unwrap();
        assert!(report.records[0].z < -3.0);
        assert!((report.records[0].estimate + 0.2).abs() < 0.05);
    }

    #[test]
    fn covariation_error_shrinks_with_refinement() {
        let m = IntensityModel::new(1.0, Drift::MeanReverting { delta: 0.5 }, 1.0).unwrap();
        let k = MarkKernel::constant(0.5, MarkMode::Predictable);
        let rms =
            covariation_convergence(&m, &k, &SyntheticCovariation::default(), 1.0, &[16, 32, 64, 128], 400, 3).unwrap();
        let steps = [16.0, 32.0, 64.0, 128.0];
        assert!(crate::stats::loglog_slope(&steps, &rms) < -0.4, "{rms:?}");
    }

    proptest! {
        #[test]
        fn polarization(a in prop::collection::vec(-10.0f64..10.0, 2..40), seed in 0u64..1000) {
            let n = a.len();
            let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let b: Vec<f64> = (0..n).map(|i| ((i as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
            let pa = SampledPath::new(times.clone(), a).unwrap();
            let pb = SampledPath::new(times, b).unwrap();
            let direct = realized_covariation(&pa, &pb).unwrap();
            let sum = pa.plus(&pb).unwrap();
            let diff = pa.minus(&pb).unwrap();
            let polar = 0.25 * (realized_covariation(&sum, &sum).unwrap() - realized_covariation(&diff, &diff).unwrap());
            prop_assert!((direct - polar).abs() <= 1e-9 * (1.0 + direct.abs()));
        }
    }
}
