//! The log-utility problem: wealth `dX = X_{t−}((α − π)dt + vol dB + κ dU)`,
//! reward `E[∫ ln(X_t π_t) dt + θ ln X_T]`, optimal control
//! `π̂_t = 1/(θ + T − t)` and adjoint `p_t = (θ + T − t)/X_t`.

use rayon::prelude::*;
use serde::Serialize;

use crate::control::{
    hamiltonian, hamiltonian_dpi, hamiltonian_dx, linear_bsde_solve, performance_samples, AdjointTriple, Bounds,
    BranchPoint, ControlPolicy, ControlProblem, HamiltonianPoint, LinearBsde, MCConfig, PathContext, RunningReward,
    Scenario,
};
use crate::error::{invalid, Error, Result};
use crate::path_engine::{LogLinear, StateCoefficients, TimeFn};
use crate::process::{IntensityModel, MarkKernel};
use crate::report::{TestRecord, TestReport};
use crate::stats::{studentize, MCEstimate};

/// Tolerance of the algebraic first-order identity.
pub const ALGEBRAIC_TOLERANCE: f64 = 1e-12;

/// Relative tolerance added to the statistical adjoint check. The nested
/// estimator of `p·X` is exact up to rounding, so its standard error can
/// fall below the rounding error of the mean itself.
pub const ROUNDING_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LogUtilityConfig {
    pub alpha: TimeFn,
    pub vol: TimeFn,
    pub kappa: TimeFn,
    pub theta: f64,
    pub x0: f64,
    pub horizon: f64,
    pub bounds: Bounds,
}

impl Default for LogUtilityConfig {
    fn default() -> Self {
        Self {
            alpha: TimeFn::Constant(0.1),
            vol: TimeFn::Constant(0.3),
            kappa: TimeFn::Constant(0.2),
            theta: 1.0,
            x0: 1.0,
            horizon: 1.0,
            bounds: Bounds { lo: 0.01, hi: 10.0 },
        }
    }
}

impl LogUtilityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(invalid("theta", format!("must be positive, got {}", self.theta)));
        }
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return Err(invalid("x0", format!("must be positive, got {}", self.x0)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if !(self.bounds.lo > 0.0) || self.bounds.lo > self.bounds.hi {
            return Err(invalid("bounds", format!("need 0 < lo <= hi, got [{}, {}]", self.bounds.lo, self.bounds.hi)));
        }
        // π̂ increases in t, so the endpoints bound it.
        for t in [0.0, self.horizon] {
            let v = optimal_control(self, t);
            if !self.bounds.contains(v) {
                return Err(invalid(
                    "bounds",
                    format!("optimal control {v} at t={t} outside [{}, {}]", self.bounds.lo, self.bounds.hi),
                ));
            }
        }
        for i in 0..=100 {
            let t = self.horizon * i as f64 / 100.0;
            let k = self.kappa.eval(t);
            if !(k >= 0.0) {
                return Err(invalid("kappa", format!("must be nonnegative, got {k} at t={t}")));
            }
            if !self.alpha.eval(t).is_finite() || !self.vol.eval(t).is_finite() {
                return Err(invalid("alpha", format!("alpha and vol must be finite, failed at t={t}")));
            }
        }
        Ok(())
    }

    pub fn coefficients(&self) -> LogLinear {
        LogLinear { alpha: self.alpha.clone(), vol: self.vol.clone(), kappa: self.kappa.clone() }
    }

    pub fn optimal_fn(&self) -> TimeFn {
        let (theta, horizon) = (self.theta, self.horizon);
        TimeFn::custom(move |t| 1.0 / (theta + horizon - t))
    }

    pub fn optimal_policy(&self) -> ControlPolicy {
        ControlPolicy::deterministic(self.bounds, self.optimal_fn())
    }

    pub fn problem(&self, model: IntensityModel, kernel: MarkKernel) -> ControlProblem {
        ControlProblem {
            model,
            kernel,
            coeffs: StateCoefficients::LogLinear(self.coefficients()),
            reward: RunningReward::LogUtility { theta: self.theta },
            x0: self.x0,
        }
    }

    /// Adjoint as a linear BSDE: `Γ` follows the optimally controlled wealth
    /// equation, `φ_s = 1/X_s` and `F = θ/X_T`.
    pub fn adjoint_bsde(&self) -> LinearBsde {
        let alpha = self.alpha.clone();
        let pi = self.optimal_fn();
        let gamma = LogLinear {
            alpha: TimeFn::custom(move |t| alpha.eval(t) - pi.eval(t)),
            vol: self.vol.clone(),
            kappa: self.kappa.clone(),
        };
        let theta = self.theta;
        LinearBsde::new(gamma, |_, x| 1.0 / x, move |x| theta / x)
    }
}

/// `π̂_t = 1/(θ + T − t)`.
pub fn optimal_control(config: &LogUtilityConfig, t: f64) -> f64 {
    1.0 / (config.theta + config.horizon - t)
}

/// `p_t = (θ + T − t)/x_t`.
pub fn adjoint_closed_form(config: &LogUtilityConfig, t: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(invalid("x", format!("wealth must be positive, got {x}")));
    }
    Ok((config.theta + config.horizon - t) / x)
}

/// `(t, π̂_t)` on `points + 1` equally spaced times.
pub fn optimal_curve(config: &LogUtilityConfig, points: usize) -> Vec<(f64, f64)> {
    let n = points.max(1);
    (0..=n)
        .map(|i| {
            let t = if i == n { config.horizon } else { config.horizon * i as f64 / n as f64 };
            (t, optimal_control(config, t))
        })
        .collect()
}

/// One outer path's contribution at one checkpoint.
struct CheckpointSample {
    residual: f64,
    p_times_x: f64,
}

/// Algebraic check of `1/π̂ − pX = 0` and nested Monte Carlo check of
/// `p̂·X_t = θ + T − t` at each checkpoint, on paths simulated under `π̂`.
pub fn first_order_condition_check(
    config: &LogUtilityConfig,
    problem: &ControlProblem,
    mc: &MCConfig,
    checkpoints: &[f64],
    inner_paths: usize,
) -> Result<TestReport> {
    config.validate()?;
    if mc.paths < 2 {
        return Err(Error::InsufficientPaths { needed: 2, got: mc.paths });
    }
    let policy = config.optimal_policy();
    let bsde = config.adjoint_bsde();
    let rows: Vec<Result<Vec<CheckpointSample>>> = (0..mc.paths as u64)
        .into_par_iter()
        .map(|i| {
            let sc = Scenario::draw(problem, mc, i)?;
            let state = sc.state(problem, &policy, mc.scheme)?;
            checkpoints
                .iter()
                .map(|&t| {
                    let x = state.at_knot(t)?;
                    let p = adjoint_closed_form(config, t, x)?;
                    let residual = 1.0 / optimal_control(config, t) - p * x;
                    let branch = BranchPoint::from_path(&sc.events, &state, t)?;
                    let est = linear_bsde_solve(problem, &policy, &bsde, &branch, mc, inner_paths)?;
                    Ok(CheckpointSample { residual, p_times_x: est.mean * x })
                })
                .collect()
        })
        .collect();
    let rows: Vec<Vec<CheckpointSample>> = rows.into_iter().collect::<Result<_>>()?;

    let mut report = TestReport::new("first_order_condition", 3.0);
    for (j, &t) in checkpoints.iter().enumerate() {
        let worst = rows.iter().map(|r| r[j].residual.abs()).fold(0.0, f64::max);
        report.push_record(TestRecord {
            test_id: format!("algebraic[{t}]"),
            s: t,
            t,
            witness: "1/pi_hat - p*X".into(),
            estimate: worst,
            stderr: 0.0,
            z: worst / ALGEBRAIC_TOLERANCE,
            pass: worst <= ALGEBRAIC_TOLERANCE,
        });
        let samples: Vec<f64> = rows.iter().map(|r| r[j].p_times_x).collect();
        let est = MCEstimate::from_samples(&samples)?;
        let target = config.theta + config.horizon - t;
        let diff = est.mean - target;
        report.push_record(TestRecord {
            test_id: format!("nested[{t}]"),
            s: t,
            t,
            witness: "p_hat*X".into(),
            estimate: est.mean,
            stderr: est.stderr,
            z: studentize(diff, est.stderr),
            pass: diff.abs() <= report.threshold * est.stderr + ROUNDING_FLOOR * target.abs(),
        });
    }
    report.note = format!(
        "{} outer paths x {inner_paths} inner paths; nested checks pass when |mean - target| <= 3*stderr + {ROUNDING_FLOOR:e}*target",
        mc.paths
    );
    Ok(report)
}

/// A named rival control.
#[derive(Debug, Clone)]
pub struct Rival {
    pub id: String,
    pub policy: ControlPolicy,
}

/// `π̂·c` for each factor, and the constant `π̂_0`.
pub fn standard_rivals(config: &LogUtilityConfig, factors: &[f64]) -> Vec<Rival> {
    let mut out: Vec<Rival> = factors
        .iter()
        .map(|&c| {
            let base = config.optimal_fn();
            Rival {
                id: format!("pi_hat_x{c}"),
                policy: ControlPolicy::deterministic(config.bounds, TimeFn::custom(move |t| c * base.eval(t))),
            }
        })
        .collect();
    out.push(Rival {
        id: "constant_pi_hat_0".into(),
        policy: ControlPolicy::constant(config.bounds, optimal_control(config, 0.0)),
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceRecord {
    pub policy_id: String,
    #[serde(rename = "J_estimate")]
    pub j_estimate: f64,
    pub stderr: f64,
    pub diff_vs_optimal: f64,
    pub diff_stderr: f64,
    pub z: f64,
    /// The rival beats the optimal control beyond the threshold.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub threshold: f64,
    pub paths: usize,
    /// Sorted by `J_estimate`, best first; the optimal control has id `pi_hat`.
    pub records: Vec<DominanceRecord>,
}

impl DominanceReport {
    pub fn passed(&self) -> bool {
        !self.records.iter().any(|r| r.flagged)
    }

    pub fn record(&self, id: &str) -> Option<&DominanceRecord> {
        self.records.iter().find(|r| r.policy_id == id)
    }
}

/// Paired estimates of `J(π̂) − J(rival)` under common random numbers.
pub fn dominance_experiment(
    config: &LogUtilityConfig,
    problem: &ControlProblem,
    rivals: &[Rival],
    mc: &MCConfig,
) -> Result<DominanceReport> {
    config.validate()?;
    if mc.paths < 2 {
        return Err(Error::InsufficientPaths { needed: 2, got: mc.paths });
    }
    let threshold = 3.0;
    let mut policies = vec![config.optimal_policy()];
    policies.extend(rivals.iter().map(|r| r.policy.clone()));
    let samples = performance_samples(problem, &policies, mc)?;
    let optimal = MCEstimate::from_samples(&samples[0])?;
    let mut records = vec![DominanceRecord {
        policy_id: "pi_hat".into(),
        j_estimate: optimal.mean,
        stderr: optimal.stderr,
        diff_vs_optimal: 0.0,
        diff_stderr: 0.0,
        z: 0.0,
        flagged: false,
    }];
    for (rival, s) in rivals.iter().zip(&samples[1..]) {
        let j = MCEstimate::from_samples(s)?;
        let diffs: Vec<f64> = samples[0].iter().zip(s).map(|(a, b)| a - b).collect();
        let d = MCEstimate::from_samples(&diffs)?;
        let z = studentize(d.mean, d.stderr);
        records.push(DominanceRecord {
            policy_id: rival.id.clone(),
            j_estimate: j.mean,
            stderr: j.stderr,
            diff_vs_optimal: d.mean,
            diff_stderr: d.stderr,
            z,
            flagged: z < -threshold,
        });
    }
    records.sort_by(|a, b| b.j_estimate.total_cmp(&a.j_estimate).then_with(|| a.policy_id.cmp(&b.policy_id)));
    Ok(DominanceReport { threshold, paths: mc.paths, records })
}

/// One row of a Hamiltonian evaluation trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub path_id: u64,
    pub time: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "dH_dx")]
    pub dh_dx: f64,
    #[serde(rename = "dH_dpi")]
    pub dh_dpi: f64,
    pub p: f64,
    pub used_inner_paths: usize,
}

/// Hamiltonian and its partials along paths under `π̂` at the given times.
/// `p` comes from nested Monte Carlo when `inner_paths > 0`, from the closed
/// form otherwise; `q` and `w` are not identified and enter as zero.
pub fn evaluation_trace(
    config: &LogUtilityConfig,
    problem: &ControlProblem,
    mc: &MCConfig,
    times: &[f64],
    inner_paths: usize,
) -> Result<Vec<TraceRow>> {
    config.validate()?;
    let policy = config.optimal_policy();
    let bsde = config.adjoint_bsde();
    let rows: Vec<Result<Vec<TraceRow>>> = (0..mc.paths as u64)
        .into_par_iter()
        .map(|i| {
            let sc = Scenario::draw(problem, mc, i)?;
            let state = sc.state(problem, &policy, mc.scheme)?;
            times
                .iter()
                .map(|&t| {
                    let x = state.at_knot(t)?;
                    let p = if inner_paths > 0 {
                        let branch = BranchPoint::from_path(&sc.events, &state, t)?;
                        linear_bsde_solve(problem, &policy, &bsde, &branch, mc, inner_paths)?.mean
                    } else {
                        adjoint_closed_form(config, t, x)?
                    };
                    let at = HamiltonianPoint {
                        t,
                        x,
                        pi: policy.value(t, x)?,
                        adjoint: AdjointTriple::new(p, 0.0, 0.0),
                        context: PathContext::at(&sc.events, t)?,
                    };
                    Ok(TraceRow {
                        path_id: i,
                        time: t,
                        h: hamiltonian(&at, &problem.coeffs, &problem.reward),
                        dh_dx: hamiltonian_dx(&at, &problem.coeffs, &problem.reward),
                        dh_dpi: hamiltonian_dpi(&at, &problem.coeffs, &problem.reward),
                        p,
                        used_inner_paths: inner_paths,
                    })
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path_engine::Scheme;
    use crate::process::{Drift, MarkMode};

    fn cfg(theta: f64, horizon: f64) -> LogUtilityConfig {
        LogUtilityConfig { theta, horizon, ..Default::default() }
    }

    fn problem(c: &LogUtilityConfig) -> ControlProblem {
        c.problem(
            IntensityModel::new(1.0, Drift::MeanReverting { delta: 0.5 }, 1.0).unwrap(),
            MarkKernel::constant(0.5, MarkMode::Predictable),
        )
    }

    #[test]
    fn optimal_control_values() {
        assert_eq!(optimal_control(&cfg(1.0, 1.0), 0.0), 0.5);
        assert_eq!(optimal_control(&cfg(2.0, 1.0), 1.0), 0.5);
        assert_eq!(optimal_control(&cfg(1.0, 2.0), 1.0), 0.5);
        let curve = optimal_curve(&cfg(1.0, 1.0), 4);
        assert_eq!(curve.first(), Some(&(0.0, 0.5)));
        assert_eq!(curve.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn optimal_control_ignores_dynamics() {
        let a = cfg(1.0, 1.0);
        let b = LogUtilityConfig { alpha: TimeFn::Constant(5.0), kappa: TimeFn::Constant(3.0), ..a.clone() };
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(optimal_control(&a, t), optimal_control(&b, t));
        }
    }

    #[test]
    fn adjoint_values() {
        assert_eq!(adjoint_closed_form(&cfg(2.0, 1.0), 0.5, 4.0).unwrap(), 0.625);
        assert_eq!(adjoint_closed_form(&cfg(1.0, 1.0), 0.0, 1.0).unwrap(), 2.0);
        assert_eq!(adjoint_closed_form(&cfg(3.0, 1.0), 1.0, 1.5).unwrap(), 2.0);
        assert!(adjoint_closed_form(&cfg(1.0, 1.0), 0.0, 0.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(cfg(1.0, 1.0).validate().is_ok());
        let narrow = LogUtilityConfig { bounds: Bounds { lo: 0.6, hi: 2.0 }, ..cfg(1.0, 1.0) };
        assert!(narrow.validate().unwrap_err().to_string().contains("bounds"));
        assert!(cfg(0.0, 1.0).validate().unwrap_err().to_string().contains("theta"));
        let neg = LogUtilityConfig { kappa: TimeFn::Constant(-0.1), ..cfg(1.0, 1.0) };
        assert!(neg.validate().unwrap_err().to_string().contains("kappa"));
    }

    #[test]
    fn hamiltonian_is_concave_in_control() {
        let c = cfg(1.0, 1.0);
        let p = problem(&c);
        let at = |pi: f64| HamiltonianPoint {
            t: 0.2,
            x: 1.3,
            pi,
            adjoint: AdjointTriple::new(0.8, 0.4, -0.3),
            context: PathContext { marker: 0.5, intensity: 1.7 },
        };
        let h = 0.01;
        for i in 1..200 {
            let pi = 0.05 * i as f64;
            let second = hamiltonian(&at(pi + h), &p.coeffs, &p.reward)
                - 2.0 * hamiltonian(&at(pi), &p.coeffs, &p.reward)
                + hamiltonian(&at(pi - h), &p.coeffs, &p.reward);
            assert!(second <= 0.0);
        }
    }

    #[test]
    fn first_order_condition_small() {
        let c = cfg(1.0, 1.0);
        let p = problem(&c);
        let mc = MCConfig::new(20, 3, 1.0, 16).with_scheme(Scheme::LogExact);
        let r = first_order_condition_check(&c, &p, &mc, &[0.0, 0.5], 8).unwrap();
        assert_eq!(r.records.len(), 4);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn dominance_small() {
        let c = cfg(1.0, 1.0);
        let p = problem(&c);
        let mc = MCConfig::new(500, 9, 1.0, 32).with_scheme(Scheme::LogExact);
        let mut rivals = vec![Rival { id: "self".into(), policy: c.optimal_policy() }];
        rivals.extend(standard_rivals(&c, &[0.5, 2.0]));
        let r = dominance_experiment(&c, &p, &rivals, &mc).unwrap();
        assert!(r.passed());
        let me = r.record("self").unwrap();
        assert_eq!((me.diff_vs_optimal, me.diff_stderr), (0.0, 0.0));
        assert!(r.record("pi_hat_x2").unwrap().z > 2.0);
    }

    #[test]
    fn shifted_rival_loses() {
        let c = cfg(1.0, 1.0);
        let p = problem(&c);
        let base = c.optimal_fn();
        let rival = Rival {
            id: "plus".into(),
            policy: ControlPolicy::deterministic(c.bounds, TimeFn::custom(move |t| base.eval(t) + 0.2)),
        };
        let mc = MCConfig::new(2000, 1, 1.0, 50);
        let r = dominance_experiment(&c, &p, &[rival], &mc).unwrap();
        let rec = r.record("plus").unwrap();
        assert!(rec.diff_vs_optimal > 0.0 && rec.z > 2.0, "{rec:?}");
    }

    #[test]
    fn trace_has_zero_control_gradient() {
        let c = cfg(1.0, 1.0);
        let p = problem(&c);
        let mc = MCConfig::new(3, 2, 1.0, 16).with_scheme(Scheme::LogExact);
        let rows = evaluation_trace(&c, &p, &mc, &[0.0, 0.5, 1.0], 0).unwrap();
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| r.dh_dpi.abs() < 1e-12));
    }
}
