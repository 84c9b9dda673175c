//! Pipelines behind each subcommand. Each returns the files to write and
//! the results block of the summary; nothing here touches the filesystem.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use sepmp_core::control::{directional_derivative, ControlPolicy, Direction, Scenario};
use sepmp_core::logutility::{
    dominance_experiment, evaluation_trace, first_order_condition_check, optimal_curve, standard_rivals,
};
use sepmp_core::martingale::{
    build_compensated_with, covariation_convergence, default_checkpoints, martingale_test, realized_covariation,
    CompensatorOptions, MarkerKind, SampledPath, SyntheticCovariation, Witness,
};
use sepmp_core::path_engine::{TimeFn, TimeGrid};
use sepmp_core::process::{
    jump_process_value, quadratic_variation_of_u, simulate_events, Drift, EventPath, IntensityModel, MarkKernel,
    MarkMode,
};
use sepmp_core::report::{TestRecord, TestReport};
use sepmp_core::rng::StreamKey;
use sepmp_core::stats::{loglog_slope, sample_variance, MCEstimate};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Files produced by a command plus the values reported in the summary.
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub results: Value,
    pub flagged: bool,
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Serialize(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Serialize(e.to_string()))
}

fn toml_bytes<T: Serialize>(doc: &T) -> Result<Vec<u8>, CliError> {
    toml::to_string(doc).map(String::into_bytes).map_err(|e| CliError::Serialize(e.to_string()))
}

fn collect<T>(rows: Vec<sepmp_core::Result<T>>) -> Result<Vec<T>, CliError> {
    Ok(rows.into_iter().collect::<sepmp_core::Result<Vec<T>>>()?)
}

#[derive(Serialize)]
struct EventRow {
    path_id: u64,
    event_index: usize,
    time: f64,
    mark: f64,
    intensity_pre_jump: f64,
    intensity_post_jump: f64,
}

#[derive(Serialize)]
struct StateRow {
    path_id: u64,
    time: f64,
    #[serde(rename = "X_pre")]
    x_pre: f64,
    #[serde(rename = "X_post")]
    x_post: f64,
    lambda: f64,
    #[serde(rename = "N")]
    count: usize,
    #[serde(rename = "U")]
    jump_sum: f64,
}

/// Exported rows of one path and its terminal state.
type PathRows = (Vec<EventRow>, Vec<StateRow>, f64);

fn event_rows(path_id: u64, ev: &EventPath) -> Vec<EventRow> {
    (0..ev.len())
        .map(|i| EventRow {
            path_id,
            event_index: ev.initial_count + i + 1,
            time: ev.times[i],
            mark: ev.marks[i],
            intensity_pre_jump: ev.intensity_pre[i],
            intensity_post_jump: ev.intensity_post[i],
        })
        .collect()
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let problem = cfg.problem()?;
    let policy = cfg.control()?;
    let mc = cfg.mc();
    let export = cfg.export_paths.min(mc.paths) as u64;
    let per_path: Vec<sepmp_core::Result<PathRows>> = (0..mc.paths as u64)
        .into_par_iter()
        .map(|i| {
            let sc = Scenario::draw(&problem, &mc, i)?;
            let st = sc.state(&problem, &policy, mc.scheme)?;
            let mut states = Vec::new();
            if i < export {
                for (k, &t) in sc.grid.knots.iter().enumerate() {
                    states.push(StateRow {
                        path_id: i,
                        time: t,
                        x_pre: st.x_pre[k],
                        x_post: st.x_post[k],
                        lambda: sc.events.intensity(t),
                        count: sc.events.count(t),
                        jump_sum: jump_process_value(&sc.events, t)?,
                    });
                }
            }
            Ok((event_rows(i, &sc.events), states, st.terminal()))
        })
        .collect();
    let per_path = collect(per_path)?;
    let n_events: usize = per_path.iter().map(|p| p.0.len()).sum();
    let terminals: Vec<f64> = per_path.iter().map(|p| p.2).collect();
    let terminal = if terminals.len() >= 2 { Some(MCEstimate::from_samples(&terminals)?) } else { None };
    let mut events = Vec::with_capacity(n_events);
    let mut states = Vec::new();
    for (e, s, _) in per_path {
        events.extend(e);
        states.extend(s);
    }
    Ok(Outcome {
        files: vec![("events.csv".into(), csv_bytes(events)?), ("states.csv".into(), csv_bytes(states)?)],
        results: json!({
            "paths": mc.paths,
            "events": n_events,
            "mean_events_per_path": n_events as f64 / mc.paths.max(1) as f64,
            "terminal_state": terminal,
        }),
        flagged: false,
    })
}

pub fn verify_poisson(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let lambda0 = cfg.model.lambda0;
    let model = IntensityModel::new(lambda0, Drift::Zero, 0.0).map_err(CliError::from)?;
    let kernel = MarkKernel::constant(1.0, MarkMode::Predictable);
    let mc = cfg.mc();
    let counts: Vec<sepmp_core::Result<f64>> = (0..mc.paths as u64)
        .into_par_iter()
        .map(|i| {
            let ev = simulate_events(&model, &kernel, mc.horizon, &StreamKey::new(mc.master_seed, i), mc.max_events)?;
            Ok(ev.len() as f64)
        })
        .collect();
    let counts = collect(counts)?;
    let expected = lambda0 * mc.horizon;
    let mean = MCEstimate::from_samples(&counts)?;
    let var = sample_variance(&counts)?;
    let z_mean = mean.z_against(expected);
    let z_var = sepmp_core::stats::studentize(var.variance - expected, var.stderr);
    let mut report = TestReport::new("poisson", 3.0);
    report.push("mean_N_T", 0.0, mc.horizon, "N_T", mean.mean, mean.stderr, z_mean);
    report.push("variance_N_T", 0.0, mc.horizon, "N_T", var.variance, var.stderr, z_var);
    report.add_bonferroni_note();
    Ok(Outcome {
        flagged: !report.passed(),
        files: vec![("poisson.toml".into(), toml_bytes(&report)?)],
        results: json!({
            "expected": expected,
            "mean": mean.mean,
            "mean_stderr": mean.stderr,
            "z_mean": z_mean,
            "variance": var.variance,
            "variance_stderr": var.stderr,
            "z_variance": z_var,
        }),
    })
}

#[derive(Serialize)]
struct MartingaleDoc {
    mode: String,
    paths: usize,
    linear: TestReport,
    squared: TestReport,
}

pub fn verify_martingale(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let model = cfg.model()?;
    let kernel = cfg.kernel()?;
    let mc = cfg.mc();
    let paths: Vec<sepmp_core::Result<EventPath>> = (0..mc.paths as u64)
        .into_par_iter()
        .map(|i| {
            let ev = simulate_events(&model, &kernel, mc.horizon, &StreamKey::new(mc.master_seed, i), mc.max_events)?;
            if ev.max_events_hit {
                return Err(sepmp_core::Error::Explosion { path: i, cap: mc.max_events });
            }
            Ok(ev)
        })
        .collect();
    let paths = collect(paths)?;
    let options = CompensatorOptions { allow_at_jump: kernel.mode == MarkMode::AtJump, scale: 1.0 };
    let checkpoints = default_checkpoints(mc.horizon);
    let mut reports = Vec::new();
    for (kind, name) in [(MarkerKind::Linear, "linear"), (MarkerKind::Squared, "squared")] {
        let ensemble =
            collect(paths.iter().map(|p| build_compensated_with(p, &model, kind, options).map(|c| (c, p))).collect())?;
        reports.push(martingale_test(name, &ensemble, &checkpoints, &Witness::DEFAULT)?);
    }
    let squared = reports.pop().unwrap();
    let linear = reports.pop().unwrap();
    let flagged = !linear.passed() || !squared.passed();
    let results = json!({
        "paths": mc.paths,
        "mode": format!("{:?}", kernel.mode),
        "combinations": linear.records.len(),
        "linear_max_abs_z": linear.max_abs_z(),
        "squared_max_abs_z": squared.max_abs_z(),
        "linear_failures": linear.failures().count(),
        "squared_failures": squared.failures().count(),
    });
    let doc = MartingaleDoc { mode: format!("{:?}", kernel.mode), paths: mc.paths, linear, squared };
    Ok(Outcome { files: vec![("martingale.toml".into(), toml_bytes(&doc)?)], results, flagged })
}

/// Relative tolerance of the pathwise `[U]` identity.
const QV_TOLERANCE: f64 = 1e-12;
/// Slope bound of the covariation error against the number of steps.
const REFINEMENT_SLOPE: f64 = -0.4;

pub fn verify_covariation(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let model = cfg.model()?;
    let kernel = cfg.kernel()?;
    let mc = cfg.mc();
    let qv_paths = mc.paths.min(1000);
    let errs: Vec<sepmp_core::Result<f64>> = (0..qv_paths as u64)
        .into_par_iter()
        .map(|i| {
            let ev = simulate_events(&model, &kernel, mc.horizon, &StreamKey::new(mc.master_seed, i), mc.max_events)?;
            let grid = TimeGrid::for_path(mc.horizon, mc.base_steps, &ev)?;
            let u = SampledPath::jump_process(&ev, &grid)?;
            let realized = realized_covariation(&u, &u)?;
            let exact = quadratic_variation_of_u(&ev, mc.horizon)?;
            Ok(if exact == 0.0 { realized.abs() } else { (realized - exact).abs() / exact })
        })
        .collect();
    let worst = collect(errs)?.into_iter().fold(0.0, f64::max);

    let finest = mc.base_steps.max(8);
    let steps: Vec<usize> = [8, 4, 2, 1].iter().map(|d| finest / d).collect();
    let rms = covariation_convergence(
        &model,
        &kernel,
        &SyntheticCovariation::default(),
        mc.horizon,
        &steps,
        mc.paths.min(2000),
        mc.master_seed,
    )?;
    let xs: Vec<f64> = steps.iter().map(|&s| s as f64).collect();
    let slope = loglog_slope(&xs, &rms);

    let mut report = TestReport::new("covariation", 3.0);
    report.push_record(TestRecord {
        test_id: "qv_of_U_exact".into(),
        s: 0.0,
        t: mc.horizon,
        witness: "max relative error".into(),
        estimate: worst,
        stderr: 0.0,
        z: worst / QV_TOLERANCE,
        pass: worst <= QV_TOLERANCE,
    });
    for (&n, &e) in steps.iter().zip(&rms) {
        report.push_record(TestRecord {
            test_id: format!("rms_error[steps={n}]"),
            s: 0.0,
            t: mc.horizon,
            witness: "rms".into(),
            estimate: e,
            stderr: 0.0,
            z: 0.0,
            pass: e.is_finite(),
        });
    }
    report.push_record(TestRecord {
        test_id: "refinement_slope".into(),
        s: 0.0,
        t: mc.horizon,
        witness: "log rms vs log steps".into(),
        estimate: slope,
        stderr: 0.0,
        z: 0.0,
        pass: slope <= REFINEMENT_SLOPE,
    });
    report.note = format!("qv tolerance {QV_TOLERANCE:e} relative; refinement slope must be <= {REFINEMENT_SLOPE}");
    Ok(Outcome {
        flagged: !report.passed(),
        files: vec![("covariation.toml".into(), toml_bytes(&report)?)],
        results: json!({
            "qv_paths": qv_paths,
            "qv_max_relative_error": worst,
            "steps": steps,
            "rms_error": rms,
            "slope": slope,
        }),
    })
}

#[derive(Serialize)]
struct CurveRow {
    t: f64,
    pi_hat: f64,
}

pub fn logutil_solve(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let lu = cfg.logutility()?;
    let problem = cfg.problem()?;
    let mc = cfg.mc();
    let curve = optimal_curve(&lu, cfg.grid.base_steps);
    let checkpoints = default_checkpoints(lu.horizon);
    let checkpoints = [0.0, checkpoints[0], checkpoints[1], checkpoints[2]];
    let report = first_order_condition_check(&lu, &problem, &mc, &checkpoints, cfg.mc.inner_paths)?;
    let trace_mc = sepmp_core::control::MCConfig { paths: cfg.export_paths.min(mc.paths), ..mc };
    let trace = evaluation_trace(&lu, &problem, &trace_mc, &checkpoints, cfg.mc.inner_paths)?;
    Ok(Outcome {
        flagged: !report.passed(),
        results: json!({
            "pi_hat_at_0": curve[0].1,
            "checks": report.records.len(),
            "failures": report.failures().count(),
        }),
        files: vec![
            ("pi_hat.csv".into(), csv_bytes(curve.iter().map(|&(t, pi_hat)| CurveRow { t, pi_hat }))?),
            ("first_order.toml".into(), toml_bytes(&report)?),
            ("traces.csv".into(), csv_bytes(trace)?),
        ],
    })
}

pub fn logutil_compare(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let lu = cfg.logutility()?;
    let problem = cfg.problem()?;
    let rivals = standard_rivals(&lu, &[0.5, 0.8, 1.25, 2.0]);
    let report = dominance_experiment(&lu, &problem, &rivals, &cfg.mc())?;
    let losers = report.records.iter().filter(|r| r.z > 2.0).count();
    Ok(Outcome {
        flagged: !report.passed(),
        results: json!({
            "best": report.records[0].policy_id,
            "rivals": rivals.len(),
            "rivals_losing_beyond_2_stderr": losers,
            "flagged": report.records.iter().filter(|r| r.flagged).map(|r| r.policy_id.clone()).collect::<Vec<_>>(),
        }),
        files: vec![("dominance.toml".into(), toml_bytes(&report)?)],
    })
}

pub fn gradient(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let lu = cfg.logutility()?;
    let problem = cfg.problem()?;
    let mc = cfg.mc();
    let horizon = lu.horizon;
    let optimal = lu.optimal_policy();
    let base = lu.optimal_fn();
    let doubled = ControlPolicy::deterministic(lu.bounds, TimeFn::custom(move |t| 2.0 * base.eval(t)));
    let mut report = TestReport::new("directional_derivative", 3.0);
    let cases: [(&str, &ControlPolicy, f64, bool); 4] = [
        ("pi_hat", &optimal, 0.0, true),
        ("pi_hat", &optimal, 0.25 * horizon, true),
        ("pi_hat", &optimal, 0.5 * horizon, true),
        ("two_pi_hat", &doubled, 0.0, false),
    ];
    for (id, policy, s, expect_zero) in cases {
        let d =
            directional_derivative(&problem, policy, &Direction::Indicator { start: s, scale: 1.0 }, cfg.y_step, &mc)?;
        let z = d.z_against(0.0);
        report.push_record(TestRecord {
            test_id: format!("{id}[s={s}]"),
            s,
            t: horizon,
            witness: if expect_zero { "zero".into() } else { "nonzero".into() },
            estimate: d.mean,
            stderr: d.stderr,
            z,
            pass: if expect_zero { z.abs() <= report.threshold } else { z.abs() > report.threshold },
        });
    }
    report.note = format!("central differences with y_step {}; direction 1 on [s, T]", cfg.y_step);
    let results = json!({
        "estimates": report.records.iter().map(|r| json!({"test_id": r.test_id, "estimate": r.estimate, "stderr": r.stderr, "z": r.z, "pass": r.pass})).collect::<Vec<_>>(),
    });
    Ok(Outcome { flagged: !report.passed(), files: vec![("gradient.toml".into(), toml_bytes(&report)?)], results })
}
