use rayon::prelude::*;

use sepmp_core::control::{
    linear_bsde_solve, performance, performance_samples, BranchPoint, ControlPolicy, MCConfig, Scenario,
};
use sepmp_core::logutility::{
    adjoint_closed_form, dominance_experiment, evaluation_trace, standard_rivals, LogUtilityConfig,
};
use sepmp_core::martingale::{
    build_compensated, build_compensated_with, default_checkpoints, martingale_test, CompensatorOptions, MarkerKind,
    Witness,
};
use sepmp_core::path_engine::Scheme;
use sepmp_core::process::{simulate_events, Drift, EventPath, IntensityModel, MarkKernel, MarkMode};
use sepmp_core::rng::StreamKey;
use sepmp_core::Error;

fn model() -> IntensityModel {
    IntensityModel::new(1.0, Drift::MeanReverting { delta: 0.5 }, 1.0).unwrap()
}

fn paths(kernel: &MarkKernel, horizon: f64, n: u64, seed: u64) -> Vec<EventPath> {
    (0..n)
        .into_par_iter()
        .map(|i| simulate_events(&model(), kernel, horizon, &StreamKey::new(seed, i), 100_000).unwrap())
        .collect()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn compensated_markers_pass_in_both_mark_modes() {
    for mode in [MarkMode::Predictable, MarkMode::AtJump] {
        let kernel = MarkKernel::constant(0.5, mode);
        let ps = paths(&kernel, 2.0, 20_000, 3);
        let opts = CompensatorOptions { allow_at_jump: true, scale: 1.0 };
        for kind in [MarkerKind::Linear, MarkerKind::Squared] {
            let ens: Vec<_> =
                ps.iter().map(|p| (build_compensated_with(p, &model(), kind, opts).unwrap(), p)).collect();
            let r = martingale_test("mode", &ens, &default_checkpoints(2.0), &Witness::DEFAULT).unwrap();
            assert!(r.passed(), "{mode:?} {kind:?}: max |z| {}", r.max_abs_z());
        }
    }
}

#[test]
fn at_jump_compensator_requires_override() {
    let kernel = MarkKernel::constant(0.5, MarkMode::AtJump);
    let p = &paths(&kernel, 1.0, 1, 1)[0];
    assert!(matches!(build_compensated(p, &model(), MarkerKind::Linear), Err(Error::ModeError)));
}

#[test]
fn event_paths_do_not_depend_on_thread_count() {
    let kernel = MarkKernel::constant(0.5, MarkMode::Predictable);
    let one = in_pool(1, || paths(&kernel, 3.0, 500, 9));
    let four = in_pool(4, || paths(&kernel, 3.0, 500, 9));
    for (a, b) in one.iter().zip(&four) {
        assert_eq!(a.times, b.times);
        assert_eq!(a.intensity_post, b.intensity_post);
    }
}

#[test]
fn performance_samples_do_not_depend_on_thread_count() {
    let cfg = LogUtilityConfig::default();
    let problem = cfg.problem(model(), MarkKernel::constant(0.5, MarkMode::Predictable));
    let policies = [cfg.optimal_policy(), ControlPolicy::constant(cfg.bounds, 0.7)];
    let mc = MCConfig::new(300, 11, cfg.horizon, 50);
    let one = in_pool(1, || performance_samples(&problem, &policies, &mc).unwrap());
    let three = in_pool(3, || performance_samples(&problem, &policies, &mc).unwrap());
    assert_eq!(one, three);
    let est = performance(&problem, &policies[0], &mc).unwrap();
    assert_eq!(est.n, 300);
    assert!(est.mean.is_finite() && est.stderr > 0.0);
}

#[test]
fn optimal_control_is_not_beaten_on_common_noise() {
    let cfg = LogUtilityConfig::default();
    let problem = cfg.problem(model(), MarkKernel::constant(0.5, MarkMode::Predictable));
    let mc = MCConfig::new(2_000, 5, cfg.horizon, 50).with_scheme(Scheme::LogExact);
    let report = dominance_experiment(&cfg, &problem, &standard_rivals(&cfg, &[0.5, 2.0]), &mc).unwrap();
    assert!(report.passed());
    assert_eq!(report.records[0].policy_id, "pi_hat");
    assert_eq!(report.records.len(), 4);
}

#[test]
fn nested_adjoint_matches_closed_form_mid_path() {
    let cfg = LogUtilityConfig::default();
    let problem = cfg.problem(model(), MarkKernel::constant(0.5, MarkMode::Predictable));
    let mc = MCConfig::new(10, 21, cfg.horizon, 40).with_scheme(Scheme::LogExact);
    let policy = cfg.optimal_policy();
    let bsde = cfg.adjoint_bsde();
    for path in 0..3 {
        let sc = Scenario::draw(&problem, &mc, path).unwrap();
        let state = sc.state(&problem, &policy, Scheme::LogExact).unwrap();
        let branch = BranchPoint::from_path(&sc.events, &state, 0.5).unwrap();
        let p = linear_bsde_solve(&problem, &policy, &bsde, &branch, &mc, 64).unwrap();
        let exact = adjoint_closed_form(&cfg, 0.5, branch.x).unwrap();
        assert!((p.mean - exact).abs() <= 1e-10 * exact, "{} vs {exact}", p.mean);
    }
}

#[test]
fn trace_rows_follow_the_requested_times() {
    let cfg = LogUtilityConfig::default();
    let problem = cfg.problem(model(), MarkKernel::constant(0.5, MarkMode::Predictable));
    let mc = MCConfig::new(3, 2, cfg.horizon, 20).with_scheme(Scheme::LogExact);
    let rows = evaluation_trace(&cfg, &problem, &mc, &[0.0, 0.5], 0).unwrap();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert!(r.dh_dpi.abs() < 1e-12, "first-order condition at t={}: {}", r.time, r.dh_dpi);
        assert_eq!(r.used_inner_paths, 0);
    }
}
