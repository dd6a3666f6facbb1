use shearflow::attractor::{absorbing_check, gronwall_check};
use shearflow::config::{parse_config_str, CANONICAL};
use shearflow::setup::Pipeline;
use shearflow::simulate::{self, energy_monitor, vprime_monitor, Trajectory};

fn pipeline(t_end: f64) -> Pipeline {
    let text = CANONICAL.replace("t_end = 10.0", &format!("t_end = {t_end:?}"));
    Pipeline::build(&parse_config_str(&text).unwrap()).unwrap()
}

#[test]
fn entry_time_grows_with_log_of_initial_energy() {
    let p = pipeline(2.0);
    let tol = p.config.attractor.ball_tolerance;
    let r = 10.0 * p.audit.gronwall_radius;
    let (y1, y2) = (r * r, 4.0 * r * r);
    let gap = p.audit.predicted_entry(y2, tol) - p.audit.predicted_entry(y1, tol);
    let expected = 4f64.ln() / p.audit.rate;
    assert!((gap - expected).abs() <= 0.2 * expected, "{gap} vs {expected}");
}

#[test]
fn short_canonical_run_respects_envelope_and_monitors() {
    let p = pipeline(3.0);
    let a0 = p.initial(p.config.integration.seed, 0).unwrap();
    let traj = simulate::run(&p.flow_parameters(), &p.ops, &p.jn, &a0, None).unwrap();
    let g = gronwall_check(&traj, &p.audit, p.config.attractor.ball_tolerance).unwrap();
    assert_eq!(g.violations, 0);
    let entry = g.entry_time.expect("trajectory enters the ball");
    assert!(entry <= g.entry_bound && entry <= g.predicted_entry);
    assert_eq!(energy_monitor(&traj, &p.audit, p.config.integration.energy_tol_factor).violations, 0);
    assert_eq!(vprime_monitor(&traj, &p.audit).violations, 0);
    assert_eq!(traj.selection.violations, 0);
}

#[test]
fn zero_trajectory_has_trivial_diagnostics() {
    let p = pipeline(2.0);
    let zero = Trajectory::from_channels(0.01, vec![0.0; 301], vec![0.0; 301], vec![0.0; 301]);
    let e = energy_monitor(&zero, &p.audit, 10.0);
    assert_eq!(e.violations, 0);
    assert!(e.slack.iter().all(|s| (s + p.audit.k_energy).abs() < 1e-12));
    let g = gronwall_check(&zero, &p.audit, 0.05).unwrap();
    assert_eq!((g.violations, g.entry_time), (0, Some(0.0)));
    let a = absorbing_check(&zero, &p.audit, 0.1).unwrap();
    assert_eq!((a.violations, a.fb0), (0, 0.0));
}

#[test]
fn blowup_guard_trips_on_a_tiny_limit() {
    let p = pipeline(0.5);
    let mut params = p.flow_parameters();
    params.blowup_limit = Some(1e-3);
    let a0 = p.initial(1, 0).unwrap();
    let err = simulate::run(&params, &p.ops, &p.jn, &a0, None).unwrap_err();
    assert!(matches!(err, shearflow::Error::BlowUp { .. }), "{err}");
}
