//! Acceptance suite on the canonical channel. Prints one line per criterion
//! and exits non-zero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::DVector;
use shearflow::attractor::{self, ensemble_sections};
use shearflow::basis::build_basis;
use shearflow::config::{parse_config_str, CANONICAL};
use shearflow::geometry::{build_channel, HeightSpec, QuadratureSpec};
use shearflow::mollifier::mollify;
use shearflow::operators::{assemble_operators, build_lift, lift_bound_check};
use shearflow::potential::Superpotential;
use shearflow::setup::Pipeline;
use shearflow::simulate::{self, rng_for, Dynamics, FlowParameters, InitialCondition, SelectionStats, TimeScheme, Trajectory};

type Outcome = Result<(bool, String), String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn canonical() -> Pipeline {
    Pipeline::build(&parse_config_str(CANONICAL).expect("canonical config")).expect("canonical pipeline")
}

fn operator_identities(p: &Pipeline) -> Outcome {
    let suite = p.verify_operators(100, 11).map_err(|e| e.to_string())?;
    let ok = suite.a_identity < 1e-10 && suite.b_antisymmetry < 1e-8;
    Ok((ok, format!("draws=100 A-identity={:.2e} B-antisymmetry={:.2e}", suite.a_identity, suite.b_antisymmetry)))
}

fn rot_grad(p: &Pipeline) -> Outcome {
    let c = p.basis.checks().map_err(|e| e.to_string())?;
    Ok((c.rot_grad_identity < 1e-10, format!("max residual={:.2e} over {} modes", c.rot_grad_identity, p.basis.n_modes())))
}

fn lift_bound(p: &Pipeline) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (i, lambda) in [0.05, 0.2].into_iter().enumerate() {
        let lift = build_lift(1.0, lambda, &p.geometry).map_err(|e| e.to_string())?;
        let ops = assemble_operators(&p.basis, 1.0, &lift).map_err(|e| e.to_string())?;
        let mut rng = rng_for(3, i as u64);
        let r = lift_bound_check(&ops, 1000, &mut rng).map_err(|e| e.to_string())?;
        ok &= r.passed && r.violations == 0 && r.draws == 1000;
        detail.push(format!("λ={lambda}: ρ={:.3e} violations={}/{} max ratio={:.3}", r.spectral_radius, r.violations, r.draws, r.max_ratio));
    }
    Ok((ok, detail.join("; ")))
}

fn mollification_stability(p: &Pipeline) -> Outcome {
    let suite = p.verify_potential().map_err(|e| e.to_string())?;
    let rows = &suite.stability.rows;
    let covers = [4, 256].iter().all(|n| rows.iter().any(|r| r.n == *n));
    let drift = rows.iter().filter(|r| r.n >= 16).map(|r| r.drift).fold(0.0, f64::max);
    let d2_ok = rows.iter().all(|r| r.certificate.d2 < r.certificate.d2_limit);
    let ns: Vec<u32> = rows.iter().map(|r| r.n).collect();
    Ok((covers && drift < 0.1 && d2_ok, format!("n={ns:?} max drift(n≥16)={drift:.4} d2<limit throughout={d2_ok}")))
}

fn clarke_exact() -> Outcome {
    let iv = Superpotential::pressure_drop().clarke_interval(1.0);
    Ok((iv.lo == 0.2 && iv.hi == 2.0, format!("∂j(1)=[{}, {}]", iv.lo, iv.hi)))
}

fn energy(p: &Pipeline, traj: &Trajectory) -> Outcome {
    let r = simulate::energy_monitor(traj, &p.audit, p.config.integration.energy_tol_factor);
    let steps = traj.len() - 1;
    Ok((
        steps == 10_000 && r.violations == 0,
        format!("steps={steps} violations={} max excess={:.3e} integrated ok={}", r.violations, r.max_excess, r.integrated_ok),
    ))
}

fn gronwall(p: &Pipeline, traj: &Trajectory) -> Outcome {
    let r = attractor::gronwall_check(traj, &p.audit, p.config.attractor.ball_tolerance).map_err(|e| e.to_string())?;
    let start = traj.h_norm[0] / p.audit.gronwall_radius;
    let entry = r.entry_time.unwrap_or(f64::INFINITY);
    let ok = r.violations == 0 && (start - 10.0).abs() < 1e-9 && entry <= 1.25 * r.predicted_entry;
    Ok((
        ok,
        format!(
            "‖v0‖/r={start:.1} violations={} entry={entry:.3} predicted crossing={:.3} (entry/predicted={:.3})",
            r.violations,
            r.predicted_entry,
            entry / r.predicted_entry
        ),
    ))
}

fn windows(p: &Pipeline, traj: &Trajectory) -> Outcome {
    let r = attractor::window_envelope_check(traj, &p.audit, p.config.window_step()).map_err(|e| e.to_string())?;
    let ok = r.windows > 0 && r.energy_violations == 0 && r.derivative_violations == 0;
    Ok((
        ok,
        format!(
            "windows={} energy violations={} derivative violations={} max ratios=({:.3}, {:.3})",
            r.windows, r.energy_violations, r.derivative_violations, r.max_energy_ratio, r.max_derivative_ratio
        ),
    ))
}

fn absorbing(p: &Pipeline) -> Outcome {
    let spec = p.ensemble_spec(p.config.integration.seed);
    let report = ensemble_sections(&spec, &p.ops, &p.jn, &p.audit).map_err(|e| e.to_string())?;
    let checked: usize = report.members.iter().map(|m| m.absorbing.checked).sum();
    let violations: usize = report.members.iter().map(|m| m.absorbing.violations).sum();
    let worst = report.members.iter().map(|m| m.absorbing.max_ratio).fold(0.0, f64::max);
    let ok = report.members.len() == 8 && checked > 0 && violations == 0;
    Ok((
        ok,
        format!("trajectories={} shifts checked={checked} violations={violations} max fb/(2R0)={worst:.2e}", report.members.len()),
    ))
}

fn small_n_oracle() -> Outcome {
    let g = build_channel(std::f64::consts::TAU, HeightSpec::constant(1.0), QuadratureSpec::new()).map_err(|e| e.to_string())?;
    let basis = build_basis(&g, 1, 1).map_err(|e| e.to_string())?;
    let lift = build_lift(1.0, 0.2, &g).map_err(|e| e.to_string())?;
    let ops = assemble_operators(&basis, 1.0, &lift).map_err(|e| e.to_string())?;
    let jn = mollify(&Superpotential::pressure_drop(), 32).map_err(|e| e.to_string())?;
    let a0 = InitialCondition::RandomHBall { radius: 2.0, seed: 5, stream: 0 }.coefficients(&ops.mu).map_err(|e| e.to_string())?;

    let dt_ref = 1e-6;
    let steps = 1_000_000;
    let params = FlowParameters::new(dt_ref, 1.0);
    let d = Dynamics::new(&ops, &jn, &params);
    let mut st = SelectionStats::default();
    let mut a = a0.clone();
    for _ in 0..steps {
        let k1 = d.residual(&a, &mut st);
        let k2 = d.residual(&(&a + &k1 * (0.5 * dt_ref)), &mut st);
        let k3 = d.residual(&(&a + &k2 * (0.5 * dt_ref)), &mut st);
        let k4 = d.residual(&(&a + &k3 * dt_ref), &mut st);
        a += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt_ref / 6.0);
    }

    let mut detail = vec![format!("N={}", ops.n_modes())];
    let mut ok = ops.n_modes() == 3;
    for scheme in [TimeScheme::Etd2, TimeScheme::ImexEuler] {
        let mut params = FlowParameters::new(1e-4, 1.0);
        params.scheme = scheme;
        let traj = simulate::run(&params, &ops, &jn, &a0, None).map_err(|e| e.to_string())?;
        let err: f64 = (traj.coeffs.last().unwrap() - &a).amax();
        ok &= err < 1e-4;
        detail.push(format!("{scheme:?} error={err:.2e}"));
    }
    Ok((ok, detail.join(" ")))
}

fn stokes_decay(p: &Pipeline) -> Outcome {
    let lift = build_lift(0.0, 0.2, &p.geometry).map_err(|e| e.to_string())?;
    let ops = assemble_operators(&p.basis, 1.0, &lift).map_err(|e| e.to_string())?;
    let mut params = FlowParameters::new(1e-3, 0.1);
    params.convection = false;
    params.boundary_law = false;
    let mut worst: f64 = 0.0;
    for k in 0..ops.n_modes() {
        let a0 = InitialCondition::Eigenmode { index: k, amp: 1.0 }.coefficients(&ops.mu).map_err(|e| e.to_string())?;
        let traj = simulate::run(&params, &ops, &p.jn, &a0, None).map_err(|e| e.to_string())?;
        let t = traj.times[100];
        let got = traj.coeffs[100].dot(&a0) / a0.norm_squared();
        let exact = (-ops.nu * ops.mu[k] * t).exp();
        worst = worst.max((got - exact).abs() / exact);
    }
    Ok((worst < 1e-4, format!("modes={} steps=100 max relative error={worst:.2e}", ops.n_modes())))
}

fn reproducibility() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_shearflow");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("canonical.toml");
    std::fs::write(&cfg, CANONICAL).map_err(|e| e.to_string())?;
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let status = Command::new(exe)
            .args(["simulate", "--no-timestamp", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("simulate exited with {status}"));
        }
        std::fs::read(Path::new(&out).join("trajectory.csv")).map_err(|e| e.to_string())
    };
    let (a, b) = (run("first")?, run("second")?);
    Ok((!a.is_empty() && a == b, format!("trajectory.csv {} bytes, identical={}", a.len(), a == b)))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let p = canonical();
    let a0: DVector<f64> = p.initial(p.config.integration.seed, 0).expect("initial data");
    let traj = simulate::run(&p.flow_parameters(), &p.ops, &p.jn, &a0, None).expect("canonical run");

    let criteria: Vec<Criterion> = vec![
        ("operator identities", Box::new(|| operator_identities(&p))),
        ("rot/grad identity", Box::new(|| rot_grad(&p))),
        ("lift bound", Box::new(|| lift_bound(&p))),
        ("mollification stability", Box::new(|| mollification_stability(&p))),
        ("Clarke interval exactness", Box::new(clarke_exact)),
        ("discrete energy inequality", Box::new(|| energy(&p, &traj))),
        ("Gronwall envelope", Box::new(|| gronwall(&p, &traj))),
        ("window envelopes", Box::new(|| windows(&p, &traj))),
        ("absorbing surrogate", Box::new(|| absorbing(&p))),
        ("small-N oracle", Box::new(small_n_oracle)),
        ("Stokes decay oracle", Box::new(|| stokes_decay(&p))),
        ("reproducibility", Box::new(reproducibility)),
    ];

    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!ok);
        println!("[{}] {:>2}. {name}: {detail} ({:.1}s)", if ok { "PASS" } else { "FAIL" }, i + 1, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {}/{} passed in {:.1}s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
