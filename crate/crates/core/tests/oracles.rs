//! Independent oracles for the flat channel of length 2π and height 1.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use shearflow::basis::build_basis;
use shearflow::geometry::{build_channel, ChannelGeometry, HeightSpec, QuadratureSpec};
use shearflow::mollifier::mollify;
use shearflow::operators::{assemble_operators, build_lift};
use shearflow::potential::Superpotential;
use shearflow::simulate::{self, Dynamics, FlowParameters, GalerkinState, InitialCondition, SelectionStats, Stepper, TimeScheme};

fn flat() -> ChannelGeometry {
    build_channel(std::f64::consts::TAU, HeightSpec::constant(1.0), QuadratureSpec::new()).unwrap()
}

/// Smallest Stokes eigenvalue with stream function `cos(kx)φ(y)`: the modes are
/// `φ = A cosh(ky) + C cos(my)` with `m tan m = -k tanh k`, `λ = k² + m²`.
fn stokes_eigenvalue(k: f64) -> f64 {
    let f = |m: f64| m * m.sin() + k * k.tanh() * m.cos();
    let (mut lo, mut hi) = (std::f64::consts::FRAC_PI_2, std::f64::consts::PI - 1e-15);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let m = 0.5 * (lo + hi);
    k * k + m * m
}

/// `k²/Q` where `Q = ∫ φ''² + 2k²φ'² + k⁴φ²` is minimized over profiles with
/// `φ(0) = 1`, `φ'(0) = φ(1) = φ'(1) = 0`.
fn trace_ratio(k: f64) -> f64 {
    let (ch, sh) = (k.cosh(), k.sinh());
    // φ = (A + B y) cosh(ky) + (C + D y) sinh(ky)
    let m = Matrix4::new(
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, k, 0.0, //
        ch, ch, sh, sh, //
        k * sh, ch + k * sh, k * ch, sh + k * ch,
    );
    let c = m.lu().solve(&Vector4::new(1.0, 0.0, 0.0, 0.0)).unwrap();
    let (a, b, cc, d) = (c[0], c[1], c[2], c[3]);
    let derivs = |y: f64| {
        let (ch, sh) = ((k * y).cosh(), (k * y).sinh());
        let p = a + b * y;
        let q = cc + d * y;
        let f0 = p * ch + q * sh;
        let f1 = b * ch + k * p * sh + d * sh + k * q * ch;
        let f2 = 2.0 * b * k * sh + k * k * p * ch + 2.0 * d * k * ch + k * k * q * sh;
        (f0, f1, f2)
    };
    let n = 4000;
    let h = 1.0 / n as f64;
    let mut q = 0.0;
    for i in 0..=n {
        let (f0, f1, f2) = derivs(i as f64 * h);
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        q += w * (f2 * f2 + 2.0 * k * k * f1 * f1 + k.powi(4) * f0 * f0);
    }
    q *= h / 3.0;
    k * k / q
}

#[test]
fn poincare_constant_matches_dispersion_relation() {
    let basis = build_basis(&flat(), 4, 6).unwrap();
    let exact = (0..=4).map(|k| stokes_eigenvalue(k as f64)).fold(f64::INFINITY, f64::min);
    let got = basis.poincare_lambda1();
    assert!((got - exact).abs() / exact < 1e-2, "{got} vs {exact}");
    assert!(got >= exact * (1.0 - 1e-10), "Galerkin eigenvalue must bound from above");
    assert!((stokes_eigenvalue(0.0) - std::f64::consts::PI.powi(2)).abs() < 1e-10);
}

#[test]
fn trace_norm_matches_biharmonic_minimizer() {
    let basis = build_basis(&flat(), 4, 6).unwrap();
    let exact = (1..=4).map(|k| trace_ratio(k as f64)).fold(0.0, f64::max).sqrt();
    let got = basis.trace_norm().unwrap();
    assert!((got - exact).abs() / exact < 1e-2, "{got} vs {exact}");
    assert!(got <= exact * (1.0 + 1e-8), "discrete trace norm cannot exceed the continuum one");
}

#[test]
fn stokes_modes_decay_exactly() {
    let g = flat();
    let basis = build_basis(&g, 3, 4).unwrap();
    let lift = build_lift(0.0, 0.2, &g).unwrap();
    let ops = assemble_operators(&basis, 0.7, &lift).unwrap();
    let jn = mollify(&Superpotential::quadratic(), 8).unwrap();
    let mut params = FlowParameters::new(1e-3, 0.1);
    params.convection = false;
    params.boundary_law = false;
    let a0 = DVector::from_element(ops.n_modes(), 1.0);
    let traj = simulate::run(&params, &ops, &jn, &a0, None).unwrap();
    let a = traj.coeffs.last().unwrap();
    for k in 0..ops.n_modes() {
        let exact = (-0.7 * ops.mu[k] * 0.1).exp();
        assert!((a[k] - exact).abs() / exact < 1e-4, "mode {k}: {} vs {exact}", a[k]);
    }
}

fn small_system() -> (shearflow::operators::OperatorSet, shearflow::mollifier::MollifiedPotential) {
    let g = flat();
    let basis = build_basis(&g, 1, 1).unwrap();
    assert_eq!(basis.n_modes(), 3);
    let lift = build_lift(1.0, 0.2, &g).unwrap();
    let ops = assemble_operators(&basis, 1.0, &lift).unwrap();
    let jn = mollify(&Superpotential::pressure_drop(), 16).unwrap();
    (ops, jn)
}

fn rk4(ops: &shearflow::operators::OperatorSet, jn: &shearflow::mollifier::MollifiedPotential, a0: &DVector<f64>, dt: f64, steps: usize) -> DVector<f64> {
    let params = FlowParameters::new(dt, dt * steps as f64);
    let d = Dynamics::new(ops, jn, &params);
    let mut st = SelectionStats::default();
    let mut a = a0.clone();
    for _ in 0..steps {
        let k1 = d.residual(&a, &mut st);
        let k2 = d.residual(&(&a + &k1 * (0.5 * dt)), &mut st);
        let k3 = d.residual(&(&a + &k2 * (0.5 * dt)), &mut st);
        let k4 = d.residual(&(&a + &k3 * dt), &mut st);
        a += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    a
}

#[test]
fn small_system_has_active_nonlinearity_and_wall_law() {
    let (ops, jn) = small_system();
    let a = DVector::from_vec(vec![0.3, -0.7, 0.5]);
    assert!(ops.nonlinear(&a).norm() > 1e-3);
    assert!(ops.normal_trace(&a).amax() > 1e-3);
    let _ = jn;
}

#[test]
fn production_scheme_tracks_rk4_reference() {
    let (ops, jn) = small_system();
    let a0 = DVector::from_vec(vec![0.8, -1.2, 0.9]);
    let reference = rk4(&ops, &jn, &a0, 1e-5, 20_000);
    let traj = simulate::run(&FlowParameters::new(1e-3, 0.2), &ops, &jn, &a0, None).unwrap();
    let err = (traj.coeffs.last().unwrap() - &reference).amax();
    assert!(err < 1e-4, "max coefficient error {err}");
}

#[test]
fn step_halving_shows_at_least_first_order() {
    let (ops, jn) = small_system();
    let a0 = DVector::from_vec(vec![0.8, -1.2, 0.9]);
    let t = 0.05;
    let reference = rk4(&ops, &jn, &a0, 1e-5, 5_000);
    let err = |n: usize| {
        let params = FlowParameters::new(t / n as f64, t);
        let mut s = GalerkinState { step: 0, t: 0.0, a: a0.clone() };
        for _ in 0..n {
            s = simulate::step(&s, &ops, &jn, &params).unwrap();
        }
        (s.a - &reference).amax()
    };
    let (e1, e2) = (err(4), err(8));
    let order = (e1 / e2).log2();
    assert!(order > 1.0, "observed order {order} ({e1}, {e2})");
}

#[test]
fn imex_euler_is_first_order() {
    let (ops, jn) = small_system();
    let a0 = DVector::from_vec(vec![0.8, -1.2, 0.9]);
    let t = 0.05;
    let reference = rk4(&ops, &jn, &a0, 1e-5, 5_000);
    let err = |n: usize| {
        let mut params = FlowParameters::new(t / n as f64, t);
        params.scheme = TimeScheme::ImexEuler;
        let traj = simulate::run(&params, &ops, &jn, &a0, None).unwrap();
        (traj.coeffs.last().unwrap() - &reference).amax()
    };
    let order = (err(20) / err(40)).log2();
    assert!(order > 0.8 && order < 1.5, "observed order {order}");
}

#[test]
fn zero_state_is_an_equilibrium_without_forcing() {
    let g = flat();
    let basis = build_basis(&g, 2, 3).unwrap();
    let lift = build_lift(0.0, 0.2, &g).unwrap();
    let ops = assemble_operators(&basis, 1.0, &lift).unwrap();
    let jn = mollify(&Superpotential::pressure_drop(), 16).unwrap();
    let a0 = InitialCondition::Zero.coefficients(&ops.mu).unwrap();
    let traj = simulate::run(&FlowParameters::new(1e-3, 0.05), &ops, &jn, &a0, None).unwrap();
    assert!(traj.coeffs.iter().all(|a| a.iter().all(|x| *x == 0.0)));
    assert!(traj.h_norm.iter().chain(&traj.v_norm).chain(&traj.vprime).all(|x| *x == 0.0));
}

#[test]
fn stepper_factors_reduce_to_exponential() {
    let g = flat();
    let basis = build_basis(&g, 1, 2).unwrap();
    let ops = assemble_operators(&basis, 1.0, &build_lift(0.0, 0.2, &g).unwrap()).unwrap();
    let jn = mollify(&Superpotential::quadratic(), 4).unwrap();
    let mut params = FlowParameters::new(0.01, 0.01);
    params.convection = false;
    params.boundary_law = false;
    let stepper = Stepper::new(&ops, TimeScheme::Etd2, 0.01);
    let d = Dynamics::new(&ops, &jn, &params);
    let a = DVector::from_element(ops.n_modes(), 1.0);
    let next = stepper.step(&d, &a, &mut SelectionStats::default());
    let expect = DMatrix::from_diagonal(&ops.mu.map(|m| (-0.01 * m).exp())) * &a;
    assert!((next - expect).amax() < 1e-14);
}
