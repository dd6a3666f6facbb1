//! Weak-form operators in the discrete Stokes eigenbasis.
//!
//! In these coordinates the mass matrix is the identity and the stiffness is
//! `diag(μ)`, so `A = ν·diag(μ)`. The convection term uses the Lamb form
//! `⟨B(u, v), z⟩ = ∫ rot u (v1 z2 - v2 z1) dx`, and the wall velocity `s` is
//! carried by a lift `w = (s·ρ(x2/h0), 0)` supported in a thin layer.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::{DivFreeBasis, NodalTable};
use crate::geometry::ChannelGeometry;
use crate::linalg;
use crate::quadrature::gauss_legendre_on;
use crate::{Error, Result};

/// Tangential lift of the wall velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftField {
    pub s: f64,
    pub lambda: f64,
    /// Support of the bump in units of `h0`.
    pub t0: f64,
    pub geometry: ChannelGeometry,
}

pub fn build_lift(s: f64, lambda: f64, geometry: &ChannelGeometry) -> Result<LiftField> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("lambda", "must be positive"));
    }
    if !s.is_finite() {
        return Err(Error::invalid("s", "must be finite"));
    }
    let base = geometry.h0.min(1.0);
    let t0 = if s == 0.0 { base } else { (lambda / (2.0 * s.abs())).min(base) };
    Ok(LiftField { s, lambda, t0, geometry: geometry.clone() })
}

impl LiftField {
    /// Bump `ρ(τ) = exp(1 - 1/(1 - (τ/t0)²))`, so `ρ(0) = 1`, `ρ'(0) = 0`.
    pub fn bump(&self, tau: f64) -> (f64, f64) {
        let q = tau.abs() / self.t0;
        if q >= 1.0 {
            return (0.0, 0.0);
        }
        let d = 1.0 - q * q;
        let r = (1.0 - 1.0 / d).exp();
        let dr = -r * 2.0 * tau / (self.t0 * self.t0 * d * d);
        (r, dr)
    }

    /// Wall-normal extent of the support.
    pub fn thickness(&self) -> f64 {
        self.t0 * self.geometry.h0
    }

    /// `(w1, ∂w1/∂x2)` at height `x2`; `w2 ≡ 0`.
    pub fn eval(&self, x2: f64) -> (f64, f64) {
        let h0 = self.geometry.h0;
        let (r, dr) = self.bump(x2 / h0);
        (self.s * r, self.s * dr / h0)
    }

    /// `rot w = -∂w1/∂x2`.
    pub fn vorticity(&self, x2: f64) -> f64 {
        -self.eval(x2).1
    }

    pub fn is_zero(&self) -> bool {
        self.s == 0.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LiftInvariants {
    pub wall_tangential_error: f64,
    pub top_velocity: f64,
    /// `|∫|rot w|² - ∫|∇w|²|`.
    pub rot_grad_residual: f64,
}

pub fn lift_invariants(lift: &LiftField, n_lift: usize) -> LiftInvariants {
    let g = &lift.geometry;
    let n1 = 64;
    let mut top: f64 = 0.0;
    for i in 0..n1 {
        let x1 = g.length * i as f64 / n1 as f64;
        top = top.max(lift.eval(g.height_at(x1).h).0.abs());
    }
    let (x, w) = gauss_legendre_on(n_lift.max(8), 0.0, lift.thickness());
    let mut rot2 = 0.0;
    let mut grad2 = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let (_, d2) = lift.eval(*xi);
        // ∇w has the single entry ∂w1/∂x2 (∂w1/∂x1 = 0, w2 = 0).
        let grad = [[0.0, d2], [0.0, 0.0]];
        grad2 += wi * grad.iter().flatten().map(|c| c * c).sum::<f64>();
        let rot = grad[1][0] - grad[0][1];
        rot2 += wi * rot * rot;
    }
    LiftInvariants {
        wall_tangential_error: (lift.eval(0.0).0 - lift.s).abs(),
        top_velocity: top,
        rot_grad_residual: (rot2 - grad2).abs() * g.length,
    }
}

/// Representation of the trilinear tensor.
#[derive(Debug, Clone)]
pub enum Trilinear {
    /// `slices[i][(j, k)] = ⟨B(v_i, v_j), v_k⟩`.
    Dense(Vec<DMatrix<f64>>),
    /// Contract at quadrature nodes on every call.
    OnTheFly,
}

#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub nu: f64,
    /// Stokes eigenvalues `μ_k` (diagonal of the stiffness in this basis).
    pub mu: DVector<f64>,
    pub tensor: Trilinear,
    /// Interior table of the Stokes eigenmodes.
    pub interior: NodalTable,
    pub f_vector: DVector<f64>,
    /// `G1[j][k] = ⟨B(v_j, w), v_k⟩`.
    pub g_bw: DMatrix<f64>,
    /// `G2[j][k] = ⟨B(w, v_j), v_k⟩`.
    pub g_wb: DMatrix<f64>,
    /// Matrix of `a ↦ G(a)`: `-(G1ᵀ + G2ᵀ)`.
    pub g_matrix: DMatrix<f64>,
    /// Normal trace of each eigenmode at the wall nodes (`N × n_wall`).
    pub wall_trace: DMatrix<f64>,
    pub wall_x: Vec<f64>,
    pub wall_weight: f64,
    pub f_dual_norm: f64,
    pub lift: LiftField,
}

pub const DENSE_TENSOR_LIMIT: usize = 64;

pub fn assemble_operators(basis: &DivFreeBasis, nu: f64, lift: &LiftField) -> Result<OperatorSet> {
    assemble_operators_with(basis, nu, lift, DENSE_TENSOR_LIMIT)
}

pub fn assemble_operators_with(
    basis: &DivFreeBasis,
    nu: f64,
    lift: &LiftField,
    dense_limit: usize,
) -> Result<OperatorSet> {
    assemble_operators_from(basis, nu, lift, dense_limit, None)
}

/// Lift-dependent pieces `(F, G1, G2)` in Stokes coordinates.
pub type LiftParts = (DVector<f64>, DMatrix<f64>, DMatrix<f64>);

/// As [`assemble_operators_with`], reusing precomputed lift parts when given.
pub fn assemble_operators_from(
    basis: &DivFreeBasis,
    nu: f64,
    lift: &LiftField,
    dense_limit: usize,
    parts: Option<LiftParts>,
) -> Result<OperatorSet> {
    if &lift.geometry != basis.geometry() {
        return Err(Error::GeometryMismatch);
    }
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::invalid("nu", "must be positive"));
    }
    let n = basis.n_modes();
    let x = &basis.stokes.vectors;
    let interior = basis.interior.transformed(x);
    let wall = basis.wall.transformed(x);
    let wall_trace = -&wall.v[1];
    let wall_x: Vec<f64> = wall.points.iter().map(|p| p.0).collect();
    let wall_weight = wall.weights.first().copied().unwrap_or(0.0);
    let mu = basis.stokes.values.clone();

    let tensor = if n <= dense_limit { Trilinear::Dense(dense_tensor(&interior)) } else { Trilinear::OnTheFly };

    let (f_vector, g_bw, g_wb) = if let Some(p) = parts.filter(|p| p.0.len() == n) {
        p
    } else if lift.is_zero() {
        (DVector::zeros(n), DMatrix::zeros(n, n), DMatrix::zeros(n, n))
    } else {
        lift_terms(basis, nu, lift)
    };
    let g_matrix = -(g_bw.transpose() + g_wb.transpose());
    let f_dual_norm = diag_dual_norm(&f_vector, &mu);
    Ok(OperatorSet {
        nu,
        mu,
        tensor,
        interior,
        f_vector,
        g_bw,
        g_wb,
        g_matrix,
        wall_trace,
        wall_x,
        wall_weight,
        f_dual_norm,
        lift: lift.clone(),
    })
}

fn weighted(t: &NodalTable, f: &DMatrix<f64>, scale: &[f64]) -> DMatrix<f64> {
    let mut out = f.clone();
    for p in 0..t.n_points() {
        out.column_mut(p).scale_mut(t.weights[p] * scale[p]);
    }
    out
}

fn dense_tensor(t: &NodalTable) -> Vec<DMatrix<f64>> {
    let omega = t.vorticity();
    let idx: Vec<usize> = (0..t.n_modes()).collect();
    crate::par_map(&idx, |&i| {
        let om: Vec<f64> = omega.row(i).iter().copied().collect();
        let p = weighted(t, &t.v[0], &om) * t.v[1].transpose();
        &p - p.transpose()
    })
}

/// Lift quadrature: trapezoid in `x1` times Gauss–Legendre across the layer.
fn lift_table(basis: &DivFreeBasis, lift: &LiftField) -> NodalTable {
    let g = basis.geometry();
    let n1 = basis.n1;
    let (x2s, w2) = gauss_legendre_on(g.quadrature.n_lift.max(8), 0.0, lift.thickness());
    let w1 = g.length / n1 as f64;
    let mut pts = Vec::with_capacity(n1 * x2s.len());
    let mut wts = Vec::with_capacity(n1 * x2s.len());
    for i in 0..n1 {
        let x1 = g.length * i as f64 / n1 as f64;
        for (x2, w) in x2s.iter().zip(&w2) {
            pts.push((x1, *x2));
            wts.push(w1 * w);
        }
    }
    basis.stokes_table(pts, wts)
}

fn lift_terms(basis: &DivFreeBasis, nu: f64, lift: &LiftField) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let t = lift_table(basis, lift);
    let np = t.n_points();
    let w1: Vec<f64> = t.points.iter().map(|p| lift.eval(p.1).0).collect();
    let ow: Vec<f64> = t.points.iter().map(|p| lift.vorticity(p.1)).collect();
    let omega = t.vorticity();
    let ow_w1: Vec<f64> = (0..np).map(|p| ow[p] * w1[p]).collect();
    let f = nu * (weighted(&t, &omega, &ow) * DVector::from_element(np, 1.0))
        - weighted(&t, &t.v[1], &ow_w1) * DVector::from_element(np, 1.0);
    let g_bw = weighted(&t, &omega, &w1) * t.v[1].transpose();
    let g_wb = weighted(&t, &t.v[0], &ow) * t.v[1].transpose() - weighted(&t, &t.v[1], &ow) * t.v[0].transpose();
    (f, g_bw, g_wb)
}

fn diag_dual_norm(load: &DVector<f64>, mu: &DVector<f64>) -> f64 {
    load.iter().zip(mu.iter()).map(|(l, m)| l * l / m).sum::<f64>().sqrt()
}

impl OperatorSet {
    pub fn n_modes(&self) -> usize {
        self.mu.len()
    }

    /// `⟨A u, v⟩` for coefficient vectors.
    pub fn a_form(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.nu * u.iter().zip(v.iter()).zip(self.mu.iter()).map(|((a, b), m)| a * b * m).sum::<f64>()
    }

    pub fn a_apply(&self, a: &DVector<f64>) -> DVector<f64> {
        a.component_mul(&self.mu) * self.nu
    }

    pub fn v_norm(&self, a: &DVector<f64>) -> f64 {
        a.iter().zip(self.mu.iter()).map(|(x, m)| x * x * m).sum::<f64>().sqrt()
    }

    pub fn h_norm(&self, a: &DVector<f64>) -> f64 {
        a.norm()
    }

    /// `‖ℓ‖_{V*}` for a load in eigenbasis coordinates.
    pub fn dual_norm(&self, load: &DVector<f64>) -> f64 {
        diag_dual_norm(load, &self.mu)
    }

    /// `B[a]` as a load vector: `(B[a])_k = ⟨B(v_a, v_a), v_k⟩`.
    pub fn nonlinear(&self, a: &DVector<f64>) -> DVector<f64> {
        match &self.tensor {
            Trilinear::Dense(slices) => {
                let mut out = DVector::zeros(a.len());
                for (ai, s) in a.iter().zip(slices) {
                    if *ai != 0.0 {
                        out.gemv_tr(*ai, s, a, 1.0);
                    }
                }
                out
            }
            Trilinear::OnTheFly => self.trilinear_load(a, a),
        }
    }

    /// `k ↦ ⟨B(u, v), v_k⟩` by quadrature contraction.
    pub fn trilinear_load(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let t = &self.interior;
        let omega = t.vorticity().tr_mul(u);
        let v1 = t.v[0].tr_mul(v);
        let v2 = t.v[1].tr_mul(v);
        let c1: DVector<f64> = DVector::from_fn(t.n_points(), |p, _| t.weights[p] * omega[p] * v1[p]);
        let c2: DVector<f64> = DVector::from_fn(t.n_points(), |p, _| t.weights[p] * omega[p] * v2[p]);
        &t.v[1] * c1 - &t.v[0] * c2
    }

    /// `⟨B(u, v), z⟩`.
    pub fn trilinear(&self, u: &DVector<f64>, v: &DVector<f64>, z: &DVector<f64>) -> f64 {
        match &self.tensor {
            Trilinear::Dense(slices) => {
                let mut acc = 0.0;
                for (ui, s) in u.iter().zip(slices) {
                    if *ui != 0.0 {
                        acc += ui * (s.tr_mul(v)).dot(z);
                    }
                }
                acc
            }
            Trilinear::OnTheFly => self.trilinear_load(u, v).dot(z),
        }
    }

    /// `G(a)`.
    pub fn g_apply(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.g_matrix * a
    }

    /// `v_N` at the wall nodes.
    pub fn normal_trace(&self, a: &DVector<f64>) -> DVector<f64> {
        self.wall_trace.tr_mul(a)
    }

    /// `k ↦ (ξ, (v_k)_N)_{L²(Γ0)}`.
    pub fn boundary_load(&self, xi: &DVector<f64>) -> DVector<f64> {
        &self.wall_trace * xi * self.wall_weight
    }

    /// `(ξ, ζ)_{L²(Γ0)}` for samples at the wall nodes.
    pub fn wall_inner(&self, xi: &DVector<f64>, zeta: &DVector<f64>) -> f64 {
        xi.dot(zeta) * self.wall_weight
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LiftBoundReport {
    pub lambda: f64,
    /// Spectral radius of `sym(G1)` relative to the stiffness.
    pub spectral_radius: f64,
    pub draws: usize,
    pub violations: usize,
    pub max_ratio: f64,
    pub passed: bool,
}

/// `|⟨B(v, w), v⟩| ≤ λ‖v‖²` on random draws and via the sharp matrix bound.
pub fn lift_bound_check<R: Rng + ?Sized>(ops: &OperatorSet, draws: usize, rng: &mut R) -> Result<LiftBoundReport> {
    let lambda = ops.lift.lambda;
    let sym = linalg::symmetrized(&ops.g_bw);
    let spectral_radius = linalg::diag_scaled_spectral_radius(&sym, &ops.mu)?;
    let n = ops.n_modes();
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    for _ in 0..draws {
        let a = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let lhs = a.dot(&(&ops.g_bw * &a)).abs();
        let v2 = ops.v_norm(&a).powi(2);
        let ratio = lhs / v2;
        max_ratio = max_ratio.max(ratio);
        if lhs > lambda * v2 {
            violations += 1;
        }
    }
    Ok(LiftBoundReport {
        lambda,
        spectral_radius,
        draws,
        violations,
        max_ratio,
        passed: violations == 0 && spectral_radius <= lambda,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryIdentityReport {
    pub samples: usize,
    /// `⟨B[v], z⟩` against `∫(z·∇)v·v - ∫(v·∇)z·v`, relative to `‖v‖²‖z‖`.
    pub interior_form_residual: f64,
    /// `⟨B[v], z⟩` against `½∫_{Γ0} v_N² z_N - ∫(v·∇)z·v`.
    pub boundary_form_residual: f64,
}

/// Independent quadrature of both sides of the integration-by-parts identities.
pub fn boundary_identity_check(ops: &OperatorSet, pairs: &[(DVector<f64>, DVector<f64>)]) -> BoundaryIdentityReport {
    let t = &ops.interior;
    let mut r1: f64 = 0.0;
    let mut r2: f64 = 0.0;
    for (v, z) in pairs {
        let lhs = ops.trilinear(v, v, z);
        let (mut zgv, mut vgz) = (0.0, 0.0);
        for p in 0..t.n_points() {
            let fv = t.combine_at(v, p);
            let fz = t.combine_at(z, p);
            let w = t.weights[p];
            for a in 0..2 {
                for b in 0..2 {
                    zgv += w * fz.v[b] * fv.grad[a][b] * fv.v[a];
                    vgz += w * fv.v[b] * fz.grad[a][b] * fv.v[a];
                }
            }
        }
        let vn = ops.normal_trace(v);
        let zn = ops.normal_trace(z);
        let wall = 0.5 * ops.wall_inner(&vn.component_mul(&vn), &zn);
        let scale = (ops.v_norm(v).powi(2) * ops.v_norm(z)).max(f64::MIN_POSITIVE);
        r1 = r1.max((lhs - (zgv - vgz)).abs() / scale);
        r2 = r2.max((lhs - (wall - vgz)).abs() / scale);
    }
    BoundaryIdentityReport { samples: pairs.len(), interior_form_residual: r1, boundary_form_residual: r2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::geometry::{build_channel, HeightSpec, QuadratureSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn setup(s: f64, lambda: f64, k: usize, m: usize) -> (DivFreeBasis, OperatorSet) {
        let g = build_channel(2.0 * PI, HeightSpec::constant(1.0), QuadratureSpec::new()).unwrap();
        let b = build_basis(&g, k, m).unwrap();
        let lift = build_lift(s, lambda, &g).unwrap();
        let ops = assemble_operators(&b, 1.0, &lift).unwrap();
        (b, ops)
    }

    #[test]
    fn lift_support_matches_formula() {
        let g = build_channel(2.0 * PI, HeightSpec::constant(1.0), QuadratureSpec::new()).unwrap();
        let l = build_lift(1.0, 0.5, &g).unwrap();
        assert_eq!(l.t0, 0.25);
        assert_eq!(l.eval(0.0).0, 1.0);
        assert_eq!(l.eval(0.25).0, 0.0);
        assert_eq!(l.eval(0.6).0, 0.0);
        let inv = lift_invariants(&l, 64);
        assert!(inv.top_velocity == 0.0 && inv.wall_tangential_error == 0.0);
        assert!(inv.rot_grad_residual < 1e-12);
    }

    #[test]
    fn zero_slide_gives_zero_lift_terms() {
        let (_, ops) = setup(0.0, 0.2, 2, 3);
        assert_eq!(ops.f_vector.amax(), 0.0);
        assert_eq!(ops.g_matrix.amax(), 0.0);
        assert_eq!(ops.lift.t0, 1.0);
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let g = build_channel(2.0 * PI, HeightSpec::constant(1.0), QuadratureSpec::new()).unwrap();
        let other = build_channel(3.0, HeightSpec::constant(1.0), QuadratureSpec::new()).unwrap();
        let b = build_basis(&g, 1, 2).unwrap();
        let lift = build_lift(1.0, 0.2, &other).unwrap();
        assert!(matches!(assemble_operators(&b, 1.0, &lift), Err(Error::GeometryMismatch)));
    }

    #[test]
    fn tensor_is_antisymmetric_and_matches_contraction() {
        let (_, ops) = setup(1.0, 0.2, 2, 3);
        let Trilinear::Dense(slices) = &ops.tensor else { panic!() };
        for s in slices {
            assert!((s + s.transpose()).amax() < 1e-14);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DVector::from_fn(ops.n_modes(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let dense = ops.nonlinear(&a);
        let fly = ops.trilinear_load(&a, &a);
        assert!((dense - fly).amax() < 1e-12 * a.norm().powi(2) * 100.0);
    }

    #[test]
    fn dual_norm_of_stokes_load_is_viscous_norm() {
        let (_, ops) = setup(1.0, 0.2, 2, 3);
        let a = DVector::from_fn(ops.n_modes(), |i, _| (i as f64 * 0.7).sin());
        let ratio = ops.dual_norm(&ops.a_apply(&a)) / ops.v_norm(&a);
        assert!((ratio - ops.nu).abs() < 1e-12);
    }

    #[test]
    fn lift_bound_holds_at_canonical_size() {
        let (_, ops) = setup(1.0, 0.2, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = lift_bound_check(&ops, 200, &mut rng).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn boundary_identities_hold() {
        let (_, ops) = setup(1.0, 0.2, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = ops.n_modes();
        let pairs: Vec<_> = (0..5)
            .map(|_| {
                (
                    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)),
                    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)),
                )
            })
            .collect();
        let r = boundary_identity_check(&ops, &pairs);
        assert!(r.interior_form_residual < 1e-8 && r.boundary_form_residual < 1e-8, "{r:?}");
    }
}
