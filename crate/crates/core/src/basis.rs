//! Divergence-free Galerkin basis built from stream-function modes.
//!
//! Each mode is `ψ(x1, x2) = τ(x1) φ(η)` with `η = x2 / h(x1)`, a Fourier
//! factor `τ` and a wall-normal profile `φ` satisfying `φ(1) = φ'(1) = 0`
//! (no-slip on the top wall) and `φ'(0) = 0` (no tangential slip on the
//! bottom wall). Velocities are `v = (∂ψ/∂x2, -∂ψ/∂x1)`, so every mode is
//! divergence-free pointwise. Modes are scaled to unit `V`-norm
//! (`∫|∇v|²`); the Stokes rotation (generalized eigenvectors of stiffness
//! against mass) is stored alongside.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geometry::{ChannelGeometry, HeightEval};
use crate::linalg::{self, GeneralizedEigen};
use crate::quadrature::{gauss_legendre_on, periodic_trapezoid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourierMode {
    pub k: usize,
    pub phase: Phase,
}

impl FourierMode {
    /// `(τ, τ', τ'')` at `x1`.
    pub fn eval(&self, length: f64, x1: f64) -> [f64; 3] {
        if self.k == 0 {
            return [1.0, 0.0, 0.0];
        }
        let kappa = 2.0 * PI * self.k as f64 / length;
        let (s, c) = (kappa * x1).sin_cos();
        match self.phase {
            Phase::Cos => [c, -kappa * s, -kappa * kappa * c],
            Phase::Sin => [s, kappa * c, -kappa * kappa * s],
        }
    }
}

/// Fourier factors for wave numbers `0..=k_max`: `cos` only for `k = 0`.
pub fn fourier_modes(k_max: usize) -> Vec<FourierMode> {
    let mut out = vec![FourierMode { k: 0, phase: Phase::Cos }];
    for k in 1..=k_max {
        out.push(FourierMode { k, phase: Phase::Cos });
        out.push(FourierMode { k, phase: Phase::Sin });
    }
    out
}

/// Wall-normal profile `φ(η) = (1 - η)² q(η)`, stored through `q` so that the
/// top-wall conditions hold exactly in floating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    /// Monomial coefficients of `q`, ascending.
    pub q: Vec<f64>,
}

impl Profile {
    /// `(φ, φ', φ'')` at `eta`.
    pub fn eval(&self, eta: f64) -> [f64; 3] {
        let (mut q0, mut q1, mut q2) = (0.0, 0.0, 0.0);
        for &c in self.q.iter().rev() {
            q2 = q2 * eta + 2.0 * q1;
            q1 = q1 * eta + q0;
            q0 = q0 * eta + c;
        }
        let r = 1.0 - eta;
        [r * r * q0, -2.0 * r * q0 + r * r * q1, 2.0 * q0 - 4.0 * r * q1 + r * r * q2]
    }

    /// `φ(0)`; the normal trace on the bottom wall is proportional to it.
    pub fn wall_value(&self) -> f64 {
        self.q.first().copied().unwrap_or(0.0)
    }

    fn axpy(&mut self, alpha: f64, other: &Profile) {
        if self.q.len() < other.q.len() {
            self.q.resize(other.q.len(), 0.0);
        }
        for (a, b) in self.q.iter_mut().zip(&other.q) {
            *a += alpha * b;
        }
    }

    fn scale(&mut self, alpha: f64) {
        self.q.iter_mut().for_each(|c| *c *= alpha);
    }
}

fn profile_inner(a: &Profile, b: &Profile, nodes: &[f64], weights: &[f64]) -> f64 {
    nodes.iter().zip(weights).map(|(&x, &w)| w * a.eval(x)[0] * b.eval(x)[0]).sum()
}

/// `m` orthonormal (in `L²(0,1)`) wall-normal profiles.
///
/// The raw family is `(1-η)²(1+2η)` plus `(1-η)² η^p` for `p = 2..=m`. The
/// subfamily vanishing at the wall is orthogonalized first and the
/// trace-carrying cubic last, so exactly one profile has `φ(0) ≠ 0`.
pub fn wall_profiles(m: usize) -> Result<Vec<Profile>> {
    if m == 0 {
        return Err(Error::invalid("M", "need at least one wall-normal profile"));
    }
    let mut raw: Vec<Profile> = (2..=m)
        .map(|p| {
            let mut q = vec![0.0; p + 1];
            q[p] = 1.0;
            Profile { q }
        })
        .collect();
    raw.push(Profile { q: vec![1.0, 2.0] });
    let (nodes, weights) = gauss_legendre_on(m + 6, 0.0, 1.0);
    let mut out: Vec<Profile> = Vec::with_capacity(m);
    for (idx, mut p) in raw.into_iter().enumerate() {
        let norm0 = profile_inner(&p, &p, &nodes, &weights).sqrt();
        for _pass in 0..2 {
            for prev in &out {
                let c = profile_inner(&p, prev, &nodes, &weights);
                p.axpy(-c, prev);
            }
        }
        let norm = profile_inner(&p, &p, &nodes, &weights).sqrt();
        if !(norm > 1e-10 * norm0) {
            return Err(Error::SingularGram { what: format!("wall profile {idx}") });
        }
        p.scale(1.0 / norm);
        out.push(p);
    }
    // Put the trace-carrying profile first.
    out.rotate_right(1);
    Ok(out)
}

/// Velocity and velocity gradient at a point; `grad[a][b] = ∂v_a/∂x_b`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointField {
    pub v: [f64; 2],
    pub grad: [[f64; 2]; 2],
}

impl PointField {
    pub fn divergence(&self) -> f64 {
        self.grad[0][0] + self.grad[1][1]
    }

    /// Scalar rot: `∂v2/∂x1 - ∂v1/∂x2`.
    pub fn vorticity(&self) -> f64 {
        self.grad[1][0] - self.grad[0][1]
    }

    fn axpy(&mut self, a: f64, o: &PointField) {
        for c in 0..2 {
            self.v[c] += a * o.v[c];
            for d in 0..2 {
                self.grad[c][d] += a * o.grad[c][d];
            }
        }
    }
}

/// Velocity of `ψ = τ(x1) φ(x2/h(x1))`, each gradient entry derived by its own
/// chain rule so that the divergence is a genuine check of the code.
fn stream_mode_field(tau: [f64; 3], phi: [f64; 3], eta: f64, he: HeightEval) -> PointField {
    let [t, t1, t2] = tau;
    let [p, p1, p2] = phi;
    let HeightEval { h, dh, ddh } = he;
    let g = eta * dh / h;
    let dg1 = eta * (ddh / h - 2.0 * dh * dh / (h * h));
    let v1 = t * p1 / h;
    let v2 = -t1 * p + t * p1 * g;
    let d11 = t1 * p1 / h - t * p2 * g / h - t * p1 * dh / (h * h);
    let d12 = t * p2 / (h * h);
    let d21 = -t2 * p + 2.0 * t1 * p1 * g - t * p2 * g * g + t * p1 * dg1;
    let d22 = -t1 * p1 / h + t * p2 * g / h + t * p1 * dh / (h * h);
    PointField { v: [v1, v2], grad: [[d11, d12], [d21, d22]] }
}

/// Fields of every mode tabulated at a point set, one row per mode.
#[derive(Debug, Clone)]
pub struct NodalTable {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
    pub v: [DMatrix<f64>; 2],
    pub grad: [[DMatrix<f64>; 2]; 2],
}

impl NodalTable {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_modes(&self) -> usize {
        self.v[0].nrows()
    }

    /// Table of the combined modes `Σ_i x[i][c] mode_i`, i.e. `xᵀ · table`.
    pub fn transformed(&self, x: &DMatrix<f64>) -> NodalTable {
        let xt = x.transpose();
        NodalTable {
            points: self.points.clone(),
            weights: self.weights.clone(),
            v: [&xt * &self.v[0], &xt * &self.v[1]],
            grad: [
                [&xt * &self.grad[0][0], &xt * &self.grad[0][1]],
                [&xt * &self.grad[1][0], &xt * &self.grad[1][1]],
            ],
        }
    }

    pub fn vorticity(&self) -> DMatrix<f64> {
        &self.grad[1][0] - &self.grad[0][1]
    }

    /// `Σ_p w_p f_i(p) g_j(p)`.
    pub fn weighted_gram(&self, f: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
        let mut fw = f.clone();
        for (p, w) in self.weights.iter().enumerate() {
            fw.column_mut(p).scale_mut(*w);
        }
        fw * g.transpose()
    }

    pub fn mass(&self) -> DMatrix<f64> {
        self.weighted_gram(&self.v[0], &self.v[0]) + self.weighted_gram(&self.v[1], &self.v[1])
    }

    pub fn stiffness(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.n_modes(), self.n_modes());
        for a in 0..2 {
            for b in 0..2 {
                s += self.weighted_gram(&self.grad[a][b], &self.grad[a][b]);
            }
        }
        s
    }

    /// Field of the combination `Σ a_i mode_i` at point `p`.
    pub fn combine_at(&self, a: &DVector<f64>, p: usize) -> PointField {
        let dot = |m: &DMatrix<f64>| m.column(p).dot(a);
        PointField {
            v: [dot(&self.v[0]), dot(&self.v[1])],
            grad: [[dot(&self.grad[0][0]), dot(&self.grad[0][1])], [dot(&self.grad[1][0]), dot(&self.grad[1][1])]],
        }
    }
}

/// Everything needed to evaluate raw modes anywhere in the channel.
#[derive(Debug, Clone)]
pub struct ModeSet {
    pub geometry: ChannelGeometry,
    pub fourier: Vec<FourierMode>,
    pub profiles: Vec<Profile>,
    /// Factor making each raw mode unit in the `V`-norm.
    pub scale: Vec<f64>,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.fourier.len() * self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(fourier index, profile index)` of mode `i`.
    pub fn split(&self, i: usize) -> (usize, usize) {
        (i / self.profiles.len(), i % self.profiles.len())
    }

    pub fn field(&self, i: usize, x1: f64, x2: f64) -> PointField {
        let he = self.geometry.height_at(x1);
        let (f, m) = self.split(i);
        let tau = self.fourier[f].eval(self.geometry.length, x1);
        let eta = x2 / he.h;
        let pf = stream_mode_field(tau, self.profiles[m].eval(eta), eta, he);
        let mut scaled = PointField::default();
        scaled.axpy(self.scale[i], &pf);
        scaled
    }

    pub fn tabulate(&self, points: Vec<(f64, f64)>, weights: Vec<f64>) -> NodalTable {
        let n = self.len();
        let np = points.len();
        let mut v = [DMatrix::zeros(n, np), DMatrix::zeros(n, np)];
        let mut grad = [[DMatrix::zeros(n, np), DMatrix::zeros(n, np)], [DMatrix::zeros(n, np), DMatrix::zeros(n, np)]];
        let nm = self.profiles.len();
        for (p, &(x1, x2)) in points.iter().enumerate() {
            let he = self.geometry.height_at(x1);
            let eta = x2 / he.h;
            let phis: Vec<[f64; 3]> = self.profiles.iter().map(|pr| pr.eval(eta)).collect();
            for (f, fm) in self.fourier.iter().enumerate() {
                let tau = fm.eval(self.geometry.length, x1);
                for (m, phi) in phis.iter().enumerate() {
                    let i = f * nm + m;
                    let pf = stream_mode_field(tau, *phi, eta, he);
                    let s = self.scale[i];
                    v[0][(i, p)] = s * pf.v[0];
                    v[1][(i, p)] = s * pf.v[1];
                    for a in 0..2 {
                        for b in 0..2 {
                            grad[a][b][(i, p)] = s * pf.grad[a][b];
                        }
                    }
                }
            }
        }
        NodalTable { points, weights, v, grad }
    }
}

#[derive(Debug, Clone)]
pub struct DivFreeBasis {
    pub modes: ModeSet,
    pub k_max: usize,
    pub m_count: usize,
    pub n1: usize,
    pub n2: usize,
    /// Interior tensor quadrature, raw modes.
    pub interior: NodalTable,
    /// Bottom-wall trapezoid nodes, raw modes.
    pub wall: NodalTable,
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// `∫_{Γ0} v_i · v_j dσ`.
    pub boundary_gram: DMatrix<f64>,
    /// Normal trace `v·n` (`n = (0,-1)`) of each mode at the wall nodes.
    pub trace_normal: DMatrix<f64>,
    /// Discrete Stokes eigenpairs of `(stiffness, mass)`.
    pub stokes: GeneralizedEigen,
}

/// Default node counts: twice the count needed to integrate triple products
/// of modes exactly when `h` is constant.
pub fn default_node_counts(geometry: &ChannelGeometry, k_max: usize, m: usize) -> (usize, usize) {
    let hdeg = geometry.height.degree();
    let variable = !geometry.height.is_constant();
    let n1 = geometry.quadrature.n1.unwrap_or((2 * (3 * k_max + 1)).max(8) + 4 * hdeg);
    let n2 = geometry.quadrature.n2.unwrap_or(3 * (m + 2) + 1 + if variable { 16 } else { 0 });
    (n1, n2)
}

pub fn build_basis(geometry: &ChannelGeometry, k_max: usize, m: usize) -> Result<DivFreeBasis> {
    build_basis_with(geometry, k_max, m, None)
}

/// As [`build_basis`], reusing previously computed Stokes eigenpairs when given.
pub fn build_basis_with(
    geometry: &ChannelGeometry,
    k_max: usize,
    m: usize,
    stokes: Option<GeneralizedEigen>,
) -> Result<DivFreeBasis> {
    let profiles = wall_profiles(m)?;
    let fourier = fourier_modes(k_max);
    let n = fourier.len() * profiles.len();
    let (n1, n2) = default_node_counts(geometry, k_max, m);
    let mut modes = ModeSet { geometry: geometry.clone(), fourier, profiles, scale: vec![1.0; n] };

    let (x1s, w1) = periodic_trapezoid(n1, geometry.length);
    let (etas, weta) = gauss_legendre_on(n2, 0.0, 1.0);
    let mut points = Vec::with_capacity(n1 * n2);
    let mut weights = Vec::with_capacity(n1 * n2);
    for &x1 in &x1s {
        let h = geometry.height_at(x1).h;
        for (eta, we) in etas.iter().zip(&weta) {
            points.push((x1, eta * h));
            weights.push(w1 * we * h);
        }
    }

    let unscaled = modes.tabulate(points.clone(), weights.clone());
    let diag = unscaled.stiffness().diagonal();
    for i in 0..n {
        if !(diag[i] > 0.0) {
            return Err(Error::SingularGram { what: format!("mode {i} has zero V-norm") });
        }
        modes.scale[i] = 1.0 / diag[i].sqrt();
    }
    let interior = modes.tabulate(points, weights);
    let wall = modes.tabulate(x1s.iter().map(|&x| (x, 0.0)).collect(), vec![w1; n1]);

    let mass = linalg::symmetrized(&interior.mass());
    let stiffness = linalg::symmetrized(&interior.stiffness());
    let boundary_gram = linalg::symmetrized(&wall.mass());
    let trace_normal = -&wall.v[1];
    let stokes = match stokes {
        Some(e) if e.values.len() == n && e.vectors.shape() == (n, n) => e,
        _ => linalg::generalized_eigen(&stiffness, &mass)?,
    };

    Ok(DivFreeBasis { modes, k_max, m_count: m, n1, n2, interior, wall, mass, stiffness, boundary_gram, trace_normal, stokes })
}

/// Residuals of the structural invariants of a basis.
#[derive(Debug, Clone, Serialize)]
pub struct BasisChecks {
    pub max_divergence: f64,
    pub max_top_velocity: f64,
    pub max_bottom_tangential: f64,
    pub mass_asymmetry: f64,
    pub stiffness_asymmetry: f64,
    pub rot_grad_identity: f64,
    pub stiffness_condition: f64,
}

impl DivFreeBasis {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn geometry(&self) -> &ChannelGeometry {
        &self.modes.geometry
    }

    /// Smallest generalized eigenvalue of `(stiffness, mass)`: the discrete
    /// Poincaré constant `λ1` in `λ1 ‖v‖²_H ≤ ‖v‖²`.
    pub fn poincare_lambda1(&self) -> f64 {
        self.stokes.values[0]
    }

    /// Discrete norm of the trace map `(span, V-norm) → L²(Γ0; R²)`.
    pub fn trace_norm(&self) -> Result<f64> {
        let e = linalg::generalized_eigen(&self.boundary_gram, &self.stiffness)?;
        Ok(e.values[e.values.len() - 1].max(0.0).sqrt())
    }

    /// `sqrt(Fᵀ S⁻¹ F)` for a load given in raw-mode coordinates.
    pub fn dual_norm(&self, load: &DVector<f64>) -> Result<f64> {
        let chol = linalg::cholesky(&self.stiffness, "stiffness")?;
        let x = chol.solve(load);
        Ok(load.dot(&x).max(0.0).sqrt())
    }

    pub fn stiffness_condition(&self) -> Result<f64> {
        linalg::condition_number(&self.stiffness)
    }

    /// Raw-mode coefficients of the Stokes-eigenbasis coefficient vector `a`.
    pub fn raw_from_stokes(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.stokes.vectors * a
    }

    /// Table of the Stokes eigenmodes at the given points.
    pub fn stokes_table(&self, points: Vec<(f64, f64)>, weights: Vec<f64>) -> NodalTable {
        self.modes.tabulate(points, weights).transformed(&self.stokes.vectors)
    }

    /// Field of the Stokes-coordinate state `a` at `(x1, x2)`.
    pub fn field_at(&self, a: &DVector<f64>, x1: f64, x2: f64) -> PointField {
        let raw = self.raw_from_stokes(a);
        let mut out = PointField::default();
        for i in 0..self.n_modes() {
            if raw[i] != 0.0 {
                out.axpy(raw[i], &self.modes.field(i, x1, x2));
            }
        }
        out
    }

    pub fn checks(&self) -> Result<BasisChecks> {
        let t = &self.interior;
        let mut max_div: f64 = 0.0;
        for i in 0..self.n_modes() {
            for p in 0..t.n_points() {
                max_div = max_div.max((t.grad[0][0][(i, p)] + t.grad[1][1][(i, p)]).abs());
            }
        }
        let g = self.geometry();
        let top_pts: Vec<(f64, f64)> = (0..self.n1)
            .map(|i| {
                let x1 = g.length * i as f64 / self.n1 as f64;
                (x1, g.height_at(x1).h)
            })
            .collect();
        let top = self.modes.tabulate(top_pts, vec![0.0; self.n1]);
        let max_top = top.v[0].amax().max(top.v[1].amax());
        let max_tan = self.wall.v[0].amax();
        let omega = t.vorticity();
        let rotrot = t.weighted_gram(&omega, &omega);
        let rot_grad = (&rotrot - &self.stiffness).amax();
        Ok(BasisChecks {
            max_divergence: max_div,
            max_top_velocity: max_top,
            max_bottom_tangential: max_tan,
            mass_asymmetry: linalg::max_asymmetry(&t.mass()),
            stiffness_asymmetry: linalg::max_asymmetry(&t.stiffness()),
            rot_grad_identity: rot_grad,
            stiffness_condition: self.stiffness_condition()?,
        })
    }
}
