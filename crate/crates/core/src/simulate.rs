//! Time integration of the regularized Galerkin system
//!
//! `a' = F + G a - ν·diag(μ) a - B[a] - (jₙ'(v_N), (v_k)_N)_{Γ0}`
//!
//! in the Stokes eigenbasis, where the mass matrix is the identity. The
//! default scheme is second-order exponential time differencing (ETD2RK):
//! the diagonal viscous part is integrated exactly and the rest explicitly.
//! A first-order IMEX Euler scheme (implicit viscous part) is also provided.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::SchemeName;
use crate::constants::ConstantsAudit;
use crate::mollifier::MollifiedPotential;
use crate::operators::OperatorSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeScheme {
    Etd2,
    ImexEuler,
}

impl From<SchemeName> for TimeScheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Etd2 => TimeScheme::Etd2,
            SchemeName::ImexEuler => TimeScheme::ImexEuler,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowParameters {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: TimeScheme,
    pub convection: bool,
    pub boundary_law: bool,
    /// Abort once `‖v‖_H` exceeds this.
    pub blowup_limit: Option<f64>,
    /// Check every selection against the hull of `∂j` near `v_N`.
    pub check_selection: bool,
}

impl FlowParameters {
    pub fn new(dt: f64, t_end: f64) -> Self {
        FlowParameters {
            dt,
            t_end,
            scheme: TimeScheme::Etd2,
            convection: true,
            boundary_law: true,
            blowup_limit: None,
            check_selection: true,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt", "must be positive"));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::invalid("t_end", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinState {
    pub step: usize,
    pub t: f64,
    pub a: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    Zero,
    RandomHBall { radius: f64, seed: u64, stream: u64 },
    Eigenmode { index: usize, amp: f64 },
}

/// Generator for stream `stream` of the run seeded with `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl InitialCondition {
    /// Coefficients in the Stokes eigenbasis. Random data weights mode `k`
    /// by `sqrt(μ1/μ_k)` so the field stays in `V` as the basis grows.
    pub fn coefficients(&self, mu: &DVector<f64>) -> Result<DVector<f64>> {
        let n = mu.len();
        match *self {
            InitialCondition::Zero => Ok(DVector::zeros(n)),
            InitialCondition::RandomHBall { radius, seed, stream } => {
                if !(radius >= 0.0) {
                    return Err(Error::invalid("initial.radius", "must be nonnegative"));
                }
                let mut rng = rng_for(seed, stream);
                let raw = DVector::from_fn(n, |k, _| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    g * (mu[0] / mu[k]).sqrt()
                });
                let norm = raw.norm();
                Ok(if norm > 0.0 { raw * (radius / norm) } else { raw })
            }
            InitialCondition::Eigenmode { index, amp } => {
                if index >= n {
                    return Err(Error::invalid("initial.index", format!("{index} out of range 0..{n}")));
                }
                let mut a = DVector::zeros(n);
                a[index] = amp;
                Ok(a)
            }
        }
    }
}

/// Right-hand side evaluation with selection bookkeeping.
pub struct Dynamics<'a> {
    pub ops: &'a OperatorSet,
    pub jn: &'a MollifiedPotential,
    pub convection: bool,
    pub boundary_law: bool,
    pub check_selection: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SelectionStats {
    pub checks: usize,
    pub violations: usize,
    pub max_abs_vn: f64,
}

impl<'a> Dynamics<'a> {
    pub fn new(ops: &'a OperatorSet, jn: &'a MollifiedPotential, params: &FlowParameters) -> Self {
        Dynamics {
            ops,
            jn,
            convection: params.convection,
            boundary_law: params.boundary_law,
            check_selection: params.check_selection,
        }
    }

    /// `ξ = jₙ'(v_N)` at the wall nodes.
    pub fn selection(&self, a: &DVector<f64>, stats: &mut SelectionStats) -> (DVector<f64>, DVector<f64>) {
        let vn = self.ops.normal_trace(a);
        let xi = vn.map(|s| self.jn.derivative(s));
        for (s, x) in vn.iter().zip(xi.iter()) {
            stats.max_abs_vn = stats.max_abs_vn.max(s.abs());
            if self.check_selection {
                stats.checks += 1;
                let r = self.jn.radius();
                let hull = self.jn.base.derivative_hull(s - r, s + r);
                if !hull.contains(*x, 1e-8 * (1.0 + hull.mag())) {
                    stats.violations += 1;
                }
            }
        }
        (vn, xi)
    }

    /// Everything except the viscous term.
    pub fn explicit_part(&self, a: &DVector<f64>, stats: &mut SelectionStats) -> DVector<f64> {
        let ops = self.ops;
        let mut r = &ops.f_vector + ops.g_apply(a);
        if self.convection {
            r -= ops.nonlinear(a);
        }
        if self.boundary_law {
            let (_, xi) = self.selection(a, stats);
            r -= ops.boundary_load(&xi);
        }
        r
    }

    /// Full residual `F + G a - A a - B[a] - boundary load`, i.e. `a'`.
    pub fn residual(&self, a: &DVector<f64>, stats: &mut SelectionStats) -> DVector<f64> {
        self.explicit_part(a, stats) - self.ops.a_apply(a)
    }
}

/// `(e^z - 1)/z`.
fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

/// `(e^z - 1 - z)/z²`.
fn phi2(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        let mut term = 0.5;
        let mut acc = 0.5;
        for k in 3..12 {
            term *= z / k as f64;
            acc += term;
        }
        acc
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// Precomputed per-mode factors for one step size.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub scheme: TimeScheme,
    pub dt: f64,
    decay: DVector<f64>,
    p1: DVector<f64>,
    p2: DVector<f64>,
}

impl Stepper {
    pub fn new(ops: &OperatorSet, scheme: TimeScheme, dt: f64) -> Self {
        let z = ops.mu.map(|m| -ops.nu * m * dt);
        match scheme {
            TimeScheme::Etd2 => Stepper {
                scheme,
                dt,
                decay: z.map(f64::exp),
                p1: z.map(|z| dt * phi1(z)),
                p2: z.map(|z| dt * phi2(z)),
            },
            TimeScheme::ImexEuler => {
                let inv = z.map(|z| 1.0 / (1.0 - z));
                Stepper { scheme, dt, decay: inv.clone(), p1: inv * dt, p2: DVector::zeros(ops.mu.len()) }
            }
        }
    }

    pub fn step(&self, dyn_: &Dynamics<'_>, a: &DVector<f64>, stats: &mut SelectionStats) -> DVector<f64> {
        let n0 = dyn_.explicit_part(a, stats);
        let pred = self.decay.component_mul(a) + self.p1.component_mul(&n0);
        match self.scheme {
            TimeScheme::ImexEuler => pred,
            TimeScheme::Etd2 => {
                let n1 = dyn_.explicit_part(&pred, stats);
                pred + self.p2.component_mul(&(n1 - n0))
            }
        }
    }
}

/// One step of the scheme from `state`.
pub fn step(
    state: &GalerkinState,
    ops: &OperatorSet,
    jn: &MollifiedPotential,
    params: &FlowParameters,
) -> Result<GalerkinState> {
    params.validate()?;
    let dyn_ = Dynamics::new(ops, jn, params);
    let stepper = Stepper::new(ops, params.scheme, params.dt);
    let mut stats = SelectionStats::default();
    let a = stepper.step(&dyn_, &state.a, &mut stats);
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState { step: state.step + 1 });
    }
    Ok(GalerkinState { step: state.step + 1, t: state.t + params.dt, a })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    /// Accumulated shift applied to the original trajectory.
    pub shift: f64,
    /// Difference between the requested and the applied (grid-aligned) shift.
    pub shift_offset: f64,
    pub scheme: Option<TimeScheme>,
    pub seed: Option<u64>,
    pub label: String,
}

/// Sampled trajectory with its norm channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub coeffs: Vec<DVector<f64>>,
    pub h_norm: Vec<f64>,
    pub v_norm: Vec<f64>,
    /// `‖v'‖_{V*}` from the residual functional (authoritative).
    pub vprime: Vec<f64>,
    /// `‖(a_{k} - a_{k-1})/dt‖_{V*}`; the first entry repeats the second.
    pub vprime_fd: Vec<f64>,
    /// Largest `|v_N|` on the wall at each sample.
    pub max_abs_vn: Vec<f64>,
    pub selection: SelectionStats,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0)
    }

    /// Builds a trajectory from bare channels (synthetic data for diagnostics).
    pub fn from_channels(dt: f64, h_norm: Vec<f64>, v_norm: Vec<f64>, vprime: Vec<f64>) -> Self {
        let n = h_norm.len();
        assert!(v_norm.len() == n && vprime.len() == n, "channel lengths differ");
        Trajectory {
            dt,
            times: (0..n).map(|k| k as f64 * dt).collect(),
            coeffs: vec![DVector::zeros(0); n],
            h_norm,
            v_norm,
            vprime_fd: vprime.clone(),
            vprime,
            max_abs_vn: vec![0.0; n],
            selection: SelectionStats::default(),
            meta: TrajectoryMeta::default(),
        }
    }
}

/// Periodic checkpoint sink.
#[derive(Debug, Clone)]
pub struct CheckpointSink {
    pub dir: PathBuf,
    pub every: usize,
    pub config_hash: [u8; 32],
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"SFCK";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: [u8; 32],
    pub step: u64,
    pub t: f64,
    pub coeffs: Vec<f64>,
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&self.config_hash)?;
        w.write_all(&self.step.to_le_bytes())?;
        w.write_all(&self.t.to_le_bytes())?;
        w.write_all(&(self.coeffs.len() as u64).to_le_bytes())?;
        for c in &self.coeffs {
            w.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Cache("not a checkpoint file".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Cache(format!("unsupported checkpoint version {version}")));
        }
        let mut config_hash = [0u8; 32];
        r.read_exact(&mut config_hash)?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let step = u64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let t = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let mut coeffs = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            coeffs.push(f64::from_le_bytes(b8));
        }
        Ok(Checkpoint { config_hash, step, t, coeffs })
    }

    pub fn path_for(dir: &Path, step: usize) -> PathBuf {
        dir.join(format!("checkpoint_{step:08}.bin"))
    }
}

/// Integrates from `a0` to `params.t_end`, sampling every step.
pub fn run(
    params: &FlowParameters,
    ops: &OperatorSet,
    jn: &MollifiedPotential,
    a0: &DVector<f64>,
    checkpoints: Option<&CheckpointSink>,
) -> Result<Trajectory> {
    params.validate()?;
    if a0.len() != ops.n_modes() {
        return Err(Error::invalid("v0", format!("length {} for {} modes", a0.len(), ops.n_modes())));
    }
    if a0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState { step: 0 });
    }
    let steps = params.steps();
    let dyn_ = Dynamics::new(ops, jn, params);
    let stepper = Stepper::new(ops, params.scheme, params.dt);
    let mut stats = SelectionStats::default();
    let mut traj = Trajectory {
        dt: params.dt,
        times: Vec::with_capacity(steps + 1),
        coeffs: Vec::with_capacity(steps + 1),
        h_norm: Vec::with_capacity(steps + 1),
        v_norm: Vec::with_capacity(steps + 1),
        vprime: Vec::with_capacity(steps + 1),
        vprime_fd: Vec::with_capacity(steps + 1),
        max_abs_vn: Vec::with_capacity(steps + 1),
        selection: SelectionStats::default(),
        meta: TrajectoryMeta { scheme: Some(params.scheme), ..Default::default() },
    };
    let mut a = a0.clone();
    for k in 0..=steps {
        let t = k as f64 * params.dt;
        let mut local = SelectionStats::default();
        let residual = dyn_.residual(&a, &mut local);
        let vn_max = ops.normal_trace(&a).amax();
        traj.times.push(t);
        traj.h_norm.push(ops.h_norm(&a));
        traj.v_norm.push(ops.v_norm(&a));
        traj.vprime.push(ops.dual_norm(&residual));
        traj.max_abs_vn.push(vn_max);
        if let Some(prev) = traj.coeffs.last() {
            traj.vprime_fd.push(ops.dual_norm(&((&a - prev) / params.dt)));
        } else {
            traj.vprime_fd.push(0.0);
        }
        traj.coeffs.push(a.clone());
        if let Some(sink) = checkpoints {
            if sink.every > 0 && k % sink.every == 0 {
                let cp = Checkpoint { config_hash: sink.config_hash, step: k as u64, t, coeffs: a.iter().copied().collect() };
                std::fs::create_dir_all(&sink.dir)?;
                let f = std::fs::File::create(Checkpoint::path_for(&sink.dir, k))?;
                cp.write_to(std::io::BufWriter::new(f))?;
            }
        }
        if k == steps {
            break;
        }
        a = stepper.step(&dyn_, &a, &mut stats);
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState { step: k + 1 });
        }
        if let Some(limit) = params.blowup_limit {
            let norm = a.norm();
            if norm > limit {
                return Err(Error::BlowUp { step: k + 1, norm, limit });
            }
        }
    }
    if traj.vprime_fd.len() > 1 {
        traj.vprime_fd[0] = traj.vprime_fd[1];
    }
    traj.selection = stats;
    Ok(traj)
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub slack: Vec<f64>,
    pub tolerance: Vec<f64>,
    pub violations: usize,
    pub max_excess: f64,
    /// `½‖v(t)‖²_H + C1 Σ dt‖v‖²` at the final time.
    pub integrated_lhs: f64,
    /// `½‖v0‖²_H + K·t + Σ dt·tol`.
    pub integrated_rhs: f64,
    pub integrated_ok: bool,
}

/// Discrete check of `½ d/dt ‖v‖²_H + C1‖v‖² ≤ C2(1 + ‖F‖²)`.
pub fn energy_monitor(traj: &Trajectory, audit: &ConstantsAudit, c_tol: f64) -> EnergyReport {
    let c1 = audit.big_c1;
    let k = audit.k_energy;
    let dt = traj.dt;
    let n = traj.len();
    let mut slack = Vec::with_capacity(n.saturating_sub(1));
    let mut tolerance = Vec::with_capacity(n.saturating_sub(1));
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    let mut dissipation = 0.0;
    let mut tol_sum = 0.0;
    for i in 0..n.saturating_sub(1) {
        let y0 = traj.h_norm[i].powi(2);
        let y1 = traj.h_norm[i + 1].powi(2);
        let v2 = traj.v_norm[i + 1].powi(2);
        let s = (y1 - y0) / (2.0 * dt) + c1 * v2 - k;
        let tol = c_tol * dt * v2.max(1.0);
        if s > tol {
            violations += 1;
        }
        max_excess = max_excess.max(s - tol);
        dissipation += dt * v2;
        tol_sum += dt * tol;
        slack.push(s);
        tolerance.push(tol);
    }
    let t = traj.horizon();
    let lhs = 0.5 * traj.h_norm.last().map_or(0.0, |h| h * h) + c1 * dissipation;
    let rhs = 0.5 * traj.h_norm.first().map_or(0.0, |h| h * h) + k * t + tol_sum;
    EnergyReport {
        slack,
        tolerance,
        violations,
        max_excess,
        integrated_lhs: lhs,
        integrated_rhs: rhs,
        integrated_ok: lhs <= rhs,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VPrimeReport {
    pub violations: usize,
    /// Largest `‖v'‖_{V*} / bound`.
    pub max_ratio: f64,
    /// Largest relative gap between the residual and difference-quotient channels.
    pub max_fd_gap: f64,
}

/// `C3·(1 + ‖v‖ + ‖v‖_H^{1/2}‖v‖^{3/2})`.
pub fn vprime_bound(c3: f64, h: f64, v: f64) -> f64 {
    c3 * (1.0 + v + h.sqrt() * v.powf(1.5))
}

pub fn vprime_monitor(traj: &Trajectory, audit: &ConstantsAudit) -> VPrimeReport {
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    let mut max_gap: f64 = 0.0;
    for i in 0..traj.len() {
        let bound = vprime_bound(audit.big_c3, traj.h_norm[i], traj.v_norm[i]);
        let ratio = traj.vprime[i] / bound;
        max_ratio = max_ratio.max(ratio);
        if traj.vprime[i] > bound {
            violations += 1;
        }
        if i > 0 {
            let scale = traj.vprime[i].max(traj.vprime[i - 1]).max(1e-12);
            max_gap = max_gap.max((traj.vprime_fd[i] - 0.5 * (traj.vprime[i] + traj.vprime[i - 1])).abs() / scale);
        }
    }
    VPrimeReport { violations, max_ratio, max_fd_gap: max_gap }
}
