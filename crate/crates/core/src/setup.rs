//! Assembly of every run ingredient from a [`RunConfig`].

use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use crate::attractor::EnsembleSpec;
use crate::basis::DivFreeBasis;
use crate::cache::{self, CacheStatus};
use crate::certify::{certify_mollified, PotentialCertificate};
use crate::config::{InitialSpec, RunConfig};
use crate::constants::{compute_constants, ladyzhenskaya_constant, ConstantsAudit, ConstantsInput, LadyzhenskayaReport};
use crate::geometry::{build_channel, ChannelGeometry};
use crate::linalg;
use crate::mollifier::{mollify_with_tol, MollifiedPotential};
use crate::operators::{build_lift, LiftField, OperatorSet};
use crate::potential::Superpotential;
use crate::simulate::{rng_for, FlowParameters, InitialCondition};
use crate::Result;

/// Generator stream reserved for the Ladyzhenskaya search.
pub const LADYZHENSKAYA_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CacheReport {
    pub basis: CacheStatus,
    pub operators: CacheStatus,
}

pub struct Pipeline {
    pub config: RunConfig,
    pub geometry: ChannelGeometry,
    pub basis: DivFreeBasis,
    pub lift: LiftField,
    pub ops: OperatorSet,
    pub potential: Superpotential,
    pub jn: MollifiedPotential,
    pub gamma_norm: f64,
    pub lambda1: f64,
    pub g_norm: f64,
    pub certificate: PotentialCertificate,
    pub ladyzhenskaya: LadyzhenskayaReport,
    pub audit: ConstantsAudit,
    pub cache: CacheReport,
}

impl Pipeline {
    pub fn build(config: &RunConfig) -> Result<Self> {
        let g = &config.geometry;
        let geometry = build_channel(g.length, g.height.clone(), g.quadrature.clone())?;
        let cache_dir = config.output.cache_dir.as_deref().map(Path::new);
        let (basis, basis_status) = cache::load_or_build_basis(cache_dir, &geometry, config.basis.k, config.basis.m)?;
        let ph = &config.physics;
        let lift = build_lift(ph.s, ph.lambda, &geometry)?;
        let (ops, ops_status) =
            cache::load_or_assemble_operators(cache_dir, &basis, ph.nu, &lift, config.basis.dense_tensor_limit)?;

        let pb = &config.potential;
        let potential = Superpotential::from_spec(&pb.spec()?)?;
        let jn = mollify_with_tol(&potential, pb.n_mollify, pb.tolerance)?;
        let gamma_norm = basis.trace_norm()?;
        let lambda1 = basis.poincare_lambda1();
        let certificate = certify_mollified(&jn, &pb.scan, ph.nu, gamma_norm, pb.margin)?;
        let g_norm = linalg::diag_scaled_operator_norm(&ops.g_matrix, &ops.mu);
        let mut rng = rng_for(config.integration.seed, LADYZHENSKAYA_STREAM);
        let ladyzhenskaya = ladyzhenskaya_constant(&ops.interior, &ops.mu, config.attractor.ladyzhenskaya_samples, &mut rng);
        let input = ConstantsInput {
            nu: ph.nu,
            gamma_norm,
            lambda1,
            lift_lambda: ph.lambda,
            f_dual_norm: ops.f_dual_norm,
            g_norm,
            ladyzhenskaya: ladyzhenskaya.value,
            boundary_measure: geometry.bottom_measure(),
        };
        let audit = compute_constants(&input, &certificate)?;
        Ok(Pipeline {
            config: config.clone(),
            geometry,
            basis,
            lift,
            ops,
            potential,
            jn,
            gamma_norm,
            lambda1,
            g_norm,
            certificate,
            ladyzhenskaya,
            audit,
            cache: CacheReport { basis: basis_status, operators: ops_status },
        })
    }

    pub fn flow_parameters(&self) -> FlowParameters {
        let i = &self.config.integration;
        FlowParameters {
            dt: i.dt,
            t_end: i.t_end,
            scheme: i.scheme.into(),
            convection: self.config.physics.convection,
            boundary_law: self.config.physics.boundary_law,
            blowup_limit: Some(i.blowup_factor * self.audit.gronwall_radius),
            check_selection: true,
        }
    }

    /// Initial H-norm radius requested by the configuration for random data.
    pub fn initial_radius(&self) -> f64 {
        match self.config.integration.initial {
            InitialSpec::RandomHBall { radius } => radius,
            InitialSpec::RandomScaled { factor } => factor * self.audit.gronwall_radius,
            _ => 10.0 * self.audit.gronwall_radius,
        }
    }

    pub fn initial_condition(&self, seed: u64, stream: u64) -> InitialCondition {
        match self.config.integration.initial {
            InitialSpec::Zero => InitialCondition::Zero,
            InitialSpec::Eigenmode { index, amp } => InitialCondition::Eigenmode { index, amp },
            _ => InitialCondition::RandomHBall { radius: self.initial_radius(), seed, stream },
        }
    }

    pub fn initial(&self, seed: u64, stream: u64) -> Result<DVector<f64>> {
        self.initial_condition(seed, stream).coefficients(&self.ops.mu)
    }

    /// SHA-256 of the resolved configuration.
    pub fn config_hash(&self) -> [u8; 32] {
        cache::digest(self.config.resolved().as_bytes())
    }

    pub fn ensemble_spec(&self, seed: u64) -> EnsembleSpec {
        let a = &self.config.attractor;
        let mut params = self.flow_parameters();
        let last = a.t_section + a.section_spacing * a.section_samples.saturating_sub(1) as f64;
        params.t_end = params.t_end.max(last);
        EnsembleSpec {
            params,
            seed,
            count: a.ensemble,
            radius: self.initial_radius(),
            t_section: a.t_section,
            section_samples: a.section_samples,
            section_spacing: a.section_spacing,
            window_step: self.config.window_step(),
            ball_tolerance: a.ball_tolerance,
            energy_tol_factor: self.config.integration.energy_tol_factor,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorSuite {
    pub basis: crate::basis::BasisChecks,
    pub draws: usize,
    /// `max |⟨Av,v⟩ - ν∫|∇v|²| / (ν∫|∇v|²)` with the gradient integral by quadrature.
    pub a_identity: f64,
    /// `max |⟨B(u,v),v⟩| / (‖u‖‖v‖²)`.
    pub b_antisymmetry: f64,
    pub lift_invariants: crate::operators::LiftInvariants,
    pub lift_bound: crate::operators::LiftBoundReport,
    pub boundary_identities: crate::operators::BoundaryIdentityReport,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PotentialSuite {
    pub name: String,
    pub gamma_norm: f64,
    pub d2_limit: f64,
    /// Certificate of the unregularized potential from its Clarke intervals.
    pub clarke_certificate: PotentialCertificate,
    pub mollified_certificate: PotentialCertificate,
    pub kernel: crate::mollifier::KernelReport,
    pub stability: crate::certify::StabilityScan,
    /// `(s, lo, hi)` of the Clarke interval at each breakpoint.
    pub breakpoint_intervals: Vec<(f64, f64, f64)>,
    pub passed: bool,
}

/// Quadrature of `∫|∇v|²` on the interior table.
fn gradient_energy(t: &crate::basis::NodalTable, a: &DVector<f64>) -> f64 {
    let mut sum = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let g = t.grad[i][j].tr_mul(a);
            sum += g.iter().zip(&t.weights).map(|(x, w)| w * x * x).sum::<f64>();
        }
    }
    sum
}

impl Pipeline {
    pub fn verify_operators(&self, draws: usize, seed: u64) -> Result<OperatorSuite> {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rng_for(seed, LADYZHENSKAYA_STREAM + 1);
        let n = self.ops.n_modes();
        let mut normal = || DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let mut a_identity: f64 = 0.0;
        let mut b_anti: f64 = 0.0;
        let mut pairs = Vec::with_capacity(draws);
        for _ in 0..draws {
            let u = normal();
            let v = normal();
            let e = self.ops.nu * gradient_energy(&self.ops.interior, &v);
            a_identity = a_identity.max((self.ops.a_form(&v, &v) - e).abs() / e);
            let b = self.ops.trilinear(&u, &v, &v).abs();
            b_anti = b_anti.max(b / (self.ops.v_norm(&u) * self.ops.v_norm(&v).powi(2)));
            pairs.push((u, v));
        }
        let basis = self.basis.checks()?;
        let lift_invariants = crate::operators::lift_invariants(&self.lift, self.geometry.quadrature.n_lift);
        let lift_bound = crate::operators::lift_bound_check(&self.ops, 1000, &mut rng)?;
        pairs.truncate(20);
        let boundary_identities = crate::operators::boundary_identity_check(&self.ops, &pairs);
        let passed = a_identity < 1e-10
            && b_anti < 1e-8
            && basis.rot_grad_identity < 1e-10
            && basis.max_divergence < 1e-9
            && basis.max_top_velocity < 1e-12
            && basis.max_bottom_tangential < 1e-12
            && lift_bound.passed
            && lift_invariants.wall_tangential_error < 1e-12
            && boundary_identities.interior_form_residual < 1e-8
            && boundary_identities.boundary_form_residual < 1e-8;
        Ok(OperatorSuite { basis, draws, a_identity, b_antisymmetry: b_anti, lift_invariants, lift_bound, boundary_identities, passed })
    }

    pub fn verify_potential(&self) -> Result<PotentialSuite> {
        let pb = &self.config.potential;
        let nu = self.config.physics.nu;
        let clarke_certificate = crate::certify::certify(&self.potential, &pb.scan, nu, self.gamma_norm, pb.margin)?;
        let stability =
            crate::certify::constant_stability_scan(&self.jn, &pb.n_list, &pb.scan, nu, self.gamma_norm, pb.margin)?;
        let breakpoint_intervals = self
            .potential
            .breakpoints
            .iter()
            .map(|&s| {
                let iv = self.potential.clarke_interval(s);
                (s, iv.lo, iv.hi)
            })
            .collect();
        let passed = stability.n0.is_some()
            && stability.rows.iter().all(|r| r.certificate.d2 < r.certificate.d2_limit);
        Ok(PotentialSuite {
            name: self.potential.name.clone(),
            gamma_norm: self.gamma_norm,
            d2_limit: self.certificate.d2_limit,
            clarke_certificate,
            mollified_certificate: self.certificate.clone(),
            kernel: self.jn.kernel_report(),
            stability,
            breakpoint_intervals,
            passed,
        })
    }
}
