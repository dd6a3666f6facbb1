//! Audited constants of the energy, derivative and window estimates.
//!
//! Every value carries the formula used to produce it so a run's inequality
//! checks can be replayed by hand from `audit.json`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::NodalTable;
use crate::certify::PotentialCertificate;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub name: String,
    pub value: f64,
    pub formula: String,
}

/// Measured stand-in for `‖v‖_{L⁴} ≤ C_L ‖v‖_H^{1/2} ‖v‖^{1/2}` on the basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadyzhenskayaReport {
    pub value: f64,
    pub samples: usize,
    pub climb_steps: usize,
    pub protocol: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsInput {
    pub nu: f64,
    pub gamma_norm: f64,
    pub lambda1: f64,
    /// Smallness of the lift term, `|⟨G v, v⟩| ≤ λ‖v‖²`.
    pub lift_lambda: f64,
    pub f_dual_norm: f64,
    /// Operator norm of `G : V → V*`.
    pub g_norm: f64,
    pub ladyzhenskaya: f64,
    /// Measure of the slip wall.
    pub boundary_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsAudit {
    pub input: ConstantsInput,
    pub certificate: PotentialCertificate,
    pub epsilon: f64,
    pub big_c1: f64,
    pub big_c2: f64,
    pub big_c3: f64,
    pub big_c4: f64,
    pub big_c5: f64,
    pub big_c6: f64,
    pub big_c7: f64,
    pub big_c8: f64,
    pub big_c9: f64,
    pub big_c10: f64,
    /// `C2(1 + ‖F‖²)`, right side of the energy inequality.
    pub k_energy: f64,
    /// `C1 λ1`, the Gronwall rate.
    pub rate: f64,
    pub gronwall_radius: f64,
    pub r0: f64,
    pub beta: f64,
    pub delta: f64,
    pub absorbing_c: f64,
    pub entries: Vec<AuditEntry>,
}

pub fn compute_constants(input: &ConstantsInput, certificate: &PotentialCertificate) -> Result<ConstantsAudit> {
    let ConstantsInput { nu, gamma_norm: g, lambda1, lift_lambda, f_dual_norm: f, g_norm, ladyzhenskaya: cl, boundary_measure } =
        *input;
    let [c1, c2, d1, d2] = certificate.constants();
    if !(lambda1 > 0.0) {
        return Err(Error::InvalidCertificate(format!("λ1 = {lambda1} must be positive")));
    }
    let gap = nu - d2 * g * g;
    let epsilon = gap / 4.0;
    let big_c1 = gap / 2.0;
    if !(big_c1 > 0.0) {
        return Err(Error::InvalidCertificate(format!("C1 = {big_c1} is not positive (d2 = {d2})")));
    }
    if lift_lambda > epsilon {
        return Err(Error::InvalidCertificate(format!(
            "lift smallness λ = {lift_lambda} exceeds (ν - d2‖γ‖²)/4 = {epsilon}"
        )));
    }
    let big_c2 = (1.0 / (4.0 * epsilon)).max(d1.abs() * boundary_measure);
    let k = big_c2 * (1.0 + f * f);
    let a = big_c1 * lambda1;

    let big_c3 = (f + g * c1 * boundary_measure.sqrt())
        .max(nu + g_norm + c2 * g * g)
        .max(cl * cl * lambda1.powf(-0.25));
    let big_c10 = 2.0 * 3f64.cbrt() * big_c3.powf(4.0 / 3.0);
    let big_c4 = k / big_c1 + k / (2.0 * big_c1 * a) + k / a;
    let big_c5 = a.exp() * (1.0 + 1.0 / (2.0 * big_c1));
    let big_c6 = a;
    let big_c7 = big_c10 * (2.0 + big_c4 + 2f64.cbrt() * big_c4.powf(4.0 / 3.0));
    let big_c8 = big_c10 * (1.0 + 2f64.cbrt()) * big_c5.powf(4.0 / 3.0);
    let big_c9 = 4.0 / 3.0 * big_c6;
    let r0 = 2.0 * big_c4.sqrt() + big_c7.powf(0.75) + big_c5.sqrt();
    let beta = 2.0;
    let delta = big_c6 / 2.0;
    let absorbing_c = big_c5.sqrt() + big_c8.powf(0.75);
    let gronwall_radius = (k / a).sqrt();

    let e = |name: &str, value: f64, formula: &str| AuditEntry { name: name.into(), value, formula: formula.into() };
    let entries = vec![
        e("nu", nu, "input"),
        e("gamma_norm", g, "sqrt(max eig(boundary Gram, stiffness))"),
        e("lambda1", lambda1, "smallest Stokes eigenvalue"),
        e("lift_lambda", lift_lambda, "configured lift smallness"),
        e("F_dual_norm", f, "‖F‖_{V*}"),
        e("G_norm", g_norm, "‖diag(μ)^{-1/2} G diag(μ)^{-1/2}‖₂"),
        e("ladyzhenskaya", cl, "sampled sup ‖v‖_L4 / (‖v‖_H^{1/2}‖v‖^{1/2})"),
        e("boundary_measure", boundary_measure, "|Γ0|"),
        e("c1", c1, "certificate"),
        e("c2", c2, "certificate"),
        e("d1", d1, "certificate"),
        e("d2", d2, "certificate"),
        e("epsilon", epsilon, "(ν - d2γ²)/4"),
        e("C1", big_c1, "(ν - d2γ²)/2"),
        e("C2", big_c2, "max(1/(4ε), |d1||Γ0|)"),
        e("K", k, "C2(1 + ‖F‖²)"),
        e("a", a, "C1 λ1"),
        e("C3", big_c3, "max(‖F‖ + γ c1 |Γ0|^{1/2}, ν + ‖G‖ + c2 γ², C_L² λ1^{-1/4})"),
        e("C10", big_c10, "2·3^{1/3} C3^{4/3}"),
        e("C4", big_c4, "K/C1 + K/(2 C1 a) + K/a"),
        e("C5", big_c5, "e^a (1 + 1/(2 C1))"),
        e("C6", big_c6, "a"),
        e("C7", big_c7, "C10 (2 + C4 + 2^{1/3} C4^{4/3})"),
        e("C8", big_c8, "C10 (1 + 2^{1/3}) C5^{4/3}"),
        e("C9", big_c9, "4/3 C6"),
        e("gronwall_radius", gronwall_radius, "sqrt(K/a)"),
        e("R0", r0, "2 sqrt(C4) + C7^{3/4} + sqrt(C5)"),
        e("beta", beta, "2"),
        e("delta", delta, "C6/2"),
        e("C", absorbing_c, "sqrt(C5) + C8^{3/4}"),
    ];
    let audit = ConstantsAudit {
        input: input.clone(),
        certificate: certificate.clone(),
        epsilon,
        big_c1,
        big_c2,
        big_c3,
        big_c4,
        big_c5,
        big_c6,
        big_c7,
        big_c8,
        big_c9,
        big_c10,
        k_energy: k,
        rate: a,
        gronwall_radius,
        r0,
        beta,
        delta,
        absorbing_c,
        entries,
    };
    if [big_c4, big_c5, big_c6, big_c7, big_c8, big_c9].iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(Error::InvalidCertificate("window constants are not finite and positive".into()));
    }
    Ok(audit)
}

impl ConstantsAudit {
    /// Gronwall envelope `e^{a(1-t)} Y + K/a` for `‖v(t)‖²_H`, `t ≥ 1`.
    pub fn envelope(&self, y: f64, t: f64) -> f64 {
        (self.rate * (1.0 - t)).exp() * y + self.k_energy / self.rate
    }

    /// First time the envelope drops below `((1 + tol) r_g)²`.
    pub fn predicted_entry(&self, y: f64, tol: f64) -> f64 {
        let kk = self.k_energy / self.rate;
        let room = kk * ((1.0 + tol).powi(2) - 1.0);
        if y <= room {
            1.0
        } else {
            1.0 + (y / room).ln() / self.rate
        }
    }

    /// `s0 = max(0, ln(C fb0^β / R0)/δ)`.
    pub fn absorbing_time(&self, fb0: f64) -> f64 {
        ((self.absorbing_c * fb0.powf(self.beta) / self.r0).ln() / self.delta).max(0.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audit serializes")
    }
}

fn ratio(table: &NodalTable, mu: &DVector<f64>, a: &DVector<f64>) -> f64 {
    let v1 = table.v[0].tr_mul(a);
    let v2 = table.v[1].tr_mul(a);
    let l4: f64 = (0..table.n_points())
        .map(|p| table.weights[p] * (v1[p] * v1[p] + v2[p] * v2[p]).powi(2))
        .sum::<f64>()
        .powf(0.25);
    let h = a.norm();
    let v = a.iter().zip(mu.iter()).map(|(x, m)| m * x * x).sum::<f64>().sqrt();
    if h == 0.0 {
        0.0
    } else {
        l4 / (h * v).sqrt()
    }
}

/// Random search followed by a shrinking-step hill climb on the ratio
/// `‖v‖_L4 / (‖v‖_H^{1/2}‖v‖^{1/2})` over the span of the Stokes basis in `table`.
pub fn ladyzhenskaya_constant<R: Rng + ?Sized>(
    table: &NodalTable,
    mu: &DVector<f64>,
    samples: usize,
    rng: &mut R,
) -> LadyzhenskayaReport {
    let n = mu.len();
    let mut best = DVector::zeros(n);
    let mut best_r = 0.0;
    for i in 0..samples.max(1) {
        // Alternate flat, smooth and single-mode draws.
        let a = match i % 3 {
            0 => DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)),
            1 => DVector::from_fn(n, |k, _| rng.sample::<f64, _>(StandardNormal) * (mu[0] / mu[k])),
            _ => {
                let mut a = DVector::zeros(n);
                a[rng.random_range(0..n)] = 1.0;
                a
            }
        };
        let r = ratio(table, mu, &a);
        if r > best_r {
            best_r = r;
            best = a;
        }
    }
    let climb_steps = 20 * samples.max(1);
    let mut step = 0.5;
    for _ in 0..climb_steps {
        let scale = best.norm();
        let trial = &best + DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)) * (step * scale / (n as f64).sqrt());
        let r = ratio(table, mu, &trial);
        if r > best_r {
            best_r = r;
            best = trial;
        } else {
            step = (step * 0.995).max(1e-3);
        }
    }
    LadyzhenskayaReport {
        value: best_r,
        samples,
        climb_steps,
        protocol: format!(
            "{samples} random draws (white, μ-weighted, single-mode), then {climb_steps} Gaussian hill-climb steps; L4 by interior quadrature"
        ),
    }
}
