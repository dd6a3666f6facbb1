//! Browser demo: superpotential explorer and a live channel simulation.

use nalgebra::DVector;
use wasm_bindgen::prelude::*;

use shearflow::basis::{build_basis, DivFreeBasis};
use shearflow::certify::{certify_mollified, ScanSpec};
use shearflow::geometry::{build_channel, HeightSpec, QuadratureSpec};
use shearflow::mollifier::{mollify, MollifiedPotential};
use shearflow::operators::{assemble_operators, build_lift, OperatorSet};
use shearflow::potential::{PotentialSpec, Superpotential};
use shearflow::simulate::{Dynamics, FlowParameters, InitialCondition, SelectionStats, Stepper, TimeScheme};

fn js_err(e: shearflow::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn potential_by_name(name: &str, alpha: f64) -> Result<Superpotential, shearflow::Error> {
    let spec = match name {
        "quadratic" => PotentialSpec::Quadratic,
        "gaussian_well" => PotentialSpec::GaussianWell { alpha },
        _ => PotentialSpec::PressureDrop,
    };
    Superpotential::from_spec(&spec)
}

/// Samples of `j'`, the Clarke interval bounds and `jₙ'` on `[lo, hi]`,
/// packed as `[s, j', clarke_lo, clarke_hi, jn'] × points`.
#[wasm_bindgen]
pub fn potential_curves(name: &str, alpha: f64, n: u32, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let j = potential_by_name(name, alpha).map_err(js_err)?;
    let jn = mollify(&j, n.max(1)).map_err(js_err)?;
    let points = points.max(2);
    let mut out = Vec::with_capacity(5 * points);
    for i in 0..points {
        let s = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        let iv = j.clarke_interval(s);
        out.extend([s, j.derivative(s), iv.lo, iv.hi, jn.derivative(s)]);
    }
    Ok(out)
}

/// Interactive trajectory on a flat periodic channel of length `2π`.
#[wasm_bindgen]
pub struct Demo {
    basis: DivFreeBasis,
    ops: OperatorSet,
    jn: MollifiedPotential,
    params: FlowParameters,
    stepper: Stepper,
    a: DVector<f64>,
    t: f64,
    ball_radius: f64,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(k: usize, m: usize, nu: f64, s: f64, potential: &str, n_mollify: u32, radius: f64, seed: u32) -> Result<Demo, JsError> {
        let g = build_channel(std::f64::consts::TAU, HeightSpec::constant(1.0), QuadratureSpec::new()).map_err(js_err)?;
        let basis = build_basis(&g, k, m.max(1)).map_err(js_err)?;
        let lift = build_lift(s, 0.2, &g).map_err(js_err)?;
        let ops = assemble_operators(&basis, nu, &lift).map_err(js_err)?;
        let j = potential_by_name(potential, 1.0).map_err(js_err)?;
        let jn = mollify(&j, n_mollify.max(1)).map_err(js_err)?;
        let gamma = basis.trace_norm().map_err(js_err)?;
        let scan = ScanSpec { lo: -20.0, hi: 20.0, points: 2001 };
        let cert = certify_mollified(&jn, &scan, nu, gamma, 0.9).map_err(js_err)?;
        let gap = nu - cert.d2 * gamma * gamma;
        let c2 = (1.0 / gap).max(cert.d1.abs() * g.bottom_measure());
        let ball_radius = (c2 * (1.0 + ops.f_dual_norm.powi(2)) / (0.5 * gap * basis.poincare_lambda1())).sqrt();
        let a = InitialCondition::RandomHBall { radius, seed: u64::from(seed), stream: 0 }.coefficients(&ops.mu).map_err(js_err)?;
        let mut params = FlowParameters::new(2e-3, 1.0);
        params.check_selection = false;
        let stepper = Stepper::new(&ops, TimeScheme::Etd2, params.dt);
        Ok(Demo { basis, ops, jn, params, stepper, a, t: 0.0, ball_radius })
    }

    /// Advances by `steps` time steps and returns the new `‖v‖_H`.
    pub fn advance(&mut self, steps: usize) -> f64 {
        let dynamics = Dynamics::new(&self.ops, &self.jn, &self.params);
        let mut stats = SelectionStats::default();
        for _ in 0..steps {
            let next = self.stepper.step(&dynamics, &self.a, &mut stats);
            if next.iter().all(|x| x.is_finite()) {
                self.a = next;
                self.t += self.params.dt;
            }
        }
        self.h_norm()
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn h_norm(&self) -> f64 {
        self.ops.h_norm(&self.a)
    }

    pub fn v_norm(&self) -> f64 {
        self.ops.v_norm(&self.a)
    }

    pub fn ball_radius(&self) -> f64 {
        self.ball_radius
    }

    /// Vorticity on an `nx × ny` grid, row-major from the bottom wall up.
    pub fn vorticity(&self, nx: usize, ny: usize) -> Vec<f64> {
        let l = self.basis.geometry().length;
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let x2 = (j as f64 + 0.5) / ny as f64;
            for i in 0..nx {
                let x1 = l * i as f64 / nx as f64;
                out.push(self.basis.field_at(&self.a, x1, x2).vorticity());
            }
        }
        out
    }

    /// Normal velocity on the slip wall at `nx` points.
    pub fn wall_normal_velocity(&self, nx: usize) -> Vec<f64> {
        let l = self.basis.geometry().length;
        (0..nx).map(|i| -self.basis.field_at(&self.a, l * i as f64 / nx as f64, 0.0).v[1]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_have_expected_layout() {
        let c = potential_curves("pressure_drop", 1.0, 32, -2.0, 2.0, 5).unwrap();
        assert_eq!(c.len(), 25);
        // s = 1 sits on the kink: Clarke interval [0.2, 2].
        let row = &c[15..20];
        assert_eq!(row[0], 1.0);
        assert!((row[2] - 0.2).abs() < 1e-12 && (row[3] - 2.0).abs() < 1e-12);
        assert!(row[4] >= row[2] && row[4] <= row[3]);
    }

    #[test]
    fn demo_settles_into_the_ball() {
        let mut d = Demo::new(2, 3, 1.0, 1.0, "pressure_drop", 32, 5.0, 3).unwrap();
        assert!((d.h_norm() - 5.0).abs() < 1e-12);
        let h = d.advance(1500);
        assert!(h < d.ball_radius(), "{h} vs {}", d.ball_radius());
        assert_eq!(d.vorticity(8, 4).len(), 32);
    }
}
