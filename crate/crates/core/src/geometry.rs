//! The periodic channel `0 < x1 < L, 0 < x2 < h(x1)`.
//!
//! The bottom wall `x2 = 0` carries the subdifferential law, the top wall
//! `x2 = h(x1)` is no-slip, and the lateral boundary is periodic.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Truncated trigonometric height profile
/// `h(x1) = mean + Σ_k cos[k-1]·cos(2πk x1/L) + sin[k-1]·sin(2πk x1/L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightSpec {
    pub mean: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl HeightSpec {
    pub fn constant(h: f64) -> Self {
        HeightSpec { mean: h, cos: Vec::new(), sin: Vec::new() }
    }

    pub fn is_constant(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|c| *c == 0.0)
    }

    pub fn degree(&self) -> usize {
        let last = |v: &[f64]| v.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1);
        last(&self.cos).max(last(&self.sin))
    }

    /// `(h, h', h'')` at `x1` for period `length`.
    pub fn eval(&self, length: f64, x1: f64) -> HeightEval {
        let mut h = self.mean;
        let mut dh = 0.0;
        let mut ddh = 0.0;
        for (i, c) in self.cos.iter().enumerate() {
            let kappa = 2.0 * PI * (i + 1) as f64 / length;
            let (s, co) = (kappa * x1).sin_cos();
            h += c * co;
            dh -= c * kappa * s;
            ddh -= c * kappa * kappa * co;
        }
        for (i, c) in self.sin.iter().enumerate() {
            let kappa = 2.0 * PI * (i + 1) as f64 / length;
            let (s, co) = (kappa * x1).sin_cos();
            h += c * s;
            dh += c * kappa * co;
            ddh -= c * kappa * kappa * s;
        }
        HeightEval { h, dh, ddh }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HeightEval {
    pub h: f64,
    pub dh: f64,
    pub ddh: f64,
}

/// Node counts of the tensor quadrature. `None` means "derive from the basis size".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Trapezoid nodes in `x1`.
    pub n1: Option<usize>,
    /// Gauss–Legendre nodes in the mapped wall-normal coordinate.
    pub n2: Option<usize>,
    /// Gauss–Legendre nodes across the support of the boundary lift.
    #[serde(default = "default_lift_nodes")]
    pub n_lift: usize,
}

fn default_lift_nodes() -> usize {
    64
}

impl QuadratureSpec {
    pub fn new() -> Self {
        QuadratureSpec { n1: None, n2: None, n_lift: default_lift_nodes() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry {
    pub length: f64,
    pub height: HeightSpec,
    /// Minimum of `h` over one period.
    pub h0: f64,
    pub quadrature: QuadratureSpec,
}

const SAMPLES: usize = 4096;

pub fn build_channel(length: f64, height: HeightSpec, quadrature: QuadratureSpec) -> Result<ChannelGeometry> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::BadPeriod(length));
    }
    let (mut imin, mut hmin) = (0, f64::INFINITY);
    for i in 0..SAMPLES {
        let h = height.eval(length, length * i as f64 / SAMPLES as f64).h;
        if h < hmin {
            hmin = h;
            imin = i;
        }
    }
    if !(hmin > 0.0) {
        return Err(Error::NonPositiveHeight { min: hmin });
    }
    // Newton polish of the sampled minimum on h'.
    let mut x = length * imin as f64 / SAMPLES as f64;
    let dx_max = length / SAMPLES as f64;
    let x_start = x;
    for _ in 0..20 {
        let e = height.eval(length, x);
        if e.ddh <= 0.0 {
            break;
        }
        let step = e.dh / e.ddh;
        x -= step;
        if (x - x_start).abs() > dx_max || step.abs() < 1e-15 {
            break;
        }
    }
    let h0 = if (x - x_start).abs() <= dx_max { hmin.min(height.eval(length, x).h) } else { hmin };
    if !(h0 > 0.0) {
        return Err(Error::NonPositiveHeight { min: h0 });
    }
    let gap = (height.eval(length, 0.0).h - height.eval(length, length).h).abs();
    if gap > 1e-12 * height.mean.abs().max(1.0) {
        return Err(Error::NonPeriodic(gap));
    }
    Ok(ChannelGeometry { length, height, h0, quadrature })
}

impl ChannelGeometry {
    pub fn height_at(&self, x1: f64) -> HeightEval {
        self.height.eval(self.length, x1)
    }

    /// Length of the bottom wall, `m(Γ0)`.
    pub fn bottom_measure(&self) -> f64 {
        self.length
    }

    pub fn area(&self) -> f64 {
        self.height.mean * self.length
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile_has_its_value_as_minimum() {
        let g = build_channel(2.0 * PI, HeightSpec::constant(1.0), QuadratureSpec::new()).unwrap();
        assert_eq!(g.h0, 1.0);
    }

    #[test]
    fn sinusoid_minimum() {
        let h = HeightSpec { mean: 1.0, cos: vec![], sin: vec![0.1] };
        let g = build_channel(1.0, h, QuadratureSpec::new()).unwrap();
        assert!((g.h0 - 0.9).abs() < 1e-6, "h0 = {}", g.h0);
    }

    #[test]
    fn negative_profile_rejected() {
        let err = build_channel(1.0, HeightSpec::constant(-1.0), QuadratureSpec::new()).unwrap_err();
        assert!(matches!(err, Error::NonPositiveHeight { .. }));
    }

    #[test]
    fn non_positive_period_rejected() {
        for l in [0.0, -1.0, f64::NAN] {
            let err = build_channel(l, HeightSpec::constant(1.0), QuadratureSpec::new()).unwrap_err();
            assert!(matches!(err, Error::BadPeriod(_)));
        }
    }

    #[test]
    fn profile_that_dips_below_zero_rejected() {
        let h = HeightSpec { mean: 0.5, cos: vec![0.6], sin: vec![] };
        assert!(build_channel(3.0, h, QuadratureSpec::new()).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = HeightSpec { mean: 1.0, cos: vec![0.05, 0.02], sin: vec![0.1] };
        let l = 2.5;
        let x = 0.37;
        let e = h.eval(l, x);
        let eps = 1e-5;
        let fd = (h.eval(l, x + eps).h - h.eval(l, x - eps).h) / (2.0 * eps);
        let fdd = (h.eval(l, x + eps).dh - h.eval(l, x - eps).dh) / (2.0 * eps);
        assert!((fd - e.dh).abs() < 1e-8);
        assert!((fdd - e.ddh).abs() < 1e-7);
    }
}
