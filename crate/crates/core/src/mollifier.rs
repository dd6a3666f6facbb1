//! Mollified superpotentials `jₙ = ρₙ * j`.
//!
//! The kernel is the normalized bump `ρ(u) = c·exp(-1/(1-u²))` on `(-1, 1)`
//! with `ρₙ(t) = n ρ(n t)`. Convolutions against the polynomial part of each
//! piece reduce, after a Taylor shift, to differences of the cumulative
//! moments `Φ_l(u) = ∫_{-1}^u ρ(x) x^l dx`, which are tabulated once and
//! interpolated with cubic Hermite splines (the derivative `ρ(u)u^l` is known
//! exactly). The Gaussian part uses composite Gauss–Legendre quadrature.

use std::sync::Arc;

use serde::Serialize;

use crate::potential::{gauss_derivative, poly_derivative_at, Superpotential};
use crate::quadrature::gauss_legendre;
use crate::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
const INITIAL_CELLS: usize = 1024;
const MAX_CELLS: usize = 1 << 17;
const GAUSS_PANELS: usize = 8;

/// Unnormalized bump `exp(-1/(1-u²))`.
pub fn bump(u: f64) -> f64 {
    let q = 1.0 - u * u;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

fn composite_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, x: &[f64], w: &[f64]) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(w) {
            acc += wi * f(mid + 0.5 * h * xi);
        }
    }
    acc * 0.5 * h
}

/// Normalization so that `∫ c·bump = 1`.
pub fn kernel_constant() -> f64 {
    let (x, w) = gauss_legendre(20);
    1.0 / composite_gl(bump, -1.0, 1.0, 256, &x, &w)
}

/// Cumulative kernel moments on a uniform grid of `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct MomentTable {
    pub cells: usize,
    pub max_power: usize,
    pub norm: f64,
    /// `values[l][i] = Φ_l(-1 + i·h)`.
    values: Vec<Vec<f64>>,
    /// Estimated worst interpolation error.
    pub error_estimate: f64,
}

impl MomentTable {
    pub fn build(max_power: usize, tol: f64) -> Result<Self> {
        let norm = kernel_constant();
        let mut cells = INITIAL_CELLS;
        let mut best = f64::INFINITY;
        loop {
            let table = Self::build_with(max_power, cells, norm);
            best = best.min(table.error_estimate);
            if table.error_estimate <= tol {
                return Ok(table);
            }
            cells *= 2;
            if cells > MAX_CELLS {
                return Err(Error::QuadratureBudgetExceeded { tol, best });
            }
        }
    }

    fn build_with(max_power: usize, cells: usize, norm: f64) -> Self {
        let (x, w) = gauss_legendre(8);
        let h = 2.0 / cells as f64;
        let mut values = vec![vec![0.0; cells + 1]; max_power + 1];
        for l in 0..=max_power {
            let f = |u: f64| norm * bump(u) * u.powi(l as i32);
            let mut acc = 0.0;
            for i in 0..cells {
                let a = -1.0 + h * i as f64;
                acc += composite_gl(f, a, a + h, 1, &x, &w);
                values[l][i + 1] = acc;
            }
            if l % 2 == 1 {
                // odd moments of the even kernel vanish
                values[l][cells] = 0.0;
            }
        }
        let mut table = MomentTable { cells, max_power, norm, values, error_estimate: 0.0 };
        // Compare the interpolant with direct quadrature at cell midpoints.
        let mut err: f64 = 0.0;
        for l in 0..=max_power {
            let f = |u: f64| norm * bump(u) * u.powi(l as i32);
            for i in 0..cells {
                let a = -1.0 + h * i as f64;
                let mid = a + 0.5 * h;
                let direct = table.values[l][i] + composite_gl(f, a, mid, 1, &x, &w);
                err = err.max((table.eval(l, mid) - direct).abs());
            }
        }
        table.error_estimate = err;
        table
    }

    /// `Φ_l(u)`, clamped outside `[-1, 1]`.
    pub fn eval(&self, l: usize, u: f64) -> f64 {
        let v = &self.values[l];
        if u <= -1.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return v[self.cells];
        }
        let h = 2.0 / self.cells as f64;
        let pos = (u + 1.0) / h;
        let i = (pos.floor() as usize).min(self.cells - 1);
        let t = pos - i as f64;
        let a = -1.0 + h * i as f64;
        let b = a + h;
        let d = |x: f64| self.norm * bump(x) * x.powi(l as i32);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * v[i]
            + (t3 - 2.0 * t2 + t) * h * d(a)
            + (-2.0 * t3 + 3.0 * t2) * v[i + 1]
            + (t3 - t2) * h * d(b)
    }

    /// `∫ρ` over the full support.
    pub fn mass(&self) -> f64 {
        self.values[0][self.cells]
    }
}

/// `jₙ` with its derivative, the selection used by the regularized scheme.
#[derive(Debug, Clone)]
pub struct MollifiedPotential {
    pub base: Superpotential,
    pub n: u32,
    pub tol: f64,
    table: Arc<MomentTable>,
    gl: Arc<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub mass: f64,
    pub support_radius: f64,
    pub table_cells: usize,
    pub table_error: f64,
}

pub fn mollify(j: &Superpotential, n: u32) -> Result<MollifiedPotential> {
    mollify_with_tol(j, n, DEFAULT_TOLERANCE)
}

pub fn mollify_with_tol(j: &Superpotential, n: u32, tol: f64) -> Result<MollifiedPotential> {
    if n == 0 {
        return Err(Error::invalid("n_mollify", "must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("mollifier tolerance", "must be positive"));
    }
    let degree = j.pieces.iter().map(|p| p.poly.len()).max().unwrap_or(1).max(1) - 1;
    let table = MomentTable::build(degree, tol)?;
    Ok(MollifiedPotential { base: j.clone(), n, tol, table: Arc::new(table), gl: Arc::new(gauss_legendre(16)) })
}

impl MollifiedPotential {
    /// Same potential at a different index, sharing the moment tables.
    pub fn with_index(&self, n: u32) -> Result<MollifiedPotential> {
        if n == 0 {
            return Err(Error::invalid("n_mollify", "must be at least 1"));
        }
        Ok(MollifiedPotential { n, ..self.clone() })
    }

    pub fn radius(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn value(&self, r: f64) -> f64 {
        self.convolve(r, 0)
    }

    /// `jₙ'(r)`.
    pub fn derivative(&self, r: f64) -> f64 {
        self.convolve(r, 1)
    }

    pub fn kernel_report(&self) -> KernelReport {
        KernelReport {
            mass: self.table.mass(),
            support_radius: self.radius(),
            table_cells: self.table.cells,
            table_error: self.table.error_estimate,
        }
    }

    /// `∫ ρ(u) j^{(order)}(r - u/n) du`.
    fn convolve(&self, r: f64, order: usize) -> f64 {
        let nf = self.n as f64;
        let eps = 1.0 / nf;
        let (s_lo, s_hi) = (r - eps, r + eps);
        let first = self.base.piece_index(s_lo);
        let last = self.base.piece_index(s_hi);
        let mut total = 0.0;
        for i in first..=last {
            let (lo, hi) = self.base.piece_range(i);
            let (a, b) = (lo.max(s_lo), hi.min(s_hi));
            if a >= b {
                continue;
            }
            // s = r - u/n maps [a, b] to u in [n(r - b), n(r - a)].
            let (ua, ub) = ((nf * (r - b)).max(-1.0), (nf * (r - a)).min(1.0));
            let piece = &self.base.pieces[i];
            let deg = piece.poly.len();
            let mut scale = 1.0;
            let mut fact = 1.0;
            for l in 0..deg.saturating_sub(order) {
                if l > 0 {
                    fact *= l as f64;
                    scale *= -eps;
                }
                let coef = poly_derivative_at(&piece.poly, order + l, r) / fact * scale;
                if coef != 0.0 {
                    total += coef * (self.table.eval(l, ub) - self.table.eval(l, ua));
                }
            }
            if piece.gauss != 0.0 {
                let (x, w) = &*self.gl;
                let norm = self.table.norm;
                let f = |u: f64| norm * bump(u) * gauss_derivative(r - u * eps, order);
                total += piece.gauss * composite_gl(f, ua, ub, GAUSS_PANELS, x, w);
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Piece;

    #[test]
    fn kernel_has_unit_mass_under_independent_rule() {
        let c = kernel_constant();
        let m = 200_000;
        let h = 2.0 / m as f64;
        let mid: f64 = (0..m).map(|i| c * bump(-1.0 + (i as f64 + 0.5) * h)).sum::<f64>() * h;
        assert!((mid - 1.0).abs() < 1e-10, "{mid}");
        let j = mollify(&Superpotential::quadratic(), 4).unwrap();
        assert!((j.kernel_report().mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quadratic_derivative_is_preserved() {
        let j = mollify(&Superpotential::quadratic(), 3).unwrap();
        for &s in &[-7.0, -0.3, 0.0, 0.25, 12.0] {
            assert!((j.derivative(s) - s).abs() < 1e-10, "s={s}");
        }
        // value shifts by ∫ρ u²/(2n²)
        let shift = j.value(0.0);
        assert!(shift > 0.0 && shift < 1.0 / 18.0);
        assert!((j.value(2.0) - 2.0 - shift).abs() < 1e-10);
    }

    #[test]
    fn even_potential_has_zero_slope_at_origin() {
        for j in [Superpotential::pressure_drop(), Superpotential::gaussian_well(1.5).unwrap()] {
            let m = mollify(&j, 5).unwrap();
            assert!(m.derivative(0.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kink_selection_inside_clarke_interval() {
        let j = Superpotential::pressure_drop();
        let m = mollify(&j, 32).unwrap();
        let xi = m.derivative(1.0);
        assert!(j.clarke_interval(1.0).contains(xi, 0.0), "{xi}");
    }

    #[test]
    fn far_from_kink_matches_base_derivative() {
        let j = Superpotential::pressure_drop();
        let m = mollify(&j, 1).unwrap();
        for &s in &[2.5, -3.0, 10.0] {
            assert!((m.derivative(s) - j.derivative(s)).abs() < 1e-10);
        }
    }

    #[test]
    fn derivative_matches_brute_force_convolution() {
        let j = Superpotential::new(
            "mix",
            vec![0.3],
            vec![
                Piece { poly: vec![0.0, 1.0, 0.0, 0.5], gauss: 0.4 },
                Piece { poly: vec![0.0, 1.0, 0.0, 0.5], gauss: 0.4 },
            ],
        )
        .unwrap();
        let m = mollify(&j, 2).unwrap();
        let c = kernel_constant();
        let r = 0.41;
        let k = 400_000;
        let h = 2.0 / k as f64;
        let brute: f64 = (0..k)
            .map(|i| {
                let u = -1.0 + (i as f64 + 0.5) * h;
                c * bump(u) * j.derivative(r - u / 2.0)
            })
            .sum::<f64>()
            * h;
        assert!((m.derivative(r) - brute).abs() < 1e-9, "{} vs {brute}", m.derivative(r));
    }

    #[test]
    fn impossible_tolerance_exceeds_budget() {
        let err = mollify_with_tol(&Superpotential::quadratic(), 2, 1e-20).unwrap_err();
        assert!(matches!(err, Error::QuadratureBudgetExceeded { .. }));
    }

    #[test]
    fn derivative_is_continuous_across_kink_region() {
        let m = mollify(&Superpotential::pressure_drop(), 8).unwrap();
        let mut prev = m.derivative(0.8);
        for k in 1..=4000 {
            let s = 0.8 + 0.4 * k as f64 / 4000.0;
            let d = m.derivative(s);
            assert!((d - prev).abs() < 1e-2, "jump at {s}");
            prev = d;
        }
    }
}
