//! Piecewise-smooth superpotentials and their Clarke subdifferential.
//!
//! A [`Superpotential`] is split by finitely many breakpoints into pieces of
//! the form `p(s) + α·exp(-s²/2)` with `p` a polynomial. Continuity across
//! breakpoints is enforced on construction; derivative jumps are allowed and
//! become nondegenerate Clarke intervals.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn hull(a: f64, b: f64) -> Self {
        Interval { lo: a.min(b), hi: a.max(b) }
    }

    pub fn include(&mut self, x: f64) {
        self.lo = self.lo.min(x);
        self.hi = self.hi.max(x);
    }

    pub fn union(self, o: Interval) -> Interval {
        Interval { lo: self.lo.min(o.lo), hi: self.hi.max(o.hi) }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    /// `max |ξ|` over the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// `min ξ·s` over the interval.
    pub fn min_times(&self, s: f64) -> f64 {
        (self.lo * s).min(self.hi * s)
    }
}

/// One smooth piece `Σ poly[k] s^k + gauss·exp(-s²/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub poly: Vec<f64>,
    #[serde(default)]
    pub gauss: f64,
}

impl Piece {
    pub fn polynomial(poly: Vec<f64>) -> Self {
        Piece { poly, gauss: 0.0 }
    }

    /// Derivative of order `order` at `s`.
    pub fn eval(&self, s: f64, order: usize) -> f64 {
        poly_derivative_at(&self.poly, order, s) + self.gauss * gauss_derivative(s, order)
    }
}

/// `d^order/ds^order exp(-s²/2)` for `order ≤ 3`.
pub fn gauss_derivative(s: f64, order: usize) -> f64 {
    let e = (-0.5 * s * s).exp();
    match order {
        0 => e,
        1 => -s * e,
        2 => (s * s - 1.0) * e,
        3 => (3.0 * s - s * s * s) * e,
        _ => unimplemented!("gauss derivative of order {order}"),
    }
}

/// `p^{(order)}(s)` for ascending coefficients `c`.
pub fn poly_derivative_at(c: &[f64], order: usize, s: f64) -> f64 {
    let mut acc = 0.0;
    for k in (order..c.len()).rev() {
        let mut f = 1.0;
        for j in 0..order {
            f *= (k - j) as f64;
        }
        acc = acc * s + f * c[k];
    }
    acc
}

/// Configuration description of a potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `s²/2`.
    Quadratic,
    /// `s²` for `|s| ≤ 1`, `1 + 0.1(s² - 1)` otherwise.
    PressureDrop,
    /// `s²/2 + α·exp(-s²/2)`.
    GaussianWell { alpha: f64 },
    /// Generic pieces separated by ascending breakpoints.
    Piecewise { breakpoints: Vec<f64>, pieces: Vec<Piece> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Superpotential {
    pub name: String,
    pub breakpoints: Vec<f64>,
    /// `pieces[i]` is active on `[breakpoints[i-1], breakpoints[i]]`.
    pub pieces: Vec<Piece>,
}

const CONTINUITY_TOL: f64 = 1e-12;

impl Superpotential {
    pub fn new(name: impl Into<String>, breakpoints: Vec<f64>, pieces: Vec<Piece>) -> Result<Self> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::invalid(
                "potential.pieces",
                format!("{} pieces for {} breakpoints", pieces.len(), breakpoints.len()),
            ));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("potential.breakpoints", "must be finite and strictly ascending"));
        }
        if pieces.iter().any(|p| p.poly.iter().any(|c| !c.is_finite()) || !p.gauss.is_finite()) {
            return Err(Error::invalid("potential.pieces", "non-finite coefficient"));
        }
        for (i, &b) in breakpoints.iter().enumerate() {
            let left = pieces[i].eval(b, 0);
            let right = pieces[i + 1].eval(b, 0);
            let jump = (left - right).abs();
            if jump > CONTINUITY_TOL * left.abs().max(1.0) {
                return Err(Error::Discontinuous { at: b, jump });
            }
        }
        Ok(Superpotential { name: name.into(), breakpoints, pieces })
    }

    pub fn from_spec(spec: &PotentialSpec) -> Result<Self> {
        match spec {
            PotentialSpec::Quadratic => Ok(Self::quadratic()),
            PotentialSpec::PressureDrop => Ok(Self::pressure_drop()),
            PotentialSpec::GaussianWell { alpha } => Self::gaussian_well(*alpha),
            PotentialSpec::Piecewise { breakpoints, pieces } => {
                Self::new("piecewise", breakpoints.clone(), pieces.clone())
            }
        }
    }

    pub fn quadratic() -> Self {
        Superpotential { name: "quadratic".into(), breakpoints: vec![], pieces: vec![Piece::polynomial(vec![0.0, 0.0, 0.5])] }
    }

    /// Nonmonotone leak law: steep inside `|s| ≤ 1`, shallow outside.
    pub fn pressure_drop() -> Self {
        let outer = Piece::polynomial(vec![0.9, 0.0, 0.1]);
        Superpotential {
            name: "pressure_drop".into(),
            breakpoints: vec![-1.0, 1.0],
            pieces: vec![outer.clone(), Piece::polynomial(vec![0.0, 0.0, 1.0]), outer],
        }
    }

    pub fn gaussian_well(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::invalid("potential.alpha", "must be finite"));
        }
        Ok(Superpotential {
            name: "gaussian_well".into(),
            breakpoints: vec![],
            pieces: vec![Piece { poly: vec![0.0, 0.0, 0.5], gauss: alpha }],
        })
    }

    /// Index of the piece active at `s`; at a breakpoint, the right piece.
    pub fn piece_index(&self, s: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= s)
    }

    /// `[lo, hi]` extent of piece `i` in `s`.
    pub fn piece_range(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 { f64::NEG_INFINITY } else { self.breakpoints[i - 1] };
        let hi = self.breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    pub fn value(&self, s: f64) -> f64 {
        self.pieces[self.piece_index(s)].eval(s, 0)
    }

    /// Derivative from the right piece (a classical derivative away from breakpoints).
    pub fn derivative(&self, s: f64) -> f64 {
        self.pieces[self.piece_index(s)].eval(s, 1)
    }

    pub fn is_breakpoint(&self, s: f64) -> bool {
        self.breakpoints.contains(&s)
    }

    /// Clarke subdifferential at `s`: the hull of the one-sided derivatives.
    pub fn clarke_interval(&self, s: f64) -> Interval {
        let i = self.piece_index(s);
        let right = self.pieces[i].eval(s, 1);
        if i > 0 && self.breakpoints[i - 1] == s {
            Interval::hull(self.pieces[i - 1].eval(s, 1), right)
        } else {
            Interval::point(right)
        }
    }

    /// Hull of `∂j` over `[a, b]`.
    pub fn derivative_hull(&self, a: f64, b: f64) -> Interval {
        let (a, b) = (a.min(b), a.max(b));
        let mut out = self.clarke_interval(a).union(self.clarke_interval(b));
        let (first, last) = (self.piece_index(a), self.piece_index(b));
        for i in first..=last {
            let (lo, hi) = self.piece_range(i);
            let (lo, hi) = (lo.max(a), hi.min(b));
            if lo > hi {
                continue;
            }
            let piece = &self.pieces[i];
            out.include(piece.eval(lo, 1));
            out.include(piece.eval(hi, 1));
            for r in critical_points(piece, lo, hi) {
                out.include(piece.eval(r, 1));
            }
        }
        out
    }
}

/// Roots of `piece''` inside `[a, b]`, located by sign changes on a sample grid.
fn critical_points(piece: &Piece, a: f64, b: f64) -> Vec<f64> {
    const SAMPLES: usize = 64;
    if piece.gauss == 0.0 && piece.poly.len() <= 3 {
        return Vec::new();
    }
    let f = |s: f64| piece.eval(s, 2);
    let mut roots = Vec::new();
    let step = (b - a) / SAMPLES as f64;
    let mut x0 = a;
    let mut f0 = f(a);
    for k in 1..=SAMPLES {
        let x1 = if k == SAMPLES { b } else { a + step * k as f64 };
        let f1 = f(x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            let (mut lo, mut hi, mut flo) = (x0, x1, f0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm * flo <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_point_gives_degenerate_interval() {
        let j = Superpotential::quadratic();
        assert_eq!(j.clarke_interval(3.0), Interval::point(3.0));
    }

    #[test]
    fn pressure_drop_kink_interval() {
        let j = Superpotential::pressure_drop();
        assert_eq!(j.clarke_interval(1.0), Interval { lo: 0.2, hi: 2.0 });
        assert_eq!(j.clarke_interval(-1.0), Interval { lo: -2.0, hi: -0.2 });
        assert!((j.value(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_kink_at_origin() {
        // |s| + s²
        let j = Superpotential::new(
            "abs",
            vec![0.0],
            vec![Piece::polynomial(vec![0.0, -1.0, 1.0]), Piece::polynomial(vec![0.0, 1.0, 1.0])],
        )
        .unwrap();
        let c = j.clarke_interval(0.0);
        assert_eq!(c, Interval { lo: -1.0, hi: 1.0 });
        assert_eq!(0.5 * (c.lo + c.hi), 0.0);
    }

    #[test]
    fn discontinuous_pieces_rejected() {
        let err = Superpotential::new(
            "bad",
            vec![0.0],
            vec![Piece::polynomial(vec![0.0]), Piece::polynomial(vec![1.0])],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Discontinuous { at, .. } if at == 0.0));
    }

    #[test]
    fn derivative_hull_finds_interior_extremum() {
        let j = Superpotential::gaussian_well(2.0).unwrap();
        // j' = s - 2 s e^{-s²/2} has a local minimum at s ≈ 0.68... inside [0, 2]
        let hull = j.derivative_hull(0.0, 2.0);
        let mut lo = f64::INFINITY;
        for k in 0..=20000 {
            lo = lo.min(j.derivative(2.0 * k as f64 / 20000.0));
        }
        assert!((hull.lo - lo).abs() < 1e-8, "{hull:?} vs {lo}");
        assert!(hull.lo < 0.0);
    }

    #[test]
    fn derivative_hull_spans_kink() {
        let j = Superpotential::pressure_drop();
        let h = j.derivative_hull(0.9, 1.1);
        assert!((h.lo - 0.2).abs() < 1e-12 && (h.hi - 2.0).abs() < 1e-12, "{h:?}");
    }

    #[test]
    fn spec_round_trip() {
        let spec = PotentialSpec::GaussianWell { alpha: 0.5 };
        let j = Superpotential::from_spec(&spec).unwrap();
        assert!((j.derivative(1.0) - (1.0 - 0.5 * (-0.5f64).exp())).abs() < 1e-15);
    }
}
