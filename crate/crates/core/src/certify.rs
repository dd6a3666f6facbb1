//! Scan-based certification of the growth and dissipativity hypotheses
//!
//! * growth: `|ξ| ≤ c1 + c2|s|` for every `ξ ∈ ∂j(s)`,
//! * dissipativity: `ξ·s ≥ d1 - d2 s²` with `0 < d2 < ν/‖γ‖²`.

use serde::{Deserialize, Serialize};

use crate::mollifier::MollifiedPotential;
use crate::potential::{Interval, Superpotential};
use crate::{Error, Result};

/// Anything that yields a slope interval at each `s`.
pub trait SlopeSource {
    fn slopes(&self, s: f64) -> Interval;
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl SlopeSource for Superpotential {
    fn slopes(&self, s: f64) -> Interval {
        self.clarke_interval(s)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

impl SlopeSource for MollifiedPotential {
    fn slopes(&self, s: f64) -> Interval {
        Interval::point(self.derivative(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        ScanSpec { lo: -50.0, hi: 50.0, points: 20_001 }
    }
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::invalid("potential.scan", "need finite lo < hi"));
        }
        if self.points < 2 {
            return Err(Error::invalid("potential.scan.points", "need at least 2 points"));
        }
        Ok(())
    }

    /// Grid points plus 0 and any breakpoints inside the range, ascending.
    pub fn grid(&self, extra: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = (0..self.points)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.points - 1) as f64)
            .collect();
        for &e in extra.iter().chain(std::iter::once(&0.0)) {
            if e >= self.lo && e <= self.hi {
                g.push(e);
            }
        }
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }

    pub fn radius(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialCertificate {
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    pub sample_range: ScanSpec,
    /// Mollification index, `None` for the unregularized potential.
    pub n: Option<u32>,
    /// `margin·ν/‖γ‖²`, the admissible ceiling for `d2`.
    pub d2_limit: f64,
}

pub const SLOPE_FLOOR: f64 = 1e-9;
pub const D2_FLOOR: f64 = 1e-6;
pub const DEFAULT_MARGIN: f64 = 0.9;

impl PotentialCertificate {
    /// Whether `(c1, c2, d1, d2)` hold at every point of `scan` for `src`.
    pub fn admits<S: SlopeSource + ?Sized>(src: &S, scan: &ScanSpec, c: [f64; 4], tol: f64) -> bool {
        let [c1, c2, d1, d2] = c;
        scan.grid(&src.breakpoints()).into_iter().all(|s| {
            let iv = src.slopes(s);
            iv.mag() <= c1 + c2 * s.abs() + tol && iv.min_times(s) >= d1 - d2 * s * s - tol
        })
    }

    pub fn constants(&self) -> [f64; 4] {
        [self.c1, self.c2, self.d1, self.d2]
    }
}

/// Fits minimal constants over the scan. `c2` and `d2` come from the outer
/// half of the range (the asymptotic regime); `c1` and `d1` then absorb the
/// interior.
pub fn certify<S: SlopeSource + ?Sized>(
    src: &S,
    scan: &ScanSpec,
    nu: f64,
    gamma_norm: f64,
    margin: f64,
) -> Result<PotentialCertificate> {
    scan.validate()?;
    if !(nu > 0.0) {
        return Err(Error::invalid("nu", "must be positive"));
    }
    if !(margin > 0.0 && margin <= 1.0) {
        return Err(Error::invalid("potential.margin", "must lie in (0, 1]"));
    }
    let limit = if gamma_norm > 0.0 { margin * nu / (gamma_norm * gamma_norm) } else { f64::INFINITY };
    let grid = scan.grid(&src.breakpoints());
    let samples: Vec<(f64, Interval)> = grid.iter().map(|&s| (s, src.slopes(s))).collect();
    let tail = 0.5 * scan.radius();

    let mut c2 = SLOPE_FLOOR;
    let mut d2_need = f64::NEG_INFINITY;
    let mut witness = 0.0;
    for &(s, iv) in &samples {
        if s.abs() >= tail && s != 0.0 {
            c2 = c2.max(iv.mag() / s.abs());
            let need = -iv.min_times(s) / (s * s);
            if need > d2_need {
                d2_need = need;
                witness = s;
            }
        }
    }
    let d2 = d2_need.max(D2_FLOOR);
    if d2 >= limit {
        return Err(Error::DissipativityViolated { witness, needed: d2, limit });
    }
    let mut c1: f64 = SLOPE_FLOOR;
    let mut d1 = f64::INFINITY;
    for &(s, iv) in &samples {
        c1 = c1.max(iv.mag() - c2 * s.abs());
        d1 = d1.min(iv.min_times(s) + d2 * s * s);
    }
    Ok(PotentialCertificate { c1, c2, d1, d2, sample_range: *scan, n: None, d2_limit: limit })
}

pub fn certify_mollified(
    jn: &MollifiedPotential,
    scan: &ScanSpec,
    nu: f64,
    gamma_norm: f64,
    margin: f64,
) -> Result<PotentialCertificate> {
    let mut c = certify(jn, scan, nu, gamma_norm, margin)?;
    c.n = Some(jn.n);
    Ok(c)
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityRow {
    pub n: u32,
    pub certificate: PotentialCertificate,
    /// Largest relative change of `(c1, c2, d1, d2)` against the finest row.
    pub drift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityScan {
    pub rows: Vec<StabilityRow>,
    pub threshold: f64,
    /// Smallest index after which every row drifts less than `threshold`.
    pub n0: Option<u32>,
    pub max_drift_beyond_n0: f64,
}

pub const DRIFT_THRESHOLD: f64 = 0.1;
const DRIFT_FLOOR: f64 = 1e-6;

pub fn relative_drift(a: [f64; 4], reference: [f64; 4]) -> f64 {
    a.iter()
        .zip(&reference)
        .map(|(x, r)| (x - r).abs() / r.abs().max(DRIFT_FLOOR))
        .fold(0.0, f64::max)
}

/// Certifies `jₙ` for every `n` in `n_list` and measures how the constants settle.
pub fn constant_stability_scan(
    base: &MollifiedPotential,
    n_list: &[u32],
    scan: &ScanSpec,
    nu: f64,
    gamma_norm: f64,
    margin: f64,
) -> Result<StabilityScan> {
    if n_list.is_empty() {
        return Err(Error::invalid("n_list", "must not be empty"));
    }
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let certs = crate::par_map(&ns, |&n| {
        let jn = base.with_index(n)?;
        certify_mollified(&jn, scan, nu, gamma_norm, margin)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let reference = certs.last().expect("nonempty").constants();
    let rows: Vec<StabilityRow> = ns
        .iter()
        .zip(certs)
        .map(|(&n, c)| StabilityRow { n, drift: relative_drift(c.constants(), reference), certificate: c })
        .collect();
    let mut n0 = None;
    for (i, row) in rows.iter().enumerate() {
        if rows[i..].iter().all(|r| r.drift < DRIFT_THRESHOLD) {
            n0 = Some(row.n);
            break;
        }
    }
    let max_drift_beyond_n0 = match n0 {
        Some(n) => rows.iter().filter(|r| r.n >= n).map(|r| r.drift).fold(0.0, f64::max),
        None => f64::INFINITY,
    };
    Ok(StabilityScan { rows, threshold: DRIFT_THRESHOLD, n0, max_drift_beyond_n0 })
}
