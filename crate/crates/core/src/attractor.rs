//! Long-time diagnostics: the shift semigroup on sampled trajectories, unit
//! window norms, the Gronwall ball, the window envelopes, the absorbing
//! estimate and empirical sections of the attractor.

use nalgebra::DVector;
use serde::Serialize;

use crate::constants::ConstantsAudit;
use crate::mollifier::MollifiedPotential;
use crate::operators::OperatorSet;
use crate::quadrature::trapezoid;
use crate::simulate::{self, FlowParameters, InitialCondition, Trajectory};
use crate::{Error, Result};

fn grid_index(t: f64, dt: f64) -> usize {
    (t / dt).round() as usize
}

/// `(T(t)v)(s) = v(s + t)` on the sample grid.
pub fn shift(traj: &Trajectory, t: f64) -> Result<Trajectory> {
    let horizon = traj.horizon();
    if !(t >= 0.0) || t > horizon + 1e-9 * traj.dt {
        return Err(Error::ShiftBeyondHorizon { shift: t, horizon });
    }
    let m = grid_index(t, traj.dt).min(traj.len().saturating_sub(1));
    let tail = |v: &Vec<f64>| v[m..].to_vec();
    let mut meta = traj.meta.clone();
    meta.shift += m as f64 * traj.dt;
    meta.shift_offset += t - m as f64 * traj.dt;
    Ok(Trajectory {
        dt: traj.dt,
        times: (0..traj.len() - m).map(|k| k as f64 * traj.dt).collect(),
        coeffs: traj.coeffs[m..].to_vec(),
        h_norm: tail(&traj.h_norm),
        v_norm: tail(&traj.v_norm),
        vprime: tail(&traj.vprime),
        vprime_fd: tail(&traj.vprime_fd),
        max_abs_vn: tail(&traj.max_abs_vn),
        selection: traj.selection,
        meta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowNorms {
    pub h: f64,
    /// `‖v‖_{L²(h,h+1;V)}`
    pub l2v: f64,
    /// `‖v‖_{L∞(h,h+1;H)}`
    pub linfh: f64,
    /// `‖v'‖_{L^{4/3}(h,h+1;V*)}`
    pub l43dual: f64,
    pub f_norm: f64,
}

fn window_at(traj: &Trajectory, i0: usize, width: usize) -> WindowNorms {
    let r = i0..=i0 + width;
    let v2: Vec<f64> = traj.v_norm[r.clone()].iter().map(|v| v * v).collect();
    let d43: Vec<f64> = traj.vprime[r.clone()].iter().map(|v| v.powf(4.0 / 3.0)).collect();
    let l2v = trapezoid(&v2, traj.dt).sqrt();
    let linfh = traj.h_norm[r].iter().copied().fold(0.0, f64::max);
    let l43dual = trapezoid(&d43, traj.dt).powf(0.75);
    WindowNorms { h: i0 as f64 * traj.dt, l2v, linfh, l43dual, f_norm: l2v + linfh + l43dual }
}

fn unit_width(dt: f64) -> usize {
    (1.0 / dt).round() as usize
}

/// Norms of `v` restricted to `[h, h+1]`.
pub fn window_norms(traj: &Trajectory, h: f64) -> Result<WindowNorms> {
    let width = unit_width(traj.dt);
    let i0 = grid_index(h, traj.dt);
    if !(h >= 0.0) || i0 + width >= traj.len() {
        return Err(Error::WindowBeyondHorizon { start: h, horizon: traj.horizon() });
    }
    Ok(window_at(traj, i0, width))
}

/// Window starts `0, Δh, 2Δh, …` up to `horizon - 1`, as sample indices.
pub fn window_grid(traj: &Trajectory, dh: f64) -> Result<Vec<usize>> {
    let horizon = traj.horizon();
    let width = unit_width(traj.dt);
    if traj.len() <= width {
        return Err(Error::HorizonTooShort(horizon));
    }
    if !(dh > 0.0) {
        return Err(Error::invalid("attractor.window_step", "must be positive"));
    }
    let stride = grid_index(dh, traj.dt).max(1);
    let last = traj.len() - 1 - width;
    Ok((0..=last).step_by(stride).collect())
}

pub fn all_windows(traj: &Trajectory, dh: f64) -> Result<Vec<WindowNorms>> {
    let width = unit_width(traj.dt);
    Ok(window_grid(traj, dh)?.into_iter().map(|i| window_at(traj, i, width)).collect())
}

/// `sup_h ‖v‖_{𝓕(h,h+1)}` over the window grid.
pub fn fb_norm(traj: &Trajectory, dh: f64) -> Result<f64> {
    Ok(all_windows(traj, dh)?.iter().map(|w| w.f_norm).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct GronwallReport {
    /// `‖v‖²_{L∞(0,1;H)}`.
    pub y: f64,
    pub radius: f64,
    pub tolerance: f64,
    pub violations: usize,
    /// Largest `(‖v(t)‖²_H - envelope)/envelope`.
    pub max_relative_excess: f64,
    /// First sample after which `‖v‖_H ≤ (1+tol)·radius` for good.
    pub entry_time: Option<f64>,
    /// Crossing time of the envelope with the same ball.
    pub predicted_entry: f64,
    /// `1 + ln(100)/(C1 λ1)`.
    pub entry_bound: f64,
}

/// Pointwise check of `‖v(t)‖²_H ≤ e^{a(1-t)}‖v‖²_{L∞(0,1;H)} + K/a`.
pub fn gronwall_check(traj: &Trajectory, audit: &ConstantsAudit, tol: f64) -> Result<GronwallReport> {
    let width = unit_width(traj.dt);
    if traj.len() <= width {
        return Err(Error::HorizonTooShort(traj.horizon()));
    }
    let y = traj.h_norm[..=width].iter().map(|h| h * h).fold(0.0, f64::max);
    let mut violations = 0;
    let mut excess = f64::NEG_INFINITY;
    for (t, h) in traj.times.iter().zip(&traj.h_norm) {
        let env = audit.envelope(y, *t);
        let e = (h * h - env) / env;
        excess = excess.max(e);
        if e > 1e-12 {
            violations += 1;
        }
    }
    let ball = (1.0 + tol) * audit.gronwall_radius;
    let entry_time = match traj.h_norm.iter().rposition(|h| *h > ball) {
        None => Some(0.0),
        Some(i) if i + 1 < traj.len() => Some(traj.times[i + 1]),
        Some(_) => None,
    };
    Ok(GronwallReport {
        y,
        radius: audit.gronwall_radius,
        tolerance: tol,
        violations,
        max_relative_excess: excess,
        entry_time,
        predicted_entry: audit.predicted_entry(y, tol),
        entry_bound: 1.0 + 100f64.ln() / audit.rate,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowEnvelopeReport {
    pub windows: usize,
    /// Violations of `l2v² + linfh² ≤ C4 + C5 Y e^{-C6 h}`.
    pub energy_violations: usize,
    /// Violations of `l43dual^{4/3} ≤ C7 + C8 Y^{4/3} e^{-C9 h}`.
    pub derivative_violations: usize,
    pub max_energy_ratio: f64,
    pub max_derivative_ratio: f64,
    /// Samples where `‖v(t)‖_H` exceeds the window sup of a window containing `t`.
    pub lions_magenes_violations: usize,
}

pub fn window_envelope_check(traj: &Trajectory, audit: &ConstantsAudit, dh: f64) -> Result<WindowEnvelopeReport> {
    let windows = all_windows(traj, dh)?;
    let y = windows[0].linfh.powi(2);
    let width = unit_width(traj.dt);
    let mut r = WindowEnvelopeReport {
        windows: windows.len(),
        energy_violations: 0,
        derivative_violations: 0,
        max_energy_ratio: 0.0,
        max_derivative_ratio: 0.0,
        lions_magenes_violations: 0,
    };
    for w in &windows {
        let e_bound = audit.big_c4 + audit.big_c5 * y * (-audit.big_c6 * w.h).exp();
        let e = (w.l2v.powi(2) + w.linfh.powi(2)) / e_bound;
        let d_bound = audit.big_c7 + audit.big_c8 * y.powf(4.0 / 3.0) * (-audit.big_c9 * w.h).exp();
        let d = w.l43dual.powf(4.0 / 3.0) / d_bound;
        r.max_energy_ratio = r.max_energy_ratio.max(e);
        r.max_derivative_ratio = r.max_derivative_ratio.max(d);
        r.energy_violations += usize::from(e > 1.0);
        r.derivative_violations += usize::from(d > 1.0);
        let i0 = grid_index(w.h, traj.dt);
        r.lions_magenes_violations += traj.h_norm[i0..=i0 + width].iter().filter(|h| **h > w.linfh).count();
    }
    Ok(r)
}

#[derive(Debug, Clone, Serialize)]
pub struct AbsorbingReport {
    pub fb0: f64,
    pub s0: f64,
    /// Grid shifts `s ≥ s0` that were checked.
    pub checked: usize,
    pub violations: usize,
    /// Largest `fb_norm(T(s)v) / (2R0)` over checked shifts.
    pub max_ratio: f64,
    /// Violations of `fb_norm(T(s)v) ≤ R0 + C fb0^β e^{-δs}` over all grid shifts.
    pub estimate_violations: usize,
}

/// `fb_norm(T(s)v)` for grid shifts `s`, read off as suffix maxima of the windows.
pub fn absorbing_check(traj: &Trajectory, audit: &ConstantsAudit, dh: f64) -> Result<AbsorbingReport> {
    let windows = all_windows(traj, dh)?;
    let mut suffix = vec![0.0; windows.len()];
    let mut acc: f64 = 0.0;
    for (i, w) in windows.iter().enumerate().rev() {
        acc = acc.max(w.f_norm);
        suffix[i] = acc;
    }
    let fb0 = suffix[0];
    let s0 = audit.absorbing_time(fb0);
    let mut r = AbsorbingReport { fb0, s0, checked: 0, violations: 0, max_ratio: 0.0, estimate_violations: 0 };
    for (w, fb) in windows.iter().zip(&suffix) {
        let bound = audit.r0 + audit.absorbing_c * fb0.powf(audit.beta) * (-audit.delta * w.h).exp();
        r.estimate_violations += usize::from(*fb > bound);
        if w.h >= s0 {
            r.checked += 1;
            let ratio = fb / (2.0 * audit.r0);
            r.max_ratio = r.max_ratio.max(ratio);
            r.violations += usize::from(ratio > 1.0);
        }
    }
    Ok(r)
}

#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub params: FlowParameters,
    pub seed: u64,
    pub count: usize,
    pub radius: f64,
    pub t_section: f64,
    pub section_samples: usize,
    pub section_spacing: f64,
    pub window_step: f64,
    pub ball_tolerance: f64,
    pub energy_tol_factor: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberSummary {
    pub stream: u64,
    pub fb_norm: f64,
    pub gronwall: GronwallReport,
    pub windows: WindowEnvelopeReport,
    pub absorbing: AbsorbingReport,
    pub energy_violations: usize,
    pub vprime_violations: usize,
    pub selection_violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttractorReport {
    pub fb_norm: f64,
    pub gronwall_radius: f64,
    pub absorbing_r0: f64,
    pub beta: f64,
    pub delta: f64,
    pub absorbing_c: f64,
    pub entry_times: Vec<Option<f64>>,
    pub section_times: Vec<f64>,
    #[serde(skip)]
    pub section_cloud: Vec<DVector<f64>>,
    pub section_h: Vec<f64>,
    pub section_v: Vec<f64>,
    pub cloud_h_radius: f64,
    pub cloud_v_radius: f64,
    pub fraction_inside: f64,
    /// Whether every section time lies after every measured entry time.
    pub sections_after_entry: bool,
    pub members: Vec<MemberSummary>,
}

/// `(t, coefficients, ‖v‖_H, ‖v‖)` at one section time.
type SectionSample = (f64, DVector<f64>, f64, f64);

/// Runs `count` trajectories from random data of H-norm `radius` and samples
/// them at `t_section + k·spacing`.
pub fn ensemble_sections(
    spec: &EnsembleSpec,
    ops: &OperatorSet,
    jn: &MollifiedPotential,
    audit: &ConstantsAudit,
) -> Result<AttractorReport> {
    let last = spec.t_section + spec.section_spacing * spec.section_samples.saturating_sub(1) as f64;
    if last > spec.params.t_end + 1e-9 {
        return Err(Error::invalid("attractor.t_section", format!("sections reach {last} beyond t_end {}", spec.params.t_end)));
    }
    let streams: Vec<u64> = (0..spec.count as u64).collect();
    let results = crate::par_map(&streams, |&stream| -> Result<(MemberSummary, Vec<SectionSample>)> {
        let ic = InitialCondition::RandomHBall { radius: spec.radius, seed: spec.seed, stream };
        let a0 = ic.coefficients(&ops.mu)?;
        let traj = simulate::run(&spec.params, ops, jn, &a0, None)?;
        let gronwall = gronwall_check(&traj, audit, spec.ball_tolerance)?;
        let windows = window_envelope_check(&traj, audit, spec.window_step)?;
        let absorbing = absorbing_check(&traj, audit, spec.window_step)?;
        let energy = simulate::energy_monitor(&traj, audit, spec.energy_tol_factor);
        let vprime = simulate::vprime_monitor(&traj, audit);
        let samples = (0..spec.section_samples)
            .map(|k| {
                let t = spec.t_section + k as f64 * spec.section_spacing;
                let i = grid_index(t, traj.dt).min(traj.len() - 1);
                (traj.times[i], traj.coeffs[i].clone(), traj.h_norm[i], traj.v_norm[i])
            })
            .collect();
        let summary = MemberSummary {
            stream,
            fb_norm: fb_norm(&traj, spec.window_step)?,
            gronwall,
            windows,
            absorbing,
            energy_violations: energy.violations,
            vprime_violations: vprime.violations,
            selection_violations: traj.selection.violations,
        };
        Ok((summary, samples))
    });
    let mut members = Vec::with_capacity(spec.count);
    let mut section_times = Vec::new();
    let mut section_cloud = Vec::new();
    let mut section_h = Vec::new();
    let mut section_v = Vec::new();
    for r in results {
        let (m, samples) = r?;
        members.push(m);
        for (t, a, h, v) in samples {
            section_times.push(t);
            section_cloud.push(a);
            section_h.push(h);
            section_v.push(v);
        }
    }
    let ball = (1.0 + spec.ball_tolerance) * audit.gronwall_radius;
    let inside = section_h.iter().filter(|h| **h <= ball).count();
    let entry_times: Vec<Option<f64>> = members.iter().map(|m| m.gronwall.entry_time).collect();
    let sections_after_entry = entry_times.iter().all(|e| e.is_some_and(|e| e <= spec.t_section));
    Ok(AttractorReport {
        fb_norm: members.iter().map(|m| m.fb_norm).fold(0.0, f64::max),
        gronwall_radius: audit.gronwall_radius,
        absorbing_r0: audit.r0,
        beta: audit.beta,
        delta: audit.delta,
        absorbing_c: audit.absorbing_c,
        entry_times,
        section_times,
        cloud_h_radius: section_h.iter().copied().fold(0.0, f64::max),
        cloud_v_radius: section_v.iter().copied().fold(0.0, f64::max),
        fraction_inside: if section_h.is_empty() { 1.0 } else { inside as f64 / section_h.len() as f64 },
        section_cloud,
        section_h,
        section_v,
        sections_after_entry,
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, dt: f64) -> Trajectory {
        let h: Vec<f64> = (0..n).map(|k| (k as f64 * dt).sin().abs()).collect();
        let v: Vec<f64> = h.iter().map(|x| 2.0 * x).collect();
        let d: Vec<f64> = h.iter().map(|x| 1.0 + x).collect();
        Trajectory::from_channels(dt, h, v, d)
    }

    #[test]
    fn shift_identity_and_composition() {
        let t = ramp(501, 0.01);
        assert_eq!(shift(&t, 0.0).unwrap().h_norm, t.h_norm);
        let a = shift(&shift(&t, 0.7).unwrap(), 1.3).unwrap();
        let b = shift(&t, 2.0).unwrap();
        assert_eq!(a.h_norm, b.h_norm);
        assert_eq!(a.times, b.times);
        assert!((a.meta.shift - 2.0).abs() < 1e-12);
        assert!(matches!(shift(&t, 6.0), Err(Error::ShiftBeyondHorizon { .. })));
    }

    #[test]
    fn window_norms_of_constant_channels() {
        let n = 301;
        let t = Trajectory::from_channels(0.01, vec![2.0; n], vec![3.0; n], vec![8.0; n]);
        let w = window_norms(&t, 0.5).unwrap();
        assert!((w.l2v - 3.0).abs() < 1e-12);
        assert_eq!(w.linfh, 2.0);
        assert!((w.l43dual - 8.0).abs() < 1e-12);
        assert!(window_norms(&t, 2.5).is_err());
        assert!(window_norms(&t, 2.0).is_ok());
    }

    #[test]
    fn short_horizon_is_rejected() {
        let t = ramp(50, 0.01);
        assert!(matches!(fb_norm(&t, 0.1), Err(Error::HorizonTooShort(_))));
    }

    #[test]
    fn fb_norm_is_monotone_in_grid() {
        let t = ramp(801, 0.01);
        assert!(fb_norm(&t, 0.5).unwrap() <= fb_norm(&t, 0.1).unwrap());
    }
}
