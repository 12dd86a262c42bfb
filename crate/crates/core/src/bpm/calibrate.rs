//! Calibration of the phase shifter index step and the C-NOT control power by
//! root finding on BPM-measured arm phase differences.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{decompose, propagate, BpmConfig};
use crate::devices::{
    build_cnot, build_phase_shifter_mzi, CnotParams, CoreFilter, DeviceLayout, Material, MziParams, SegmentKind,
};
use crate::error::{Error, Result};
use crate::field::{ComplexField, TransverseGrid, C64};
use crate::mode_solver::{confinement_factor, effective_indices, sample_te_modes, SlabGeometry};

/// Phase differences are reported in `[−π/2, 3π/2)` so a half-wave target
/// sits well inside the branch.
fn wrap(phase: f64) -> f64 {
    (phase + 0.5 * PI).rem_euclid(2.0 * PI) - 0.5 * PI
}

/// Mean effective index of the first two modes of the cross-section at
/// `z = 0`, the reference used for gate runs.
pub fn gate_reference_index(layout: &DeviceLayout, filter: CoreFilter) -> Result<f64> {
    let n = effective_indices(&layout.filtered_cross_section(0.0, false, filter)?, 2)?;
    Ok(n.iter().sum::<f64>() / n.len() as f64)
}

/// Cores belonging to the target MZI of a C-NOT layout.
pub fn cnot_target_filter(p: &CnotParams) -> CoreFilter {
    let mid = 0.5 * (p.arm_offset() + p.control_offset());
    CoreFilter::Band { min: -mid, max: mid }
}

/// Phase by which the `lagging` arm trails the other, from the fundamental
/// mode amplitude of each arm. `lower_lags` selects the arm at `x < 0`.
pub fn arm_phase_difference(
    layout: &DeviceLayout,
    z: f64,
    field: &ComplexField,
    filter: CoreFilter,
    lower_lags: bool,
) -> Result<f64> {
    let guides = decompose(layout, z, field, filter)?;
    if guides.len() != 2 {
        return Err(Error::Extraction(format!("expected two arms at z = {z}, found {}", guides.len())));
    }
    let (lower, upper) = (guides[0].amplitude(0), guides[1].amplitude(0));
    let (lead, lag) = if lower_lags { (upper, lower) } else { (lower, upper) };
    if lead.norm() == 0.0 || lag.norm() == 0.0 {
        return Err(Error::Extraction(format!("an arm carries no light at z = {z}")));
    }
    Ok((lead * lag.conj()).arg())
}

/// Root of a monotone increasing `f` inside `[lo, hi]` by the Illinois variant
/// of regula falsi. Every evaluation is appended to `trace`.
fn solve_monotone(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    target: f64,
    (mut lo, mut f_lo): (f64, f64),
    (mut hi, mut f_hi): (f64, f64),
    tolerance: f64,
    trace: &mut Vec<(f64, f64)>,
) -> Result<(f64, f64)> {
    if !(f_lo <= target && target <= f_hi) {
        return Err(Error::Calibration { reason: format!("target {target} not bracketed"), trace: trace.clone() });
    }
    let mut side = 0i8;
    for _ in 0..60 {
        let (g_lo, g_hi) = (f_lo - target, f_hi - target);
        let x = if g_hi == g_lo { 0.5 * (lo + hi) } else { (lo * g_hi - hi * g_lo) / (g_hi - g_lo) };
        let fx = f(x)?;
        trace.push((x, fx));
        if (fx - target).abs() <= tolerance {
            return Ok((x, fx));
        }
        if fx < f_lo - tolerance || fx > f_hi + tolerance {
            return Err(Error::Calibration { reason: "non-monotone response".into(), trace: trace.clone() });
        }
        if fx < target {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi = target + 0.5 * (f_hi - target);
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo = target + 0.5 * (f_lo - target);
            }
            side = 1;
        }
    }
    Err(Error::Calibration { reason: "no convergence in 60 evaluations".into(), trace: trace.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseShifterCalibration {
    pub delta_n: f64,
    /// Measured arm phase difference at `delta_n`, rad.
    pub phase: f64,
    /// `target λ / (2π Γ L)` with `Γ` the TE₀ confinement of one arm.
    pub first_order_estimate: f64,
    pub confinement: f64,
    /// `(Δn, phase)` evaluations in order.
    pub trace: Vec<(f64, f64)>,
}

pub const PHASE_TOLERANCE: f64 = 1e-3;
pub const CONTROL_PHASE_TOLERANCE: f64 = 1e-2;

/// Finds the shifter `Δn` giving `target_phase` between the arms.
pub fn calibrate_phase_shifter(
    material: &Material,
    params: &MziParams,
    grid: &TransverseGrid,
    config: &BpmConfig,
    target_phase: f64,
) -> Result<PhaseShifterCalibration> {
    let arm = SlabGeometry::symmetric(material.n_core, material.n_clad, params.arm_width, material.wavelength)?;
    let arm_modes = sample_te_modes(&arm.shifted(0.0), &TransverseGrid::centered(15.0, 2048)?, 1)?;
    let confinement = confinement_factor(arm_modes.mode(0), &arm);
    let estimate = target_phase * material.wavelength / (2.0 * PI * confinement * params.shifter_length);

    let base = build_phase_shifter_mzi(material, &MziParams { delta_n: 0.0, ..*params })?;
    let n_ref = gate_reference_index(&base, CoreFilter::All)?;
    let launch = sample_te_modes(&base.cross_section(0.0, true)?, grid, 2)?.mode(0).profile.clone();
    let z_probe = params.lead_length + params.branch_length() + params.arm_length;
    let run_config = BpmConfig { z_stop: Some(z_probe), snapshot_stride: 0, decompose: false, ..config.clone() };
    let raw_phase = |dn: f64| -> Result<f64> {
        let layout = build_phase_shifter_mzi(material, &MziParams { delta_n: dn, ..*params })?;
        let run = propagate(&layout, std::slice::from_ref(&launch), Some(&[n_ref]), &run_config, false)?;
        arm_phase_difference(&layout, z_probe, run.final_field(0), CoreFilter::All, true)
    };
    let zero = raw_phase(0.0)?;
    let mut measure = |dn: f64| -> Result<f64> { Ok(wrap(raw_phase(dn)? - zero)) };
    let mut trace = vec![(0.0, 0.0)];
    if target_phase.abs() <= PHASE_TOLERANCE {
        return Ok(PhaseShifterCalibration { delta_n: 0.0, phase: 0.0, first_order_estimate: estimate, confinement, trace });
    }
    if !(target_phase > 0.0 && target_phase < 1.5 * PI) {
        return Err(Error::Calibration { reason: format!("target phase {target_phase} outside (0, 3pi/2)"), trace });
    }
    // Bracket above the estimate, staying below the wrap at 3π/2.
    let mut hi = 1.3 * estimate;
    let mut f_hi = measure(hi)?;
    trace.push((hi, f_hi));
    let mut tries = 0;
    while f_hi < target_phase && tries < 4 {
        hi *= 1.15;
        f_hi = measure(hi)?;
        trace.push((hi, f_hi));
        tries += 1;
    }
    let (delta_n, phase) = solve_monotone(&mut measure, target_phase, (0.0, 0.0), (hi, f_hi), PHASE_TOLERANCE, &mut trace)?;
    Ok(PhaseShifterCalibration { delta_n, phase, first_order_estimate: estimate, confinement, trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlCalibration {
    /// Control launch power in normalized units (`|E|²` integrates to it).
    pub power: f64,
    pub phase: f64,
    pub probe_power: f64,
    pub trace: Vec<(f64, f64)>,
}

/// Launch fields `[control, target]` for a C-NOT layout: control mode
/// `control_bit` with power `control_power`, target mode `target_bit`.
pub fn cnot_launches(
    layout: &DeviceLayout,
    grid: &TransverseGrid,
    control_bit: usize,
    control_power: f64,
    target_bit: usize,
    target_power: f64,
) -> Result<[ComplexField; 2]> {
    let sets = super::guide_modes(layout, 0.0, &ComplexField::zeros(*grid), CoreFilter::All)?;
    if sets.len() != 3 {
        return Err(Error::Geometry(format!("C-NOT input has {} guides, expected 3", sets.len())));
    }
    let pick = |set: &crate::mode_solver::ModeSet, bit: usize, p: f64| -> Result<ComplexField> {
        if set.len() <= bit {
            return Err(Error::NoGuidedModes(format!("guide lacks mode {bit}")));
        }
        Ok(set.mode(bit).profile.scaled(C64::new(p.sqrt(), 0.0)))
    };
    Ok([pick(&sets[2], control_bit, control_power)?, pick(&sets[1], target_bit, target_power)?])
}

/// Position just past the Kerr section.
pub fn kerr_exit(layout: &DeviceLayout) -> Result<f64> {
    let i = layout
        .segments
        .iter()
        .position(|s| s.kind == SegmentKind::KerrSection)
        .ok_or_else(|| Error::Geometry("layout has no Kerr section".into()))?;
    Ok(layout.boundaries()[i + 1])
}

/// Control power giving `target_phase` of cross-phase shift between the
/// target arms.
pub fn calibrate_control_power(
    material: &Material,
    params: &CnotParams,
    grid: &TransverseGrid,
    config: &BpmConfig,
    target_phase: f64,
    probe_power: f64,
) -> Result<ControlCalibration> {
    let layout = build_cnot(material, params)?;
    let mut trace = Vec::new();
    if !layout.has_kerr() {
        return Err(Error::Infeasible("no Kerr coefficient in the C-NOT arms; no control power can shift the target".into()));
    }
    let filter = cnot_target_filter(params);
    let n_ref = gate_reference_index(&layout, filter)?;
    let z_probe = kerr_exit(&layout)?;
    let run_config = BpmConfig { z_stop: Some(z_probe), snapshot_stride: 0, decompose: false, ..config.clone() };
    let raw_phase = |p: f64| -> Result<f64> {
        let launches = cnot_launches(&layout, grid, 1, p, 0, probe_power)?;
        let run = propagate(&layout, &launches, Some(&[n_ref, n_ref]), &run_config, true)?;
        arm_phase_difference(&layout, z_probe, run.final_field(1), filter, false)
    };
    let zero = raw_phase(0.0)?;
    let mut measure = |p: f64| -> Result<f64> { Ok(wrap(raw_phase(p)? - zero)) };
    trace.push((0.0, 0.0));
    let probe = 0.05;
    let f_probe = measure(probe)?;
    trace.push((probe, f_probe));
    let slope = f_probe / probe;
    if !(slope > 1e-9) {
        return Err(Error::Infeasible(format!("cross-phase response {slope:e} rad per unit power is too small")));
    }
    let estimate = target_phase / slope;
    let f_est = measure(estimate)?;
    trace.push((estimate, f_est));
    if (f_est - target_phase).abs() <= CONTROL_PHASE_TOLERANCE {
        return Ok(ControlCalibration { power: estimate, phase: f_est, probe_power, trace });
    }
    let (lo, hi) = if f_est < target_phase {
        let mut hi = estimate * 1.2;
        let mut f_hi = measure(hi)?;
        trace.push((hi, f_hi));
        let mut tries = 0;
        while f_hi < target_phase && tries < 4 {
            hi *= 1.2;
            f_hi = measure(hi)?;
            trace.push((hi, f_hi));
            tries += 1;
        }
        ((estimate, f_est), (hi, f_hi))
    } else {
        ((probe, f_probe), (estimate, f_est))
    };
    let (power, phase) = solve_monotone(&mut measure, target_phase, lo, hi, CONTROL_PHASE_TOLERANCE, &mut trace)?;
    Ok(ControlCalibration { power, phase, probe_power, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_range() {
        assert!((wrap(PI) - PI).abs() < 1e-15);
        assert!((wrap(-PI) - PI).abs() < 1e-12);
        assert!((wrap(-0.2) + 0.2).abs() < 1e-15);
        assert!((wrap(1.6 * PI) + 0.4 * PI).abs() < 1e-12);
    }

    #[test]
    fn regula_falsi_on_cubic() {
        let mut f = |x: f64| -> Result<f64> { Ok(x * x * x + x) };
        let mut trace = Vec::new();
        let (x, fx) = solve_monotone(&mut f, 3.0, (0.0, 0.0), (2.0, 10.0), 1e-10, &mut trace).unwrap();
        assert!((fx - 3.0).abs() <= 1e-10);
        assert!((x * x * x + x - 3.0).abs() <= 1e-10);
    }

    #[test]
    fn unbracketed_target_is_reported() {
        let mut f = |x: f64| -> Result<f64> { Ok(x) };
        let mut trace = vec![(0.0, 0.0)];
        let err = solve_monotone(&mut f, 5.0, (0.0, 0.0), (1.0, 1.0), 1e-6, &mut trace).unwrap_err();
        assert!(matches!(err, Error::Calibration { .. }));
    }
}
