//! Co-rotating modal frame.
//!
//! The BPM envelope of an adiabatically guided mode `j` carries the phase
//! `exp(−iΦ_j)`, `Φ_j = ∫ (β_j(z) − k n_ref) dz`, where `β_j(z)` is the
//! paraxial propagation constant of the local passive cross-section. Removing
//! it puts extracted amplitudes in the frame of the ideal gate matrices.
//! Gate matrices also depend on where the relative mode phase is referenced
//! once modes convert into each other; an anchor plane `z_a` splits the frame
//! so inputs carry `exp(iΦ_j(z_a))` and outputs `exp(i(Φ_j(z_end) − Φ_j(z_a)))`.
//! Crank-Nicolson advances a detuning `d` by `2 atan(d dz / 2)` per step
//! rather than `d dz`; the frame uses the same discrete rate.

use serde::{Deserialize, Serialize};

use crate::devices::{CoreFilter, DeviceLayout};
use crate::error::{Error, Result};
use crate::field::C64;
use crate::mode_solver::effective_indices;

/// Longest z step used when integrating through a moving segment.
const FRAME_STEP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalFrame {
    pub n_ref: f64,
    pub z_end: f64,
    /// `Φ₀, Φ₁` at `z_end`, rad.
    pub phases: [f64; 2],
    pub z_anchor: f64,
    /// `Φ₀, Φ₁` at `z_anchor`.
    pub anchor: [f64; 2],
}

impl ModalFrame {
    /// Frame whose anchor sits at the launch plane.
    pub fn unanchored(n_ref: f64, z_end: f64, phases: [f64; 2]) -> Self {
        Self { n_ref, z_end, phases, z_anchor: 0.0, anchor: [0.0; 2] }
    }

    /// Multiplies output amplitudes by `exp(i(Φ_j(z_end) − Φ_j(z_a)))`.
    pub fn apply(&self, amplitudes: [C64; 2]) -> [C64; 2] {
        [
            amplitudes[0] * C64::from_polar(1.0, self.phases[0] - self.anchor[0]),
            amplitudes[1] * C64::from_polar(1.0, self.phases[1] - self.anchor[1]),
        ]
    }

    /// Factor `exp(iΦ_j(z_a))` attached to input basis state `j`.
    pub fn input_factor(&self, j: usize) -> C64 {
        C64::from_polar(1.0, self.anchor[j])
    }
}

/// Paraxial detuning `(β² − k²n_ref²)/(2k n_ref)` of the first two modes of
/// the passive cross-section at `z`, mapped through the discrete rate of a
/// step `dz`.
pub fn paraxial_detuning(layout: &DeviceLayout, z: f64, filter: CoreFilter, n_ref: f64, dz: f64) -> Result<[f64; 2]> {
    let geometry = layout.filtered_cross_section(z, false, filter)?;
    let n = effective_indices(&geometry, 2)?;
    if n.len() < 2 {
        return Err(Error::NoGuidedModes(format!("cross-section at z = {z} guides {} mode(s), the frame needs 2", n.len())));
    }
    let k = geometry.wavenumber();
    let d = |ne: f64| {
        let rate = k * (ne * ne - n_ref * n_ref) / (2.0 * n_ref);
        if dz > 0.0 {
            2.0 * (0.5 * rate * dz).atan() / dz
        } else {
            rate
        }
    };
    Ok([d(n[0]), d(n[1])])
}

/// Accumulated frame phases from `z = 0` to `z_end` for a run with step `dz`
/// (0 gives the continuous-z rate).
pub fn modal_frame(layout: &DeviceLayout, filter: CoreFilter, n_ref: f64, z_end: f64, dz: f64) -> Result<ModalFrame> {
    Ok(ModalFrame::unanchored(n_ref, z_end, accumulated_phases(layout, filter, n_ref, z_end, dz)?))
}

/// Frame anchored at `z_anchor`, normally the plane where the gate acts.
pub fn anchored_frame(
    layout: &DeviceLayout,
    filter: CoreFilter,
    n_ref: f64,
    z_anchor: f64,
    z_end: f64,
    dz: f64,
) -> Result<ModalFrame> {
    if !(0.0..=z_end).contains(&z_anchor) {
        return Err(Error::Geometry(format!("frame anchor {z_anchor} outside [0, {z_end}]")));
    }
    Ok(ModalFrame {
        n_ref,
        z_end,
        phases: accumulated_phases(layout, filter, n_ref, z_end, dz)?,
        z_anchor,
        anchor: accumulated_phases(layout, filter, n_ref, z_anchor, dz)?,
    })
}

fn accumulated_phases(layout: &DeviceLayout, filter: CoreFilter, n_ref: f64, z_end: f64, dz: f64) -> Result<[f64; 2]> {
    let bounds = layout.boundaries();
    let mut phases = [0.0; 2];
    for (i, w) in bounds.windows(2).enumerate() {
        let (a, b) = (w[0], w[1].min(z_end));
        if b <= a {
            break;
        }
        if layout.is_static(i) {
            let d = paraxial_detuning(layout, 0.5 * (a + b), filter, n_ref, dz)?;
            phases[0] += d[0] * (b - a);
            phases[1] += d[1] * (b - a);
            continue;
        }
        // Composite Simpson; the end samples are nudged inside the segment so
        // they see its own geometry.
        let intervals = (((b - a) / FRAME_STEP).ceil() as usize).max(2);
        let intervals = intervals + intervals % 2;
        let h = (b - a) / intervals as f64;
        let eps = 1e-9 * (b - a);
        for s in 0..=intervals {
            let z = (a + s as f64 * h).clamp(a + eps, b - eps);
            let weight = if s == 0 || s == intervals {
                1.0
            } else if s % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let d = paraxial_detuning(layout, z, filter, n_ref, dz)?;
            phases[0] += weight * h / 3.0 * d[0];
            phases[1] += weight * h / 3.0 * d[1];
        }
    }
    Ok(phases)
}
