//! Measurement model: modal projection of fields and gate estimation.

use serde::{Deserialize, Serialize};

use crate::bpm::{FieldTrajectory, ModalFrame};
use crate::error::{Error, Result};
use crate::field::{overlap, power, ComplexField, C64};
use crate::gates::{align_global_phase, compose, gate_fidelity, qubit_fidelity, QubitState, TransferMatrix2};
use crate::mode_solver::{guided_mode_count, sample_te_modes, ModeSet, SlabGeometry};

mod cnot;
mod coupler;
mod not_gate;

pub use cnot::{design_cnot_coupler, run_cnot, run_cnot_at, CnotReport, CnotRun, TruthTableRow};
pub use coupler::{coupler_geometry, run_coupler, run_separator, CouplerRun, SeparatorReport};
pub use not_gate::{run_mzi, run_not_gate, MziRun, NotGateReport};

/// Residual fraction above which a gate estimate is flagged.
pub const RESIDUAL_FLAG: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitExtraction {
    /// Normalized `(C₀, C₁)`.
    pub state: QubitState,
    /// Raw overlaps `⟨Ψ_j|E⟩`.
    pub amplitudes: [C64; 2],
    pub field_power: f64,
    pub guided_power: f64,
    /// `power(field) − |C₀|² − |C₁|²`.
    pub residual: f64,
}

pub fn extract_qubit(field: &ComplexField, modes: &ModeSet) -> Result<QubitExtraction> {
    if modes.is_empty() {
        return Err(Error::NoGuidedModes("mode set is empty".into()));
    }
    let c0 = overlap(&modes.mode(0).profile, field)?;
    let c1 = if modes.len() > 1 { overlap(&modes.mode(1).profile, field)? } else { C64::new(0.0, 0.0) };
    let field_power = power(field);
    let guided_power = c0.norm_sqr() + c1.norm_sqr();
    if !(guided_power >= 1e-6 * field_power) || field_power == 0.0 {
        return Err(Error::Extraction(format!(
            "guided power {guided_power:.3e} is below 1e-6 of the field power {field_power:.3e}"
        )));
    }
    let n = guided_power.sqrt();
    Ok(QubitExtraction {
        state: QubitState::new(c0 / n, c1 / n),
        amplitudes: [c0, c1],
        field_power,
        guided_power,
        residual: field_power - guided_power,
    })
}

/// Re-synthesizes `C₀Ψ₀ + C₁Ψ₁` from raw amplitudes.
pub fn synthesize(amplitudes: [C64; 2], modes: &ModeSet) -> Result<ComplexField> {
    let mut out = modes.mode(0).profile.scaled(amplitudes[0]);
    if modes.len() > 1 {
        out = out.add_scaled(amplitudes[1], &modes.mode(1).profile)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateEstimate {
    /// Columns are the frame-corrected raw output amplitudes for inputs |0⟩, |1⟩.
    pub matrix: TransferMatrix2,
    /// `matrix` with the best global phase removed.
    pub aligned: TransferMatrix2,
    pub global_phase: f64,
    /// `|tr(U_ref† U)|² / (2 tr(U† U))`: the unitary fidelity of the
    /// power-normalized map, so loss shows only in the conversion figures.
    pub fidelity: f64,
    pub basis_fidelities: [f64; 2],
    pub unitarity_defect: f64,
    /// Unguided fraction of each output field.
    pub residual_fractions: [f64; 2],
    pub flagged: bool,
}

/// Gate estimate from the outputs of two basis-input runs.
pub fn estimate_gate_from_fields(
    out0: &ComplexField,
    out1: &ComplexField,
    modes: &ModeSet,
    frame: &ModalFrame,
    reference: &TransferMatrix2,
) -> Result<GateEstimate> {
    let e0 = extract_qubit(out0, modes)?;
    let e1 = extract_qubit(out1, modes)?;
    let c0 = frame.apply(e0.amplitudes).map(|c| c * frame.input_factor(0));
    let c1 = frame.apply(e1.amplitudes).map(|c| c * frame.input_factor(1));
    let matrix = TransferMatrix2::from_columns(QubitState::new(c0[0], c0[1]), QubitState::new(c1[0], c1[1]));
    let (global_phase, aligned) = align_global_phase(reference, &matrix);
    let column_fidelity = |j: usize| {
        let col = matrix.column(j);
        let norm = col.norm_sqr();
        if norm > 0.0 {
            qubit_fidelity(&reference.column(j), &col) / norm
        } else {
            0.0
        }
    };
    let residual_fractions = [e0.residual / e0.field_power, e1.residual / e1.field_power];
    let defect = max_entry(&compose(&matrix.adjoint(), &matrix), &TransferMatrix2::identity());
    Ok(GateEstimate {
        matrix,
        aligned,
        global_phase,
        fidelity: normalized_gate_fidelity(reference, &matrix),
        basis_fidelities: [column_fidelity(0), column_fidelity(1)],
        unitarity_defect: defect,
        flagged: residual_fractions.iter().any(|r| *r > RESIDUAL_FLAG),
        residual_fractions,
    })
}

fn normalized_gate_fidelity(reference: &TransferMatrix2, m: &TransferMatrix2) -> f64 {
    let norm: f64 = m.m.iter().flatten().map(|c| c.norm_sqr()).sum();
    if norm > 0.0 {
        gate_fidelity(reference, m) * 2.0 / norm
    } else {
        0.0
    }
}

fn max_entry(a: &TransferMatrix2, b: &TransferMatrix2) -> f64 {
    crate::gates::max_deviation(a, b)
}

/// Gate estimate from two runs through the same layout, reading `channel`.
pub fn estimate_gate(
    run0: &FieldTrajectory,
    run1: &FieldTrajectory,
    channel: usize,
    modes: &ModeSet,
    frame: &ModalFrame,
    reference: &TransferMatrix2,
) -> Result<GateEstimate> {
    if (run0.z_end - run1.z_end).abs() > 1e-9 || !run0.grid.matches(&run1.grid) {
        return Err(Error::KindMismatch("gate runs cover different spans or grids".into()));
    }
    estimate_gate_from_fields(run0.final_field(channel), run1.final_field(channel), modes, frame, reference)
}

/// Power detected after a single-mode cut-off guide: `|⟨Ψ₀|E⟩|²`.
pub fn cutoff_measure(field: &ComplexField, single_mode: &SlabGeometry) -> Result<f64> {
    let count = guided_mode_count(single_mode);
    if count != 1 {
        return Err(Error::InvalidMeasurement(format!("cut-off guide supports {count} modes, exactly one required")));
    }
    let modes = sample_te_modes(single_mode, field.grid(), 1)?;
    Ok(overlap(&modes.mode(0).profile, field)?.norm_sqr())
}
