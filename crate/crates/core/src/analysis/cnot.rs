//! End-to-end C-NOT: design the separator couplers, calibrate the control
//! power for a π cross-phase, then run all four basis inputs.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{estimate_gate, extract_qubit, GateEstimate};
use crate::bpm::{
    anchored_frame, calibrate_control_power, cnot_launches, cnot_target_filter, gate_reference_index, guide_modes, propagate,
    BpmConfig, ControlCalibration, FieldTrajectory,
};
use crate::cmt::{design_separator_coupler, CouplerDesign, CouplerSearch};
use crate::devices::{build_cnot, CnotParams, CoreFilter, Material};
use crate::error::{Error, Result};
use crate::field::{ComplexField, TransverseGrid};
use crate::gates::{mzi_unitary, TransferMatrix2};
use crate::mode_solver::ModeSet;

/// Replaces the coupler gap and length of `params` with a separator design
/// sharing its far gap and slope.
pub fn design_cnot_coupler(
    material: &Material,
    params: &CnotParams,
    gap_range: (f64, f64),
) -> Result<(CnotParams, CouplerDesign)> {
    let search = CouplerSearch {
        gap_min: gap_range.0,
        gap_max: gap_range.1,
        far_gap: params.far_gap,
        separation_rate: 2.0 * params.slope,
        max_length: params.total_length,
    };
    let design = design_separator_coupler(&material.guide(params.width), &search)?;
    let tuned = CnotParams { coupler_gap: design.geometry.gap, coupler_length: design.geometry.length, ..*params };
    Ok((tuned, design))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTableRow {
    pub control_in: usize,
    pub target_in: usize,
    /// Normalized output populations `|C₀|², |C₁|²` of each qubit.
    pub control_out: [f64; 2],
    pub target_out: [f64; 2],
    /// Product of the control and target basis-state fidelities against the
    /// ideal C-NOT output.
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnotRun {
    pub params: CnotParams,
    pub control_power: f64,
    pub probe_power: f64,
    pub rows: Vec<TruthTableRow>,
    /// Target transfer matrix for control |0⟩ (against the identity) and
    /// control |1⟩ (against the NOT).
    pub target_gates: [GateEstimate; 2],
}

impl CnotRun {
    pub fn min_fidelity(&self) -> f64 {
        self.rows.iter().map(|r| r.fidelity).fold(1.0, f64::min)
    }
}

fn populations(field: &ComplexField, modes: &ModeSet) -> Result<[f64; 2]> {
    let e = extract_qubit(field, modes)?;
    Ok([e.state.c0.norm_sqr(), e.state.c1.norm_sqr()])
}

fn output_modes(layout: &crate::devices::DeviceLayout, z: f64, grid: &TransverseGrid, filter: CoreFilter) -> Result<ModeSet> {
    let mut sets = guide_modes(layout, z, &ComplexField::zeros(*grid), filter)?;
    if sets.len() != 1 || sets[0].len() != 2 {
        return Err(Error::Extraction(format!("expected one dual-mode output guide at z = {z}")));
    }
    Ok(sets.remove(0))
}

/// Runs the four basis inputs through the C-NOT at a fixed control power.
pub fn run_cnot_at(
    material: &Material,
    params: &CnotParams,
    grid: &TransverseGrid,
    config: &BpmConfig,
    control_power: f64,
    probe_power: f64,
) -> Result<(CnotRun, Vec<FieldTrajectory>)> {
    let layout = build_cnot(material, params)?;
    let target_filter = cnot_target_filter(params);
    let mid = 0.5 * (params.arm_offset() + params.control_offset());
    let control_filter = CoreFilter::Band { min: mid, max: f64::INFINITY };
    let n_ref = gate_reference_index(&layout, target_filter)?;
    let z_end = layout.total_length();
    let target_modes = output_modes(&layout, z_end, grid, target_filter)?;
    let control_modes = output_modes(&layout, z_end, grid, control_filter)?;

    let mut runs = Vec::with_capacity(4);
    let mut rows = Vec::with_capacity(4);
    for control_in in 0..2 {
        for target_in in 0..2 {
            let launches = cnot_launches(&layout, grid, control_in, control_power, target_in, probe_power)?;
            let run = propagate(&layout, &launches, Some(&[n_ref, n_ref]), config, true)?;
            let control_out = populations(run.final_field(0), &control_modes)?;
            let target_out = populations(run.final_field(1), &target_modes)?;
            let flipped = target_in ^ control_in;
            rows.push(TruthTableRow {
                control_in,
                target_in,
                control_out,
                target_out,
                fidelity: control_out[control_in] * target_out[flipped],
            });
            runs.push(run);
        }
    }
    let frame = anchored_frame(&layout, target_filter, n_ref, 0.5 * z_end, z_end, runs[0].step)?;
    let references: [TransferMatrix2; 2] = [TransferMatrix2::identity(), mzi_unitary(PI)];
    let target_gates = [
        estimate_gate(&runs[0], &runs[1], 1, &target_modes, &frame, &references[0])?,
        estimate_gate(&runs[2], &runs[3], 1, &target_modes, &frame, &references[1])?,
    ];
    Ok((CnotRun { params: *params, control_power, probe_power, rows, target_gates }, runs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnotReport {
    pub calibration: ControlCalibration,
    pub run: CnotRun,
}

/// Calibrates the control power for a π cross-phase, then runs the truth table.
pub fn run_cnot(
    material: &Material,
    params: &CnotParams,
    grid: &TransverseGrid,
    config: &BpmConfig,
    probe_power: f64,
) -> Result<(CnotReport, Vec<FieldTrajectory>)> {
    let calibration = calibrate_control_power(material, params, grid, config, PI, probe_power)?;
    let (run, runs) = run_cnot_at(material, params, grid, config, calibration.power, probe_power)?;
    Ok((CnotReport { calibration, run }, runs))
}
