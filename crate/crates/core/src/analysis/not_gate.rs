//! End-to-end NOT gate: calibrate the shifter, run both basis inputs and
//! estimate the realized transfer matrix.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{estimate_gate, GateEstimate};
use crate::bpm::{anchored_frame, calibrate_phase_shifter, gate_reference_index, propagate, BpmConfig, FieldTrajectory};
use crate::bpm::{ModalFrame, PhaseShifterCalibration};
use crate::devices::{build_phase_shifter_mzi, CoreFilter, Material, MziParams};
use crate::error::Result;
use crate::field::TransverseGrid;
use crate::gates::mzi_unitary;
use crate::mode_solver::sample_te_modes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MziRun {
    pub params: MziParams,
    pub n_ref: f64,
    pub frame: ModalFrame,
    pub gate: GateEstimate,
    /// `|C₁|²` for input |0⟩ and `|C₀|²` for input |1⟩, relative to the
    /// launched power.
    pub conversion: [f64; 2],
}

/// Propagates both basis modes through the MZI built from `params` and
/// compares with `mzi_unitary(target_phase)`.
pub fn run_mzi(
    material: &Material,
    params: &MziParams,
    grid: &TransverseGrid,
    config: &BpmConfig,
    target_phase: f64,
) -> Result<(MziRun, [FieldTrajectory; 2])> {
    let layout = build_phase_shifter_mzi(material, params)?;
    let n_ref = gate_reference_index(&layout, CoreFilter::All)?;
    let z_end = layout.total_length();
    let input = sample_te_modes(&layout.cross_section(0.0, false)?, grid, 2)?;
    let output = sample_te_modes(&layout.cross_section(z_end, false)?, grid, 2)?;
    let mut runs = Vec::with_capacity(2);
    for j in 0..2 {
        let launch = &input.mode(j).profile;
        runs.push(propagate(&layout, std::slice::from_ref(launch), Some(&[n_ref]), config, false)?);
    }
    let run1 = runs.pop().unwrap();
    let run0 = runs.pop().unwrap();
    // The shifter is centred on the device, so the gate acts at mid-length.
    let frame = anchored_frame(&layout, CoreFilter::All, n_ref, 0.5 * z_end, run0.z_end, run0.step)?;
    let gate = estimate_gate(&run0, &run1, 0, &output, &frame, &mzi_unitary(target_phase))?;
    let launched = [crate::field::power(&input.mode(0).profile), crate::field::power(&input.mode(1).profile)];
    let conversion = [gate.matrix.m[1][0].norm_sqr() / launched[0], gate.matrix.m[0][1].norm_sqr() / launched[1]];
    Ok((MziRun { params: *params, n_ref, frame, gate, conversion }, [run0, run1]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotGateReport {
    pub calibration: PhaseShifterCalibration,
    pub run: MziRun,
}

/// Calibrates `Δn` for a π arm phase, then characterizes the gate.
pub fn run_not_gate(
    material: &Material,
    params: &MziParams,
    grid: &TransverseGrid,
    config: &BpmConfig,
) -> Result<(NotGateReport, [FieldTrajectory; 2])> {
    let calibration = calibrate_phase_shifter(material, params, grid, config, PI)?;
    let tuned = MziParams { delta_n: calibration.delta_n, ..*params };
    let (run, trajectories) = run_mzi(material, &tuned, grid, config, PI)?;
    Ok((NotGateReport { calibration, run }, trajectories))
}
