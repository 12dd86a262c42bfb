use std::f64::consts::PI;

use modeqc_core::analysis::{estimate_gate, run_mzi, run_not_gate};
use modeqc_core::bpm::{gate_reference_index, modal_frame, propagate, BpmConfig};
use modeqc_core::devices::{build_straight, CoreFilter, Material, MziParams};
use modeqc_core::field::TransverseGrid;
use modeqc_core::gates::{max_deviation, TransferMatrix2};
use modeqc_core::mode_solver::sample_te_modes;

fn mzi_grid() -> TransverseGrid {
    TransverseGrid::centered(20.0, 801).unwrap()
}

#[test]
fn not_gate_flips_both_basis_states() {
    let (report, _) = run_not_gate(&Material::nominal(), &MziParams::nominal(), &mzi_grid(), &BpmConfig::default()).unwrap();
    let run = &report.run;
    println!("dn {:.4e} conversion {:?} fidelity {:.5}", report.calibration.delta_n, run.conversion, run.gate.fidelity);
    assert!((4e-4..=1.2e-3).contains(&report.calibration.delta_n));
    assert!(run.conversion.iter().all(|&c| c > 0.95));
    assert!(run.gate.fidelity > 0.95);
    assert!(!run.gate.flagged);
}

#[test]
fn balanced_mzi_is_identity() {
    let params = MziParams { delta_n: 0.0, ..MziParams::nominal() };
    let (run, _) = run_mzi(&Material::nominal(), &params, &mzi_grid(), &BpmConfig::default(), 0.0).unwrap();
    println!("fidelity {:.6}", run.gate.fidelity);
    assert!(run.gate.fidelity > 0.99);
}

#[test]
fn straight_guide_estimate_is_identity() {
    let grid = TransverseGrid::centered(15.0, 601).unwrap();
    let layout = build_straight(&Material::nominal(), 3.0, 3000.0).unwrap();
    let modes = sample_te_modes(&layout.cross_section(0.0, false).unwrap(), &grid, 2).unwrap();
    let n_ref = gate_reference_index(&layout, CoreFilter::All).unwrap();
    let config = BpmConfig::default();
    let runs: Vec<_> = (0..2)
        .map(|j| propagate(&layout, std::slice::from_ref(&modes.mode(j).profile), Some(&[n_ref]), &config, false).unwrap())
        .collect();
    let frame = modal_frame(&layout, CoreFilter::All, n_ref, runs[0].z_end, runs[0].step).unwrap();
    let gate = estimate_gate(&runs[0], &runs[1], 0, &modes, &frame, &TransferMatrix2::identity()).unwrap();
    println!("fidelity {:.8} matrix {:?}", gate.fidelity, gate.matrix);
    assert!(gate.fidelity > 0.999);
    assert!(gate.unitarity_defect < 1e-3);
}

#[test]
fn repeated_runs_are_bit_identical() {
    let params = MziParams { delta_n: 7.3e-4, ..MziParams::nominal() };
    let config = BpmConfig { snapshot_stride: 500, ..BpmConfig::default() };
    let (a, ta) = run_mzi(&Material::nominal(), &params, &mzi_grid(), &config, PI).unwrap();
    let (b, tb) = run_mzi(&Material::nominal(), &params, &mzi_grid(), &config, PI).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
}

#[test]
fn halving_grid_steps_barely_moves_the_not_matrix() {
    let params = MziParams { delta_n: 7.3e-4, ..MziParams::nominal() };
    let run = |n: usize, dz: f64| {
        let grid = TransverseGrid::centered(20.0, n).unwrap();
        let config = BpmConfig { dz, snapshot_stride: 0, decompose: false, ..BpmConfig::default() };
        run_mzi(&Material::nominal(), &params, &grid, &config, PI).unwrap().0.gate
    };
    let coarse = run(801, 0.5);
    let fine = run(1601, 0.25);
    let change = max_deviation(&coarse.aligned, &fine.aligned);
    println!("aligned change {change:.3e}, raw change {:.3e}", max_deviation(&coarse.matrix, &fine.matrix));
    assert!(change < 1e-3);
}
