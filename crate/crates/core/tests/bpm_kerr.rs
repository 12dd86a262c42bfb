use std::f64::consts::PI;

use modeqc_core::bpm::{propagate_kerr_xpm, propagate_linear, BpmConfig};
use modeqc_core::devices::{Core, DeviceLayout, Segment, SegmentKind};
use modeqc_core::field::{overlap, TransverseGrid, C64};
use modeqc_core::mode_solver::{sample_te_modes, SlabGeometry};

fn kerr_guide(n2: f64, length: f64) -> DeviceLayout {
    let core = Core::straight(0.0, 3.0, 1.57).with_kerr(n2);
    DeviceLayout::new(1.55, 1.064, vec![Segment { kind: SegmentKind::KerrSection, length, cores: vec![core] }]).unwrap()
}

fn te0(grid: &TransverseGrid) -> modeqc_core::mode_solver::Mode {
    let geom = SlabGeometry::symmetric(1.57, 1.55, 3.0, 1.064).unwrap();
    sample_te_modes(&geom, grid, 2).unwrap().mode(0).clone()
}

#[test]
fn zero_kerr_coefficient_is_bit_identical_to_linear() {
    let grid = TransverseGrid::centered(15.0, 1024).unwrap();
    let m = te0(&grid);
    let config = BpmConfig { n_ref: Some(m.n_eff), ..BpmConfig::default() };
    let launch = m.profile.scaled(C64::new(3.0, 0.0));
    let kerr = propagate_kerr_xpm(&kerr_guide(0.0, 500.0), std::slice::from_ref(&launch), &config).unwrap();
    let linear = propagate_linear(&kerr_guide(1e-3, 500.0), &launch, &config).unwrap();
    assert_eq!(kerr.final_field(0).samples(), linear.final_field(0).samples());
}

#[test]
fn vanishing_intensity_reduces_to_linear() {
    let grid = TransverseGrid::centered(15.0, 1024).unwrap();
    let m = te0(&grid);
    let config = BpmConfig { n_ref: Some(m.n_eff), ..BpmConfig::default() };
    let layout = kerr_guide(1e-3, 500.0);
    let launch = m.profile.scaled(C64::new(1e-7, 0.0));
    let kerr = propagate_kerr_xpm(&layout, std::slice::from_ref(&launch), &config).unwrap();
    let linear = propagate_linear(&layout, &launch, &config).unwrap();
    let scale = launch.peak_amplitude();
    let diff = kerr
        .final_field(0)
        .samples()
        .iter()
        .zip(linear.final_field(0).samples())
        .map(|(a, b)| (a - b).norm() / scale)
        .fold(0.0, f64::max);
    assert!(diff < 1e-12, "{diff}");
}

#[test]
fn self_phase_matches_first_order_oracle() {
    let grid = TransverseGrid::centered(15.0, 1024).unwrap();
    let m = te0(&grid);
    let (n2, length, p) = (1e-3, 1000.0, 0.2);
    let k = 2.0 * PI / 1.064;
    // ∫ over the core of |Ψ|⁴ for the unit-power mode.
    let quartic: Vec<f64> =
        (0..grid.len()).map(|i| if grid.x(i).abs() <= 1.5 { m.profile.samples()[i].norm_sqr().powi(2) } else { 0.0 }).collect();
    // A raised index retards the envelope: phase -k δn L.
    let oracle = -k * length * n2 * p * grid.integrate(&quartic);

    let config = BpmConfig { n_ref: Some(m.n_eff), ..BpmConfig::default() };
    let layout = kerr_guide(n2, length);
    let launch = m.profile.scaled(C64::new(p.sqrt(), 0.0));
    let kerr = propagate_kerr_xpm(&layout, std::slice::from_ref(&launch), &config).unwrap();
    let linear = propagate_linear(&layout, &launch, &config).unwrap();
    let a = overlap(&m.profile, kerr.final_field(0)).unwrap();
    let b = overlap(&m.profile, linear.final_field(0)).unwrap();
    let phase = (a / b).arg();
    println!("self phase {phase:.5} rad, oracle {oracle:.5} rad");
    assert!((phase / oracle - 1.0).abs() < 0.05);
}

#[test]
fn kerr_propagation_conserves_energy() {
    let grid = TransverseGrid::centered(15.0, 1024).unwrap();
    let m = te0(&grid);
    let config = BpmConfig { n_ref: Some(m.n_eff), snapshot_stride: 0, ..BpmConfig::default() };
    let layout = kerr_guide(1e-3, 10_000.0);
    let launch = m.profile.scaled(C64::new(0.3f64.sqrt(), 0.0));
    let control = m.profile.scaled(C64::new(0.0, 0.2));
    let run = propagate_kerr_xpm(&layout, &[launch, control], &config).unwrap();
    let (_, first) = &run.power_series[0];
    let (_, last) = run.power_series.last().unwrap();
    for c in 0..2 {
        let drift = (last[c] / first[c] - 1.0).abs();
        println!("channel {c}: energy drift {drift:.3e} over 10 mm");
        assert!(drift < 1e-3);
    }
}
