//! Crank-Nicolson finite-difference beam propagation.
//!
//! The envelope `E` of `Ψ = E·exp(−i k n_ref z)` obeys
//! `2ik n_ref ∂E/∂z = ∂²E/∂x² + k²(n² − n_ref²)E`. Each channel carries its own
//! reference index. Edges are absorbed by a polynomial ramp in the imaginary
//! part of `n²`.

mod banded;
mod calibrate;
mod decompose;
mod frame;
mod operator;
mod output;

pub use calibrate::{
    arm_phase_difference, calibrate_control_power, calibrate_phase_shifter, cnot_launches, cnot_target_filter,
    gate_reference_index, kerr_exit, ControlCalibration, PhaseShifterCalibration, CONTROL_PHASE_TOLERANCE, PHASE_TOLERANCE,
};
pub use decompose::{decompose, guide_modes, local_guides, GuideAmplitudes};
pub use frame::{anchored_frame, modal_frame, paraxial_detuning, ModalFrame};
pub use output::{write_trajectory_csv, TrajectorySummary};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::devices::{CoreFilter, DeviceLayout};
use crate::error::{Error, Result};
use crate::field::{power, ComplexField, TransverseGrid, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Absorber {
    /// Ramp width at each edge, μm.
    pub width: f64,
    /// Peak imaginary part of `n²` at the outer edge.
    pub strength: f64,
    /// Polynomial order of the ramp.
    pub order: i32,
    /// Transparent (outgoing-wave) conditions at the grid edges instead of
    /// a zero field.
    pub transparent_edges: bool,
}

impl Default for Absorber {
    fn default() -> Self {
        Self { width: 5.0, strength: 0.005, order: 2, transparent_edges: true }
    }
}

impl Absorber {
    pub fn profile(&self, grid: &TransverseGrid) -> Vec<f64> {
        (0..grid.len())
            .map(|i| {
                let x = grid.x(i);
                let depth = (grid.x_min() + self.width - x).max(x - (grid.x_max() - self.width)).max(0.0);
                self.strength * (depth / self.width).powi(self.order)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BpmConfig {
    pub dz: f64,
    /// Fixed reference index for every channel; the launch-weighted mean
    /// effective index of each channel when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_ref: Option<f64>,
    pub absorber: Absorber,
    pub nonlinear_iterations: usize,
    pub nonlinear_tolerance: f64,
    /// Steps between snapshots; 0 keeps only the first and last field.
    pub snapshot_stride: usize,
    /// Stop before the end of the layout.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_stop: Option<f64>,
    /// Largest allowed `k |n − n_ref| dz` in one step.
    pub max_step_phase: f64,
    /// Project snapshots onto the local guide modes.
    pub decompose: bool,
    /// Fail when the field saturates the absorber.
    pub window_check: bool,
    /// Accuracy order of the transverse operator, 2 or 4.
    pub transverse_order: u8,
}

impl Default for BpmConfig {
    fn default() -> Self {
        Self {
            dz: 0.5,
            n_ref: None,
            absorber: Absorber::default(),
            nonlinear_iterations: 4,
            nonlinear_tolerance: 1e-8,
            snapshot_stride: 100,
            z_stop: None,
            max_step_phase: 0.5,
            decompose: true,
            window_check: true,
            transverse_order: 4,
        }
    }
}

impl BpmConfig {
    pub fn validate(&self, grid: &TransverseGrid) -> Result<()> {
        if !(self.dz > 0.0) || !self.dz.is_finite() {
            return Err(Error::StepTooLarge(format!("dz = {} must be positive", self.dz)));
        }
        if self.absorber.width < 10.0 * grid.dx() {
            return Err(Error::InvalidGrid(format!(
                "absorber width {} is below 10 dx = {}",
                self.absorber.width,
                10.0 * grid.dx()
            )));
        }
        if 2.0 * self.absorber.width >= grid.x_max() - grid.x_min() {
            return Err(Error::InvalidGrid("absorbers cover the whole window".into()));
        }
        if self.absorber.strength < 0.0 || self.absorber.order < 1 {
            return Err(Error::InvalidGrid("absorber strength must be >= 0 and order >= 1".into()));
        }
        if self.transverse_order != 2 && self.transverse_order != 4 {
            return Err(Error::InvalidGrid(format!("transverse_order {} must be 2 or 4", self.transverse_order)));
        }
        if self.nonlinear_iterations < 1 {
            return Err(Error::Geometry("nonlinear_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub z: f64,
    pub fields: Vec<ComplexField>,
}

/// Local-guide decomposition of one channel at one `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSample {
    pub z: f64,
    pub channel: usize,
    pub guides: Vec<GuideAmplitudes>,
    /// False inside moving segments where isolated-guide modes are only approximate.
    pub rigorous: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrajectory {
    pub grid: TransverseGrid,
    pub wavelength: f64,
    pub n_refs: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub mode_amplitudes: Vec<ModeSample>,
    /// `(z, power per channel)` after every step, starting at `z = 0`.
    pub power_series: Vec<(f64, Vec<f64>)>,
    pub z_end: f64,
    /// Actual step used (`dz` rounded so the span is a whole number of steps).
    pub step: f64,
}

impl FieldTrajectory {
    pub fn final_fields(&self) -> &[ComplexField] {
        &self.snapshots.last().expect("trajectory has snapshots").fields
    }

    pub fn final_field(&self, channel: usize) -> &ComplexField {
        &self.final_fields()[channel]
    }

    pub fn channels(&self) -> usize {
        self.n_refs.len()
    }
}

pub fn propagate_linear(layout: &DeviceLayout, launch: &ComplexField, config: &BpmConfig) -> Result<FieldTrajectory> {
    propagate(layout, std::slice::from_ref(launch), None, config, false)
}

/// Propagates all channels together; inside Kerr cores each sees
/// `δn = n₂(|E_self|² + 2Σ|E_other|²)`.
pub fn propagate_kerr_xpm(layout: &DeviceLayout, launches: &[ComplexField], config: &BpmConfig) -> Result<FieldTrajectory> {
    propagate(layout, launches, None, config, true)
}

/// Launch-weighted mean effective index over the guides present at `z = 0`,
/// or the background index when there are none.
pub fn default_reference_index(layout: &DeviceLayout, launch: &ComplexField) -> Result<f64> {
    let guides = decompose(layout, 0.0, launch, CoreFilter::All)?;
    let (mut num, mut den) = (0.0, 0.0);
    for g in &guides {
        for (j, n) in g.n_effs.iter().enumerate() {
            num += g.power(j) * n;
            den += g.power(j);
        }
    }
    if den > 0.0 {
        Ok(num / den)
    } else {
        Ok(layout.background_index)
    }
}

/// Full propagator. `n_refs` overrides both the config and the default.
pub fn propagate(
    layout: &DeviceLayout,
    launches: &[ComplexField],
    n_refs: Option<&[f64]>,
    config: &BpmConfig,
    nonlinear: bool,
) -> Result<FieldTrajectory> {
    let first = launches.first().ok_or_else(|| Error::Geometry("no launch fields".into()))?;
    let grid = *first.grid();
    for l in launches {
        if !l.grid().matches(&grid) {
            return Err(Error::GridMismatch("launch fields use different grids".into()));
        }
    }
    config.validate(&grid)?;
    let (lo, hi) = layout.extent();
    if lo.is_finite() && (lo < grid.x_min() + config.absorber.width || hi > grid.x_max() - config.absorber.width) {
        return Err(Error::Window(format!(
            "cores span [{lo}, {hi}] and reach into the absorber of [{}, {}]",
            grid.x_min(),
            grid.x_max()
        )));
    }
    let n_refs: Vec<f64> = match (n_refs, config.n_ref) {
        (Some(v), _) => {
            if v.len() != launches.len() {
                return Err(Error::Geometry("one reference index per channel required".into()));
            }
            v.to_vec()
        }
        (None, Some(n)) => vec![n; launches.len()],
        (None, None) => launches.iter().map(|l| default_reference_index(layout, l)).collect::<Result<_>>()?,
    };
    let n_max = layout
        .segments
        .iter()
        .flat_map(|s| &s.cores)
        .map(|c| c.index + c.delta_n.max(0.0))
        .fold(layout.background_index, f64::max);
    for &n in &n_refs {
        if !(n >= layout.background_index && n <= n_max) {
            return Err(Error::Geometry(format!("reference index {n} outside [{}, {n_max}]", layout.background_index)));
        }
    }

    let total = config.z_stop.map_or(layout.total_length(), |z| z.min(layout.total_length()));
    if !(total > 0.0) {
        return Err(Error::Geometry(format!("nothing to propagate: z_stop = {total}")));
    }
    let steps = (total / config.dz).ceil().max(1.0) as usize;
    let h = total / steps as f64;
    let k = 2.0 * PI / layout.wavelength;
    let sigma = config.absorber.profile(&grid);
    let kerr_enabled = nonlinear && layout.has_kerr();

    let mut prop = Stepper::new(grid, k, h, config.absorber.transparent_edges, config.transverse_order);
    let mut fields: Vec<ComplexField> = launches.to_vec();
    let mut trajectory = FieldTrajectory {
        grid,
        wavelength: layout.wavelength,
        n_refs: n_refs.clone(),
        snapshots: Vec::new(),
        mode_amplitudes: Vec::new(),
        power_series: Vec::with_capacity(steps + 1),
        z_end: total,
        step: h,
    };
    record(&mut trajectory, layout, config, 0.0, &fields)?;
    trajectory.power_series.push((0.0, fields.iter().map(power).collect()));

    let mut cache = IndexCache { order: config.transverse_order, ..IndexCache::default() };
    for step in 0..steps {
        let z_mid = (step as f64 + 0.5) * h;
        let (n2, kerr) = cache.get(layout, &grid, z_mid, kerr_enabled);
        let kerr_active = kerr.iter().any(|&v| v != 0.0);
        let n_lin: Vec<f64> = if kerr_active { n2.iter().map(|v| v.sqrt()).collect() } else { Vec::new() };
        check_step_phase(n2, &n_refs, k, h, config.max_step_phase, step)?;

        if !kerr_active {
            for (field, &n_ref) in fields.iter_mut().zip(&n_refs) {
                let v = potential(n2, &sigma, n_ref, k);
                *field = prop.step(field, &v, n_ref);
            }
        } else {
            let previous = fields.clone();
            let mut next = previous.clone();
            let mut change = 0.0_f64;
            for iteration in 0..config.nonlinear_iterations {
                let intensity: Vec<Vec<f64>> = previous
                    .iter()
                    .zip(&next)
                    .map(|(a, b)| a.samples().iter().zip(b.samples()).map(|(x, y)| (0.5 * (x + y)).norm_sqr()).collect())
                    .collect();
                let mut updated = Vec::with_capacity(fields.len());
                for (c, &n_ref) in n_refs.iter().enumerate() {
                    let mut n2c = n2.to_vec();
                    let mut peak_dn = 0.0_f64;
                    for i in 0..n2c.len() {
                        if kerr[i] == 0.0 {
                            continue;
                        }
                        let mut drive = 0.0;
                        for (o, int) in intensity.iter().enumerate() {
                            drive += if o == c { int[i] } else { 2.0 * int[i] };
                        }
                        let dn = kerr[i] * drive;
                        peak_dn = peak_dn.max(dn);
                        n2c[i] += 2.0 * n_lin[i] * dn + dn * dn;
                    }
                    if k * peak_dn * h > config.max_step_phase {
                        return Err(Error::Refinement(format!(
                            "Kerr index change {peak_dn:.3e} gives {:.3} rad per step",
                            k * peak_dn * h
                        )));
                    }
                    let v = potential(&n2c, &sigma, n_ref, k);
                    updated.push(prop.step(&previous[c], &v, n_ref));
                }
                change = updated.iter().zip(&next).map(|(u, p)| relative_change(u, p)).fold(0.0, f64::max);
                next = updated;
                if iteration > 0 && change == 0.0 {
                    break;
                }
            }
            if config.nonlinear_iterations > 1 && change > config.nonlinear_tolerance {
                return Err(Error::NonlinearConvergence { z: z_mid + 0.5 * h, change });
            }
            fields = next;
        }

        let z = (step + 1) as f64 * h;
        if fields.iter().any(|f| f.samples().iter().any(|v| !v.re.is_finite() || !v.im.is_finite())) {
            return Err(Error::Diverged { step: step + 1, z });
        }
        trajectory.power_series.push((z, fields.iter().map(power).collect()));
        let at_snapshot = config.snapshot_stride > 0 && (step + 1) % config.snapshot_stride == 0;
        if at_snapshot || step + 1 == steps {
            if config.window_check {
                check_window(&fields, &grid, config.absorber.width, z)?;
            }
            record(&mut trajectory, layout, config, z, &fields)?;
        }
    }
    Ok(trajectory)
}

fn record(
    trajectory: &mut FieldTrajectory,
    layout: &DeviceLayout,
    config: &BpmConfig,
    z: f64,
    fields: &[ComplexField],
) -> Result<()> {
    if config.decompose {
        let (segment, _) = layout.locate(z);
        let rigorous = layout.is_static(segment);
        for (channel, f) in fields.iter().enumerate() {
            let guides = decompose(layout, z, f, CoreFilter::All)?;
            trajectory.mode_amplitudes.push(ModeSample { z, channel, guides, rigorous });
        }
    }
    trajectory.snapshots.push(Snapshot { z, fields: fields.to_vec() });
    Ok(())
}

fn potential(n2: &[f64], sigma: &[f64], n_ref: f64, k: f64) -> Vec<C64> {
    let k2 = k * k;
    n2.iter().zip(sigma).map(|(n, s)| C64::new(k2 * (n - n_ref * n_ref), -k2 * s)).collect()
}

fn relative_change(a: &ComplexField, b: &ComplexField) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.samples().iter().zip(b.samples()) {
        num += (x - y).norm_sqr();
        den += x.norm_sqr();
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        0.0
    }
}

fn check_step_phase(n2: &[f64], n_refs: &[f64], k: f64, h: f64, limit: f64, step: usize) -> Result<()> {
    let (lo, hi) = n2.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &v| (a.min(v), b.max(v)));
    let (lo, hi) = (lo.sqrt(), hi.sqrt());
    for &n_ref in n_refs {
        let phase = k * h * (hi - n_ref).abs().max((n_ref - lo).abs());
        if phase > limit {
            return Err(Error::Refinement(format!("step {step}: k |n - n_ref| dz = {phase:.3} exceeds {limit}; reduce dz")));
        }
    }
    Ok(())
}

fn check_window(fields: &[ComplexField], grid: &TransverseGrid, width: f64, z: f64) -> Result<()> {
    let band = 0.25 * width;
    for (c, f) in fields.iter().enumerate() {
        let peak = f.peak_amplitude();
        if peak == 0.0 {
            continue;
        }
        let edge = f
            .samples()
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let x = grid.x(*i);
                x < grid.x_min() + band || x > grid.x_max() - band
            })
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max);
        // Intensity ratio: outgoing radiation crosses the transparent edges
        // harmlessly, only a clipped guided field gets this large.
        let ratio = (edge / peak).powi(2);
        if ratio > 1e-3 {
            return Err(Error::Window(format!("channel {c} at z = {z}: intensity {ratio:.2e} of peak in the outer absorber")));
        }
    }
    Ok(())
}

/// Caches `n²` and `n₂` for segments whose cross-section does not change.
#[derive(Default)]
struct IndexCache {
    order: u8,
    segment: Option<usize>,
    n2: Vec<f64>,
    kerr: Vec<f64>,
}

impl IndexCache {
    fn get(&mut self, layout: &DeviceLayout, grid: &TransverseGrid, z: f64, kerr: bool) -> (&[f64], &[f64]) {
        let (segment, _) = layout.locate(z);
        let fixed = layout.is_static(segment);
        if !(fixed && self.segment == Some(segment)) {
            self.n2 = layout.index_sq_on_grid(grid, z, true);
            if self.order == 4 {
                operator::correct_interfaces(grid, &operator::index_jumps(layout, z, true), &mut self.n2);
            }
            self.kerr = if kerr { layout.kerr_on_grid(grid, z) } else { vec![0.0; grid.len()] };
            self.segment = if fixed { Some(segment) } else { None };
        }
        (&self.n2, &self.kerr)
    }
}

/// Ghost-point ratio of Hadley's transparent boundary: the field beyond the
/// edge continues as `exp(∓i kx x)` with `kx` taken from the last two samples,
/// restricted to outgoing waves.
fn outgoing_ratio(edge: C64, inner: C64, dx: f64) -> C64 {
    if edge == C64::new(0.0, 0.0) || inner == C64::new(0.0, 0.0) {
        return C64::new(0.0, 0.0);
    }
    let kx = C64::new(0.0, 1.0) * (edge / inner).ln() / dx;
    let kx = if kx.re < 0.0 { C64::new(0.0, kx.im) } else { kx };
    let eta = (C64::new(0.0, -1.0) * kx * dx).exp();
    // Underflowed tails give meaningless ratios; fall back to a zero ghost.
    if eta.is_finite() {
        eta
    } else {
        C64::new(0.0, 0.0)
    }
}

/// One Crank-Nicolson step with reusable buffers.
struct Stepper {
    grid: TransverseGrid,
    k: f64,
    h: f64,
    transparent: bool,
    laplacian: [Vec<f64>; 3],
    matrix: banded::SymmetricBand,
    rhs: Vec<C64>,
    work: banded::Workspace,
}

impl Stepper {
    fn new(grid: TransverseGrid, k: f64, h: f64, transparent: bool, order: u8) -> Self {
        Self {
            grid,
            k,
            h,
            transparent,
            laplacian: operator::laplacian(&grid, order),
            matrix: banded::SymmetricBand::zeros(grid.len()),
            rhs: Vec::new(),
            work: banded::Workspace::default(),
        }
    }

    fn step(&mut self, field: &ComplexField, v: &[C64], n_ref: f64) -> ComplexField {
        let n = self.grid.len();
        let alpha = C64::new(0.0, self.h / (4.0 * self.k * n_ref));
        let e = field.samples();
        let [b0, b1, b2] = &self.laplacian;
        // Explicit half: (I − αH) E with H = L + V.
        let m = &mut self.matrix;
        for i in 0..n {
            m.a0[i] = C64::new(b0[i], 0.0) + v[i];
        }
        for i in 0..n.saturating_sub(1) {
            m.a1[i] = C64::new(b1[i], 0.0);
        }
        for i in 0..n.saturating_sub(2) {
            m.a2[i] = C64::new(b2[i], 0.0);
        }
        if self.transparent && n > 1 {
            let dx = self.grid.dx();
            let ghost = 1.0 / (dx * dx);
            m.a0[0] += ghost * outgoing_ratio(e[0], e[1], dx);
            m.a0[n - 1] += ghost * outgoing_ratio(e[n - 1], e[n - 2], dx);
        }
        m.mul(e, &mut self.rhs);
        for (r, x) in self.rhs.iter_mut().zip(e) {
            *r = x - alpha * *r;
        }
        // Implicit half: (I + αH) E'.
        for a in m.a0.iter_mut() {
            *a = C64::new(1.0, 0.0) + alpha * *a;
        }
        for a in m.a1.iter_mut().chain(m.a2.iter_mut()) {
            *a *= alpha;
        }
        banded::solve(m, &mut self.rhs, &mut self.work);
        ComplexField::new(self.grid, self.rhs.clone()).expect("length preserved")
    }
}
