//! Guided TE modes of layered slab waveguides.
//!
//! Propagation constants are located by bisection on a Sturm node count: for
//! a trial `n_eff` the field is shot from the left cladding through the stack
//! with exact per-layer transfer, and the number of zeros of that solution
//! equals the number of guided modes above `n_eff`. Counting instead of
//! sign-scanning keeps nearly degenerate supermodes of well separated guides
//! apart. Profiles are the analytic cos/sin/cosh/sinh pieces sampled on the
//! grid, then trapezoid-normalized.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{overlap, ComplexField, TransverseGrid, C64};

/// Relative edge amplitude above which a sampled profile is considered clipped.
pub const EDGE_TOLERANCE: f64 = 1e-6;
/// Modes closer than this to the cladding index are flagged.
pub const NEAR_CUTOFF: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub index: f64,
    /// Micrometres. Ignored for the two outer (semi-infinite) layers.
    pub thickness: f64,
}

impl Layer {
    pub fn new(index: f64, thickness: f64) -> Self {
        Self { index, thickness }
    }
}

/// Layered refractive-index stack along `x` plus the free-space wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabGeometry {
    layers: Vec<Layer>,
    wavelength: f64,
    /// Position of the first interior interface.
    origin: f64,
}

impl SlabGeometry {
    pub fn new(layers: Vec<Layer>, wavelength: f64, origin: f64) -> Result<Self> {
        if layers.len() < 3 {
            return Err(Error::Geometry(format!("{} layers, need at least 3", layers.len())));
        }
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::Geometry(format!("wavelength {wavelength} must be positive")));
        }
        if let Some(l) = layers.iter().find(|l| !(l.index > 0.0) || !l.index.is_finite()) {
            return Err(Error::Geometry(format!("refractive index {} must be positive", l.index)));
        }
        let n = layers.len();
        if let Some(l) = layers[1..n - 1].iter().find(|l| !(l.thickness > 0.0)) {
            return Err(Error::Geometry(format!("interior thickness {} must be positive", l.thickness)));
        }
        if !origin.is_finite() {
            return Err(Error::Geometry("origin must be finite".into()));
        }
        Ok(Self { layers, wavelength, origin })
    }

    /// Three-layer slab of width `width` centred on `x = 0`.
    pub fn symmetric(n_core: f64, n_clad: f64, width: f64, wavelength: f64) -> Result<Self> {
        Self::new(vec![Layer::new(n_clad, 0.0), Layer::new(n_core, width), Layer::new(n_clad, 0.0)], wavelength, -width / 2.0)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn shifted(&self, dx: f64) -> Self {
        Self { origin: self.origin + dx, ..self.clone() }
    }

    fn interior(&self) -> &[Layer] {
        &self.layers[1..self.layers.len() - 1]
    }

    pub fn left_index(&self) -> f64 {
        self.layers[0].index
    }

    pub fn right_index(&self) -> f64 {
        self.layers[self.layers.len() - 1].index
    }

    /// Largest of the two semi-infinite cladding indices.
    pub fn cladding_index(&self) -> f64 {
        self.left_index().max(self.right_index())
    }

    pub fn max_index(&self) -> f64 {
        self.layers.iter().map(|l| l.index).fold(0.0, f64::max)
    }

    /// `(x_start, x_end)` of the finite part of the stack.
    pub fn span(&self) -> (f64, f64) {
        let total: f64 = self.interior().iter().map(|l| l.thickness).sum();
        (self.origin, self.origin + total)
    }

    pub fn center(&self) -> f64 {
        let (a, b) = self.span();
        0.5 * (a + b)
    }

    pub fn is_guiding(&self) -> bool {
        self.max_index() > self.cladding_index()
    }

    pub fn is_symmetric_three_layer(&self) -> bool {
        self.layers.len() == 3 && self.left_index() == self.right_index()
    }

    pub fn index_at(&self, x: f64) -> f64 {
        let mut edge = self.origin;
        if x < edge {
            return self.left_index();
        }
        for layer in self.interior() {
            edge += layer.thickness;
            if x < edge {
                return layer.index;
            }
        }
        self.right_index()
    }

    /// `n²` averaged over each grid cell `[x − dx/2, x + dx/2]`, exact for the
    /// piecewise-constant stack.
    pub fn cell_averaged_index_sq(&self, grid: &TransverseGrid) -> Vec<f64> {
        let mut pieces = Vec::with_capacity(self.layers.len());
        let mut edge = self.origin;
        pieces.push((f64::NEG_INFINITY, edge, self.left_index().powi(2)));
        for layer in self.interior() {
            pieces.push((edge, edge + layer.thickness, layer.index.powi(2)));
            edge += layer.thickness;
        }
        pieces.push((edge, f64::INFINITY, self.right_index().powi(2)));
        cell_average(grid, &pieces)
    }

    /// Fraction of each grid cell covered by layers that guide, i.e. whose index
    /// exceeds both claddings.
    pub fn core_fraction(&self, grid: &TransverseGrid) -> Vec<f64> {
        let clad = self.cladding_index();
        let mut pieces = vec![(f64::NEG_INFINITY, f64::INFINITY, 0.0)];
        let mut edge = self.origin;
        for layer in self.interior() {
            let w = if layer.index > clad { 1.0 } else { 0.0 };
            pieces.push((edge, edge + layer.thickness, w));
            edge += layer.thickness;
        }
        // Later pieces override earlier ones; the catch-all contributes nothing
        // wherever an interior layer is present.
        let mut out = vec![0.0; grid.len()];
        for &(a, b, w) in &pieces[1..] {
            accumulate_overlap(grid, a, b, w, &mut out);
        }
        out
    }

    /// Zeros of the shooting solution at `n_eff`, equal to the number of
    /// guided modes with a larger effective index.
    fn node_count(&self, n_eff: f64) -> usize {
        let k = self.wavenumber();
        let b2 = (k * n_eff).powi(2);
        let gamma_l = (b2 - (k * self.left_index()).powi(2)).sqrt();
        let (mut psi, mut dpsi) = (1.0_f64, gamma_l);
        let mut zeros = 0usize;
        for layer in self.interior() {
            let q = (k * layer.index).powi(2) - b2;
            let d = layer.thickness;
            if q > 0.0 {
                let kx = q.sqrt();
                let phase = (dpsi / kx).atan2(psi);
                let lo = ((-phase - PI / 2.0) / PI).floor();
                let hi = ((kx * d - phase - PI / 2.0) / PI).floor();
                zeros += (hi - lo).max(0.0) as usize;
                let (c, s) = ((kx * d).cos(), (kx * d).sin());
                (psi, dpsi) = (psi * c + dpsi / kx * s, -psi * kx * s + dpsi * c);
            } else {
                let g = (-q).sqrt();
                let (c, s) = if g > 0.0 { ((g * d).cosh(), (g * d).sinh() / g) } else { (1.0, d) };
                let next = psi * c + dpsi * s;
                let next_d = psi * g * g * s + dpsi * c;
                if next != 0.0 && psi != 0.0 && next.signum() != psi.signum() {
                    zeros += 1;
                }
                (psi, dpsi) = (next, next_d);
            }
            let scale = psi.abs().max(dpsi.abs());
            if scale > 0.0 {
                psi /= scale;
                dpsi /= scale;
            }
        }
        let gamma_r = (b2 - (k * self.right_index()).powi(2)).sqrt();
        let grow = 0.5 * (psi + dpsi / gamma_r);
        let decay = 0.5 * (psi - dpsi / gamma_r);
        if grow != 0.0 && -decay / grow > 1.0 {
            zeros += 1;
        }
        zeros
    }
}

/// Cell average of piecewise-constant values `(start, end, value)` where later
/// pieces do not overlap earlier ones.
pub(crate) fn cell_average(grid: &TransverseGrid, pieces: &[(f64, f64, f64)]) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    for &(a, b, v) in pieces {
        accumulate_overlap(grid, a, b, v, &mut out);
    }
    out
}

/// Adds `value × (fraction of cell i inside [a, b))` to `out[i]`.
pub(crate) fn accumulate_overlap(grid: &TransverseGrid, a: f64, b: f64, value: f64, out: &mut [f64]) {
    let dx = grid.dx();
    let x0 = grid.x_min();
    let n = grid.len();
    let first = (((a - x0) / dx - 0.5).floor().max(0.0)) as usize;
    let last_f = ((b - x0) / dx + 0.5).ceil();
    let last = if last_f.is_finite() { (last_f.max(0.0) as usize).min(n - 1) } else { n - 1 };
    if first >= n {
        return;
    }
    for (i, slot) in out.iter_mut().enumerate().take(last + 1).skip(first) {
        let x = x0 + i as f64 * dx;
        let lo = (x - 0.5 * dx).max(a);
        let hi = (x + 0.5 * dx).min(b);
        if hi > lo {
            *slot += value * (hi - lo) / dx;
        }
    }
}

/// One guided TE mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    /// Propagation constant, rad/μm.
    pub beta: f64,
    pub n_eff: f64,
    /// Real-valued, normalized profile.
    pub profile: ComplexField,
    /// Set when `n_eff` sits within [`NEAR_CUTOFF`] of the cladding index.
    pub near_cutoff: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub geometry: SlabGeometry,
    pub modes: Vec<Mode>,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn grid(&self) -> &TransverseGrid {
        self.modes[0].profile.grid()
    }

    pub fn mode(&self, j: usize) -> &Mode {
        &self.modes[j]
    }
}

/// Number of guided TE modes supported by the stack.
pub fn guided_mode_count(geometry: &SlabGeometry) -> usize {
    if !geometry.is_guiding() {
        return 0;
    }
    let floor = geometry.cladding_index();
    geometry.node_count(floor * (1.0 + 1e-15) + 1e-15)
}

/// Effective indices of the guided modes in decreasing order, at most `max_modes`.
pub fn effective_indices(geometry: &SlabGeometry, max_modes: usize) -> Result<Vec<f64>> {
    let count = guided_mode_count(geometry);
    if count == 0 {
        return Err(Error::NoGuidedModes(format!(
            "max index {} does not exceed cladding index {}",
            geometry.max_index(),
            geometry.cladding_index()
        )));
    }
    let floor = geometry.cladding_index();
    let ceiling = geometry.max_index();
    Ok((0..count.min(max_modes))
        .map(|m| {
            let (mut lo, mut hi) = (floor, ceiling);
            // The counting function is a step function; each bisection halves
            // the bracket of the (m+1)-th highest root.
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi || hi - lo < 1e-14 {
                    break;
                }
                if geometry.node_count(mid) > m {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect())
}

/// Analytic field of the stack at a given effective index, shot from the left.
struct ShootingProfile {
    k: f64,
    b2: f64,
    gamma_left: f64,
    gamma_right: f64,
    origin: f64,
    /// `(start, end, index², psi, dpsi)` for each interior layer.
    pieces: Vec<(f64, f64, f64, f64, f64)>,
    right_start: f64,
    right_psi: f64,
}

impl ShootingProfile {
    fn new(geometry: &SlabGeometry, n_eff: f64) -> Self {
        let k = geometry.wavenumber();
        let b2 = (k * n_eff).powi(2);
        let gamma_left = (b2 - (k * geometry.left_index()).powi(2)).max(0.0).sqrt();
        let gamma_right = (b2 - (k * geometry.right_index()).powi(2)).max(0.0).sqrt();
        let (mut psi, mut dpsi) = (1.0_f64, gamma_left);
        let mut start = geometry.origin();
        let mut pieces = Vec::new();
        for layer in geometry.interior() {
            let end = start + layer.thickness;
            pieces.push((start, end, layer.index * layer.index, psi, dpsi));
            (psi, dpsi) = Self::advance(k * k * layer.index * layer.index - b2, layer.thickness, psi, dpsi);
            start = end;
        }
        Self { k, b2, gamma_left, gamma_right, origin: geometry.origin(), pieces, right_start: start, right_psi: psi }
    }

    fn advance(q: f64, t: f64, psi: f64, dpsi: f64) -> (f64, f64) {
        if q > 0.0 {
            let kx = q.sqrt();
            let (c, s) = ((kx * t).cos(), (kx * t).sin());
            (psi * c + dpsi / kx * s, -psi * kx * s + dpsi * c)
        } else if q < 0.0 {
            let g = (-q).sqrt();
            let (c, s) = ((g * t).cosh(), (g * t).sinh());
            (psi * c + dpsi / g * s, psi * g * s + dpsi * c)
        } else {
            (psi + dpsi * t, dpsi)
        }
    }

    fn eval(&self, x: f64) -> f64 {
        if x < self.origin {
            return (self.gamma_left * (x - self.origin)).exp();
        }
        for &(a, b, n2, psi, dpsi) in &self.pieces {
            if x < b {
                return Self::advance(self.k * self.k * n2 - self.b2, x - a, psi, dpsi).0;
            }
        }
        self.right_psi * (-self.gamma_right * (x - self.right_start)).exp()
    }
}

/// Guided TE modes (at most `max_modes`) sampled on `grid`. Fails with a
/// window error when any normalized profile exceeds [`EDGE_TOLERANCE`] of its
/// peak at the grid edge.
pub fn solve_te_modes(geometry: &SlabGeometry, grid: &TransverseGrid, max_modes: usize) -> Result<ModeSet> {
    build_modes(geometry, grid, max_modes, Some(EDGE_TOLERANCE))
}

/// Like [`solve_te_modes`] but accepts tails that reach the window edge.
/// Meant for projecting BPM fields, whose absorber already owns the edges.
pub fn sample_te_modes(geometry: &SlabGeometry, grid: &TransverseGrid, max_modes: usize) -> Result<ModeSet> {
    build_modes(geometry, grid, max_modes, None)
}

fn build_modes(geometry: &SlabGeometry, grid: &TransverseGrid, max_modes: usize, edge_tolerance: Option<f64>) -> Result<ModeSet> {
    let (lo, hi) = geometry.span();
    if lo < grid.x_min() || hi > grid.x_max() {
        return Err(Error::Window(format!("stack [{lo}, {hi}] extends beyond grid [{}, {}]", grid.x_min(), grid.x_max())));
    }
    let n_effs = effective_indices(geometry, max_modes)?;
    let k = geometry.wavenumber();
    let xs = grid.xs();
    let center = geometry.center();
    let mut modes: Vec<Mode> = Vec::with_capacity(n_effs.len());
    for (j, &n_eff) in n_effs.iter().enumerate() {
        let shot = ShootingProfile::new(geometry, n_eff);
        let raw: Vec<f64> = xs.iter().map(|&x| shot.eval(x)).collect();
        let peak = raw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !peak.is_finite() || peak == 0.0 {
            return Err(Error::Degenerate(format!("mode {j} profile is not finite")));
        }
        // Sign convention: even-order modes positive at the stack centre, odd
        // ones with positive slope there.
        let h = 1e-4;
        let value = shot.eval(center);
        let slope = shot.eval(center + h) - shot.eval(center - h);
        let primary = if j % 2 == 0 { value } else { slope };
        let secondary = if j % 2 == 0 { slope } else { value };
        let reference = if primary.abs() > 1e-6 * peak { primary } else { secondary };
        let sign = if reference < 0.0 { -1.0 } else { 1.0 };

        let mut profile = ComplexField::from_real(*grid, &raw)?.scaled(C64::new(sign, 0.0));
        // Quadrature-level orthogonalization against the lower modes.
        for prev in &modes {
            let c = overlap(&prev.profile, &profile)?;
            profile = profile.add_scaled(-c, &prev.profile)?;
        }
        let profile = crate::field::normalize(&profile)?;
        if let Some(tolerance) = edge_tolerance {
            let samples = profile.samples();
            let edge = samples[0].norm().max(samples[samples.len() - 1].norm());
            let norm_peak = profile.peak_amplitude();
            if edge > tolerance * norm_peak {
                return Err(Error::Window(format!("mode {j} has relative edge amplitude {:.2e}", edge / norm_peak)));
            }
        }
        modes.push(Mode { beta: k * n_eff, n_eff, profile, near_cutoff: n_eff - geometry.cladding_index() < NEAR_CUTOFF });
    }
    Ok(ModeSet { geometry: geometry.clone(), modes })
}

/// Independent mode-count estimate `1 + floor(2V/π)` for symmetric three-layer slabs.
pub fn mode_count_oracle(geometry: &SlabGeometry) -> Result<usize> {
    if !geometry.is_symmetric_three_layer() {
        return Err(Error::UnsupportedOracle("the V-number count only covers symmetric three-layer slabs".into()));
    }
    let core = geometry.layers()[1];
    let clad = geometry.left_index();
    if core.index <= clad {
        return Err(Error::NoGuidedModes(format!("core index {} does not exceed cladding index {clad}", core.index)));
    }
    let v = v_number(core.index, clad, core.thickness, geometry.wavelength());
    Ok(1 + (2.0 * v / PI).floor() as usize)
}

/// Normalized frequency of a symmetric slab, `(πW/λ)·sqrt(n_core² − n_clad²)`.
pub fn v_number(n_core: f64, n_clad: f64, width: f64, wavelength: f64) -> f64 {
    PI * width / wavelength * (n_core * n_core - n_clad * n_clad).sqrt()
}

/// Fraction of modal power inside the guiding layers.
pub fn confinement_factor(mode: &Mode, geometry: &SlabGeometry) -> f64 {
    let grid = mode.profile.grid();
    let weights = geometry.core_fraction(grid);
    let weighted: Vec<f64> = mode.profile.samples().iter().zip(&weights).map(|(s, w)| s.norm_sqr() * w).collect();
    grid.integrate(&weighted) / crate::field::power(&mode.profile)
}

/// Relative residual `‖(d²/dx² + k²n² − β²)Ψ‖ / ‖β²Ψ‖` of the second-order
/// finite-difference discretization, with cell-averaged `n²`.
pub fn eigen_residual(mode: &Mode, geometry: &SlabGeometry) -> f64 {
    let grid = mode.profile.grid();
    let dx2 = grid.dx().powi(2);
    let k2 = geometry.wavenumber().powi(2);
    let n2 = geometry.cell_averaged_index_sq(grid);
    let psi = mode.profile.samples();
    let b2 = mode.beta * mode.beta;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 1..psi.len() - 1 {
        let lap = (psi[i + 1] - 2.0 * psi[i] + psi[i - 1]) / dx2;
        let r = lap + psi[i] * (k2 * n2[i] - b2);
        num += r.norm_sqr();
        den += (psi[i] * b2).norm_sqr();
    }
    (num / den).sqrt()
}

/// Rectangular channel cross-section for the effective index method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGuide {
    pub core_index: f64,
    /// Lateral cladding, also used above and below unless overridden.
    pub cladding_index: f64,
    pub substrate_index: Option<f64>,
    pub cover_index: Option<f64>,
    pub width: f64,
    /// `f64::INFINITY` reduces to the lateral slab unchanged.
    pub height: f64,
    pub wavelength: f64,
}

impl ChannelGuide {
    pub fn buried(core_index: f64, cladding_index: f64, width: f64, height: f64, wavelength: f64) -> Self {
        Self { core_index, cladding_index, substrate_index: None, cover_index: None, width, height, wavelength }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveIndexReduction {
    pub slab: SlabGeometry,
    pub vertical_n_eff: f64,
    pub note: String,
}

/// Collapses the vertical confinement of a channel into the core index of an
/// equivalent lateral slab.
pub fn effective_index_reduce(channel: &ChannelGuide) -> Result<EffectiveIndexReduction> {
    let substrate = channel.substrate_index.unwrap_or(channel.cladding_index);
    let cover = channel.cover_index.unwrap_or(channel.cladding_index);
    let vertical_n_eff = if channel.height.is_infinite() && channel.height > 0.0 {
        channel.core_index
    } else {
        let vertical = SlabGeometry::new(
            vec![Layer::new(substrate, 0.0), Layer::new(channel.core_index, channel.height), Layer::new(cover, 0.0)],
            channel.wavelength,
            -channel.height / 2.0,
        )?;
        match effective_indices(&vertical, 1) {
            Ok(n) => n[0],
            Err(Error::NoGuidedModes(m)) => return Err(Error::NoGuidedModes(format!("vertical slab below cutoff: {m}"))),
            Err(e) => return Err(e),
        }
    };
    let slab = SlabGeometry::symmetric(vertical_n_eff, channel.cladding_index, channel.width, channel.wavelength)?;
    let note = format!(
        "vertical slab (n = {substrate}/{}/{cover}, h = {} um) gives n_eff = {vertical_n_eff:.12}; \
         used as core index of a {} um lateral slab in n = {}",
        channel.core_index, channel.height, channel.width, channel.cladding_index
    );
    Ok(EffectiveIndexReduction { slab, vertical_n_eff, note })
}
