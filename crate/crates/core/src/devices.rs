//! Piecewise-z refractive-index layouts.
//!
//! A layout is a list of segments. Each segment holds a set of cores whose
//! centres and widths vary linearly over the segment. The cross-section at any
//! `z` is the union of its cores; where cores overlap the larger index wins.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cmt::GuideSpec;
use crate::error::{Error, Result};
use crate::field::TransverseGrid;
use crate::mode_solver::{accumulate_overlap, Layer, SlabGeometry};

pub const LAYOUT_SCHEMA: &str = "modeqc-layout/1";

/// Largest Y-branch or coupler slope treated as adiabatic.
pub const MAX_ADIABATIC_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Straight,
    Taper,
    YSplit,
    YMerge,
    PhaseSection,
    CouplerTransition,
    CouplerParallel,
    KerrSection,
}

/// One core inside a segment, described at the segment's two ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Core {
    pub center_start: f64,
    pub center_end: f64,
    pub width_start: f64,
    pub width_end: f64,
    pub index: f64,
    #[serde(default)]
    pub delta_n: f64,
    #[serde(default)]
    pub kerr_n2: f64,
}

impl Core {
    pub fn straight(center: f64, width: f64, index: f64) -> Self {
        Self::moving(center, center, width, index)
    }

    pub fn moving(center_start: f64, center_end: f64, width: f64, index: f64) -> Self {
        Self { center_start, center_end, width_start: width, width_end: width, index, delta_n: 0.0, kerr_n2: 0.0 }
    }

    pub fn with_delta_n(self, delta_n: f64) -> Self {
        Self { delta_n, ..self }
    }

    pub fn with_kerr(self, kerr_n2: f64) -> Self {
        Self { kerr_n2, ..self }
    }

    fn at(&self, t: f64) -> (f64, f64) {
        let c = self.center_start + t * (self.center_end - self.center_start);
        let w = self.width_start + t * (self.width_end - self.width_start);
        (c, w)
    }

    pub fn slope(&self, length: f64) -> f64 {
        (self.center_end - self.center_start) / length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub kind: SegmentKind,
    pub length: f64,
    pub cores: Vec<Core>,
}

/// Selects cores by the position of their centre.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoreFilter {
    #[default]
    All,
    Band {
        min: f64,
        max: f64,
    },
}

impl CoreFilter {
    pub fn keeps(&self, centre: f64) -> bool {
        match *self {
            CoreFilter::All => true,
            CoreFilter::Band { min, max } => centre >= min && centre <= max,
        }
    }
}

/// A core's footprint at one `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreSection {
    pub left: f64,
    pub right: f64,
    pub index: f64,
    pub kerr_n2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceLayout {
    pub schema: String,
    pub background_index: f64,
    pub wavelength: f64,
    pub segments: Vec<Segment>,
}

impl DeviceLayout {
    pub fn new(background_index: f64, wavelength: f64, segments: Vec<Segment>) -> Result<Self> {
        let layout = Self { schema: LAYOUT_SCHEMA.to_string(), background_index, wavelength, segments };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != LAYOUT_SCHEMA {
            return Err(Error::Format(format!("unsupported layout schema {:?}", self.schema)));
        }
        if !(self.background_index > 0.0 && self.wavelength > 0.0) {
            return Err(Error::Geometry("background index and wavelength must be positive".into()));
        }
        if self.segments.is_empty() {
            return Err(Error::Geometry("layout has no segments".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.length > 0.0) || !s.length.is_finite() {
                return Err(Error::Geometry(format!("segment {i} has length {}", s.length)));
            }
            for c in &s.cores {
                if !(c.width_start > 0.0 && c.width_end > 0.0) {
                    return Err(Error::Geometry(format!("segment {i} has a non-positive core width")));
                }
                if !(c.index > 0.0) || c.kerr_n2 < 0.0 {
                    return Err(Error::Geometry(format!("segment {i} has invalid core material")));
                }
                if c.kerr_n2 > 0.0 && s.kind != SegmentKind::KerrSection {
                    return Err(Error::Geometry(format!("segment {i} carries a Kerr core outside a kerr_section")));
                }
            }
        }
        Ok(())
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// The same device traversed from its far end: `n(x, L − z)`.
    pub fn mirrored_z(&self) -> Self {
        let flip = |kind| match kind {
            SegmentKind::YSplit => SegmentKind::YMerge,
            SegmentKind::YMerge => SegmentKind::YSplit,
            other => other,
        };
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|s| Segment {
                kind: flip(s.kind),
                length: s.length,
                cores: s
                    .cores
                    .iter()
                    .map(|c| Core {
                        center_start: c.center_end,
                        center_end: c.center_start,
                        width_start: c.width_end,
                        width_end: c.width_start,
                        ..*c
                    })
                    .collect(),
            })
            .collect();
        Self { segments, ..self.clone() }
    }

    /// Start positions of every segment plus the total length.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        let mut z = 0.0;
        out.push(z);
        for s in &self.segments {
            z += s.length;
            out.push(z);
        }
        out
    }

    /// Segment containing `z` (half-open on the right, the last one closed)
    /// and the fractional position inside it.
    pub fn locate(&self, z: f64) -> (usize, f64) {
        let mut start = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            let end = start + s.length;
            if z < end || i + 1 == self.segments.len() {
                return (i, ((z - start) / s.length).clamp(0.0, 1.0));
            }
            start = end;
        }
        unreachable!("layout has segments")
    }

    pub fn segment_at(&self, z: f64) -> &Segment {
        &self.segments[self.locate(z).0]
    }

    pub fn sections_at(&self, z: f64, include_delta_n: bool) -> Vec<CoreSection> {
        let (i, t) = self.locate(z);
        self.segment_sections(i, t, include_delta_n)
    }

    fn segment_sections(&self, i: usize, t: f64, include_delta_n: bool) -> Vec<CoreSection> {
        self.segments[i]
            .cores
            .iter()
            .map(|c| {
                let (centre, width) = c.at(t);
                let dn = if include_delta_n { c.delta_n } else { 0.0 };
                CoreSection { left: centre - width / 2.0, right: centre + width / 2.0, index: c.index + dn, kerr_n2: c.kerr_n2 }
            })
            .collect()
    }

    /// Disjoint intervals of the cross-section union, sorted by position.
    pub fn union_at(&self, z: f64, include_delta_n: bool) -> Vec<CoreSection> {
        union(&self.sections_at(z, include_delta_n))
    }

    pub fn index_at(&self, x: f64, z: f64) -> f64 {
        self.sections_at(z, true)
            .iter()
            .filter(|s| x >= s.left && x < s.right)
            .map(|s| s.index)
            .fold(self.background_index, f64::max)
    }

    pub fn kerr_at(&self, x: f64, z: f64) -> f64 {
        union(&self.sections_at(z, true)).iter().find(|s| x >= s.left && x < s.right).map_or(0.0, |s| s.kerr_n2)
    }

    /// Cell-averaged `n²` on `grid` at `z`.
    pub fn index_sq_on_grid(&self, grid: &TransverseGrid, z: f64, include_delta_n: bool) -> Vec<f64> {
        let nb2 = self.background_index * self.background_index;
        let mut out = vec![nb2; grid.len()];
        for s in union(&self.sections_at(z, include_delta_n)) {
            accumulate_overlap(grid, s.left, s.right, s.index * s.index - nb2, &mut out);
        }
        out
    }

    /// Cell-averaged Kerr coefficient on `grid` at `z`.
    pub fn kerr_on_grid(&self, grid: &TransverseGrid, z: f64) -> Vec<f64> {
        let mut out = vec![0.0; grid.len()];
        for s in union(&self.sections_at(z, true)) {
            if s.kerr_n2 > 0.0 {
                accumulate_overlap(grid, s.left, s.right, s.kerr_n2, &mut out);
            }
        }
        out
    }

    pub fn has_kerr(&self) -> bool {
        self.segments.iter().flat_map(|s| &s.cores).any(|c| c.kerr_n2 > 0.0)
    }

    /// Local cross-section as a layered slab.
    pub fn cross_section(&self, z: f64, include_delta_n: bool) -> Result<SlabGeometry> {
        self.filtered_cross_section(z, include_delta_n, CoreFilter::All)
    }

    /// Cross-section built only from the cores kept by `filter`.
    pub fn filtered_cross_section(&self, z: f64, include_delta_n: bool, filter: CoreFilter) -> Result<SlabGeometry> {
        let kept: Vec<CoreSection> =
            self.sections_at(z, include_delta_n).into_iter().filter(|s| filter.keeps(0.5 * (s.left + s.right))).collect();
        let parts = union(&kept);
        if parts.is_empty() {
            return Err(Error::NoGuidedModes(format!("no cores at z = {z}")));
        }
        let nb = self.background_index;
        let mut layers = vec![Layer::new(nb, 0.0)];
        for (i, p) in parts.iter().enumerate() {
            if i > 0 {
                let gap = p.left - parts[i - 1].right;
                if gap > 0.0 {
                    layers.push(Layer::new(nb, gap));
                }
            }
            layers.push(Layer::new(p.index, p.right - p.left));
        }
        layers.push(Layer::new(nb, 0.0));
        SlabGeometry::new(layers, self.wavelength, parts[0].left)
    }

    /// True when no core moves or changes width inside segment `i`.
    pub fn is_static(&self, i: usize) -> bool {
        self.segments[i].cores.iter().all(|c| c.center_start == c.center_end && c.width_start == c.width_end)
    }

    pub fn count_kind(&self, kind: SegmentKind) -> usize {
        self.segments.iter().filter(|s| s.kind == kind).count()
    }

    /// Cores carrying a Kerr coefficient inside kerr sections.
    pub fn kerr_core_count(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::KerrSection)
            .flat_map(|s| &s.cores)
            .filter(|c| c.kerr_n2 > 0.0)
            .count()
    }

    /// Checks that neighbouring segments meet: the union of cores at the end
    /// of one segment must match the start of the next within `tolerance`.
    pub fn check_continuity(&self, tolerance: f64) -> Result<()> {
        for i in 0..self.segments.len().saturating_sub(1) {
            let a = union(&self.segment_sections(i, 1.0, false));
            let b = union(&self.segment_sections(i + 1, 0.0, false));
            let matches = a.len() == b.len()
                && a.iter().zip(&b).all(|(p, q)| (p.left - q.left).abs() <= tolerance && (p.right - q.right).abs() <= tolerance);
            if !matches {
                return Err(Error::Geometry(format!("cores of segments {i} and {} do not meet within {tolerance} um", i + 1)));
            }
        }
        Ok(())
    }

    /// Lateral extent `(min, max)` of all cores over the whole device.
    pub fn extent(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.segments {
            for c in &s.cores {
                for t in [0.0, 1.0] {
                    let (centre, width) = c.at(t);
                    lo = lo.min(centre - width / 2.0);
                    hi = hi.max(centre + width / 2.0);
                }
            }
        }
        (lo, hi)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let layout: Self = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

fn union(sections: &[CoreSection]) -> Vec<CoreSection> {
    let mut edges: Vec<f64> = sections.iter().flat_map(|s| [s.left, s.right]).collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let mut out: Vec<CoreSection> = Vec::new();
    for w in edges.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let best = sections.iter().filter(|s| mid >= s.left && mid < s.right).fold(None::<CoreSection>, |acc, s| match acc {
            Some(a) if a.index > s.index || (a.index == s.index && a.kerr_n2 >= s.kerr_n2) => Some(a),
            _ => Some(*s),
        });
        let Some(b) = best else { continue };
        match out.last_mut() {
            Some(last) if last.right == w[0] && last.index == b.index && last.kerr_n2 == b.kerr_n2 => last.right = w[1],
            _ => out.push(CoreSection { left: w[0], right: w[1], index: b.index, kerr_n2: b.kerr_n2 }),
        }
    }
    out
}

/// Core and cladding materials shared by all builders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub n_core: f64,
    pub n_clad: f64,
    pub wavelength: f64,
}

impl Material {
    pub fn nominal() -> Self {
        Self { n_core: 1.57, n_clad: 1.55, wavelength: 1.064 }
    }

    pub fn guide(&self, width: f64) -> GuideSpec {
        GuideSpec { n_core: self.n_core, n_clad: self.n_clad, width, wavelength: self.wavelength }
    }
}

pub fn build_straight(material: &Material, width: f64, length: f64) -> Result<DeviceLayout> {
    DeviceLayout::new(
        material.n_clad,
        material.wavelength,
        vec![Segment { kind: SegmentKind::Straight, length, cores: vec![Core::straight(0.0, width, material.n_core)] }],
    )
}

/// Y-branch MZI with a phase shifter on the lower (`x < 0`) arm. With the
/// odd mode positive on the upper side, a positive arm phase lag `φ` on the
/// lower arm realizes `mzi_unitary(φ)` up to a global phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MziParams {
    pub input_width: f64,
    pub arm_width: f64,
    /// Centre-to-centre distance between the arms.
    pub arm_separation: f64,
    /// Straight arm length between the Y-branches.
    pub arm_length: f64,
    pub delta_n: f64,
    pub shifter_length: f64,
    /// Lateral slope of each arm inside the Y-branches.
    pub slope: f64,
    pub lead_length: f64,
}

impl MziParams {
    /// 3 um dual-mode leads, 1.5 um single-mode arms 6 um apart (edge to
    /// edge) and a 1 mm shifter; the arm length fills a 5000 um device.
    pub fn nominal() -> Self {
        let mut p = Self {
            input_width: 3.0,
            arm_width: 1.5,
            arm_separation: 7.5,
            arm_length: 0.0,
            delta_n: 0.0008,
            shifter_length: 1000.0,
            slope: 0.007,
            lead_length: 1000.0,
        };
        p.arm_length = 5000.0 - 2.0 * p.lead_length - 2.0 * p.branch_length();
        p
    }

    fn start_offset(&self) -> f64 {
        0.5 * (self.input_width - self.arm_width)
    }

    pub fn branch_length(&self) -> f64 {
        (0.5 * self.arm_separation - self.start_offset()) / self.slope
    }

    pub fn total_length(&self) -> f64 {
        2.0 * (self.lead_length + self.branch_length()) + self.arm_length
    }
}

pub fn build_phase_shifter_mzi(material: &Material, p: &MziParams) -> Result<DeviceLayout> {
    if p.arm_separation < p.arm_width {
        return Err(Error::Geometry(format!(
            "arm separation {} is below the arm width {}: arms overlap",
            p.arm_separation, p.arm_width
        )));
    }
    if !(p.slope > 0.0 && p.slope <= MAX_ADIABATIC_SLOPE) {
        return Err(Error::Geometry(format!("Y-branch slope {} outside (0, {MAX_ADIABATIC_SLOPE}]", p.slope)));
    }
    if p.arm_width > p.input_width {
        return Err(Error::Geometry("arms wider than the input guide".into()));
    }
    if !(p.shifter_length > 0.0 && p.shifter_length <= p.arm_length) {
        return Err(Error::Geometry(format!("shifter length {} must lie in (0, arm length {}]", p.shifter_length, p.arm_length)));
    }
    let n = material.n_core;
    let (w, wa) = (p.input_width, p.arm_width);
    let (c0, c1) = (p.start_offset(), 0.5 * p.arm_separation);
    let arms = |dn: f64| vec![Core::straight(-c1, wa, n).with_delta_n(dn), Core::straight(c1, wa, n)];
    let lead = Segment { kind: SegmentKind::Straight, length: p.lead_length, cores: vec![Core::straight(0.0, w, n)] };
    let pad = 0.5 * (p.arm_length - p.shifter_length);
    let mut segments = vec![
        lead.clone(),
        Segment {
            kind: SegmentKind::YSplit,
            length: p.branch_length(),
            cores: vec![Core::moving(-c0, -c1, wa, n), Core::moving(c0, c1, wa, n)],
        },
    ];
    if pad > 0.0 {
        segments.push(Segment { kind: SegmentKind::Straight, length: pad, cores: arms(0.0) });
    }
    segments.push(Segment { kind: SegmentKind::PhaseSection, length: p.shifter_length, cores: arms(p.delta_n) });
    if pad > 0.0 {
        segments.push(Segment { kind: SegmentKind::Straight, length: pad, cores: arms(0.0) });
    }
    segments.push(Segment {
        kind: SegmentKind::YMerge,
        length: p.branch_length(),
        cores: vec![Core::moving(-c1, -c0, wa, n), Core::moving(c1, c0, wa, n)],
    });
    segments.push(lead);
    DeviceLayout::new(material.n_clad, material.wavelength, segments)
}

/// Two identical guides closing to `gap` along linear transitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplerParams {
    pub width: f64,
    /// Edge-to-edge separation in the parallel region.
    pub gap: f64,
    pub parallel_length: f64,
    /// Lateral slope of each guide in the transitions.
    pub slope: f64,
    /// Edge-to-edge separation at the ports.
    pub far_gap: f64,
    pub lead_length: f64,
}

impl CouplerParams {
    pub fn nominal() -> Self {
        Self { width: 3.0, gap: 1.2, parallel_length: 823.0, slope: 0.007, far_gap: 10.0, lead_length: 200.0 }
    }

    pub fn transition_length(&self) -> f64 {
        (self.far_gap - self.gap) / (2.0 * self.slope)
    }

    pub fn total_length(&self) -> f64 {
        2.0 * (self.lead_length + self.transition_length()) + self.parallel_length
    }

    pub fn centre(&self, gap: f64) -> f64 {
        0.5 * (self.width + gap)
    }
}

fn validate_coupler(p: &CouplerParams) -> Result<()> {
    if !(p.gap >= 0.0) {
        return Err(Error::Geometry(format!("coupler gap {} would make the guides intersect", p.gap)));
    }
    if !(p.slope > 0.0 && p.slope <= MAX_ADIABATIC_SLOPE) {
        return Err(Error::Geometry(format!("coupler slope {} outside (0, {MAX_ADIABATIC_SLOPE}]", p.slope)));
    }
    if p.far_gap < p.gap {
        return Err(Error::Geometry("far gap below the coupling gap".into()));
    }
    if !(p.parallel_length > 0.0) || p.lead_length < 0.0 {
        return Err(Error::Geometry("coupler lengths must be positive".into()));
    }
    Ok(())
}

/// Guide 1 sits at `x < 0`, guide 2 at `x > 0`.
pub fn build_directional_coupler(material: &Material, p: &CouplerParams) -> Result<DeviceLayout> {
    validate_coupler(p)?;
    let n = material.n_core;
    let (far, near) = (p.centre(p.far_gap), p.centre(p.gap));
    let pair = |a: f64, b: f64| vec![Core::moving(-a, -b, p.width, n), Core::moving(a, b, p.width, n)];
    let mut segments = Vec::new();
    if p.lead_length > 0.0 {
        segments.push(Segment { kind: SegmentKind::Straight, length: p.lead_length, cores: pair(far, far) });
    }
    let transition = p.transition_length();
    if transition > 0.0 {
        segments.push(Segment { kind: SegmentKind::CouplerTransition, length: transition, cores: pair(far, near) });
    }
    segments.push(Segment { kind: SegmentKind::CouplerParallel, length: p.parallel_length, cores: pair(near, near) });
    if transition > 0.0 {
        segments.push(Segment { kind: SegmentKind::CouplerTransition, length: transition, cores: pair(near, far) });
    }
    if p.lead_length > 0.0 {
        segments.push(Segment { kind: SegmentKind::Straight, length: p.lead_length, cores: pair(far, far) });
    }
    DeviceLayout::new(material.n_clad, material.wavelength, segments)
}

/// C-NOT built from a dual-mode target MZI and a control guide.
///
/// The target guide splits into two dual-mode arms. A separator coupler moves
/// control TE₁ light into the TE₁ mode of the upper arm, both arms cross a
/// Kerr section, and a second coupler returns the control light. A dummy guide
/// mirrors the control guide below the lower arm so the MZI stays balanced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnotParams {
    pub width: f64,
    /// Edge-to-edge gap between the two target arms and between each arm and
    /// its neighbour (control or dummy) outside the couplers.
    pub far_gap: f64,
    pub coupler_gap: f64,
    pub coupler_length: f64,
    pub slope: f64,
    pub lead_length: f64,
    pub kerr_n2: f64,
    /// Device length; the Kerr section absorbs the remainder.
    pub total_length: f64,
    /// Straight lengths around the Kerr section.
    pub spacer_length: f64,
}

impl CnotParams {
    pub fn nominal() -> Self {
        Self {
            width: 3.0,
            far_gap: 10.0,
            coupler_gap: 1.2,
            coupler_length: 823.0,
            slope: 0.007,
            lead_length: 200.0,
            kerr_n2: 1e-3,
            total_length: 10000.0,
            spacer_length: 50.0,
        }
    }

    /// Arm centre offset outside the couplers.
    pub fn arm_offset(&self) -> f64 {
        0.5 * (self.width + self.far_gap)
    }

    pub fn control_offset(&self) -> f64 {
        self.arm_offset() + self.width + self.far_gap
    }

    pub fn branch_length(&self) -> f64 {
        self.arm_offset() / self.slope
    }

    pub fn coupler(&self) -> CouplerParams {
        CouplerParams {
            width: self.width,
            gap: self.coupler_gap,
            parallel_length: self.coupler_length,
            slope: self.slope,
            far_gap: self.far_gap,
            lead_length: 0.0,
        }
    }

    pub fn kerr_length(&self) -> f64 {
        self.total_length
            - 2.0 * (self.lead_length + self.branch_length() + self.spacer_length)
            - 2.0 * (self.coupler().total_length())
    }
}

pub fn build_cnot(material: &Material, p: &CnotParams) -> Result<DeviceLayout> {
    let dc = p.coupler();
    validate_coupler(&dc)?;
    if !(p.slope > 0.0 && p.slope <= MAX_ADIABATIC_SLOPE) {
        return Err(Error::Geometry(format!("slope {} outside (0, {MAX_ADIABATIC_SLOPE}]", p.slope)));
    }
    if p.kerr_n2 < 0.0 {
        return Err(Error::Geometry("Kerr coefficient must be non-negative".into()));
    }
    let kerr = p.kerr_length();
    if !(kerr > 0.0) {
        return Err(Error::Geometry(format!("components need more than the {} um device length", p.total_length)));
    }
    let n = material.n_core;
    let w = p.width;
    let (arm, ctrl) = (p.arm_offset(), p.control_offset());
    // Inside a coupler the arm and its neighbour each move by half the gap change.
    let shift = 0.5 * (p.far_gap - p.coupler_gap);
    let outer = |arm_a: f64, arm_b: f64, out_a: f64, out_b: f64| {
        vec![
            Core::moving(-out_a, -out_b, w, n),
            Core::moving(-arm_a, -arm_b, w, n),
            Core::moving(arm_a, arm_b, w, n),
            Core::moving(out_a, out_b, w, n),
        ]
    };
    let still = outer(arm, arm, ctrl, ctrl);
    let neighbours = [Core::straight(-ctrl, w, n), Core::straight(ctrl, w, n)];
    let with_target = |target: Vec<Core>| {
        let mut cores = vec![neighbours[0]];
        cores.extend(target);
        cores.push(neighbours[1]);
        cores
    };
    let mut segments = Vec::new();
    let mut push = |kind: SegmentKind, length: f64, cores: Vec<Core>| {
        if length > 0.0 {
            segments.push(Segment { kind, length, cores });
        }
    };
    push(SegmentKind::Straight, p.lead_length, with_target(vec![Core::straight(0.0, w, n)]));
    push(SegmentKind::YSplit, p.branch_length(), with_target(vec![Core::moving(0.0, -arm, w, n), Core::moving(0.0, arm, w, n)]));
    let coupler = |segs: &mut dyn FnMut(SegmentKind, f64, Vec<Core>)| {
        let transition = dc.transition_length();
        segs(SegmentKind::CouplerTransition, transition, outer(arm, arm + shift, ctrl, ctrl - shift));
        segs(SegmentKind::CouplerParallel, dc.parallel_length, outer(arm + shift, arm + shift, ctrl - shift, ctrl - shift));
        segs(SegmentKind::CouplerTransition, transition, outer(arm + shift, arm, ctrl - shift, ctrl));
    };
    coupler(&mut push);
    push(SegmentKind::Straight, p.spacer_length, still.clone());
    let mut kerr_cores = still.clone();
    kerr_cores[1] = kerr_cores[1].with_kerr(p.kerr_n2);
    kerr_cores[2] = kerr_cores[2].with_kerr(p.kerr_n2);
    push(SegmentKind::KerrSection, kerr, kerr_cores);
    push(SegmentKind::Straight, p.spacer_length, still);
    coupler(&mut push);
    push(SegmentKind::YMerge, p.branch_length(), with_target(vec![Core::moving(-arm, 0.0, w, n), Core::moving(arm, 0.0, w, n)]));
    push(SegmentKind::Straight, p.lead_length, with_target(vec![Core::straight(0.0, w, n)]));
    let layout = DeviceLayout::new(material.n_clad, material.wavelength, segments)?;
    layout.check_continuity(1e-9)?;
    Ok(layout)
}
