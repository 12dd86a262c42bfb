//! Projection of BPM fields onto the modes of the individual guides present
//! at a given `z`.

use serde::{Deserialize, Serialize};

use crate::devices::{CoreFilter, DeviceLayout};
use crate::error::Result;
use crate::field::{overlap, ComplexField, C64};
use crate::mode_solver::{sample_te_modes, ModeSet, SlabGeometry};

/// Amplitudes of one guide's modes (at most two).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuideAmplitudes {
    pub centre: f64,
    pub width: f64,
    pub n_effs: Vec<f64>,
    pub amplitudes: Vec<C64>,
}

impl GuideAmplitudes {
    pub fn amplitude(&self, j: usize) -> C64 {
        self.amplitudes.get(j).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn power(&self, j: usize) -> f64 {
        self.amplitude(j).norm_sqr()
    }
}

/// Each disjoint core of the local cross-section treated as an isolated
/// three-layer guide.
pub fn local_guides(layout: &DeviceLayout, z: f64, filter: CoreFilter) -> Result<Vec<SlabGeometry>> {
    layout
        .union_at(z, true)
        .into_iter()
        .filter(|s| filter.keeps(0.5 * (s.left + s.right)))
        .map(|s| {
            SlabGeometry::symmetric(s.index, layout.background_index, s.right - s.left, layout.wavelength)
                .map(|g| g.shifted(0.5 * (s.left + s.right)))
        })
        .collect()
}

pub fn guide_modes(layout: &DeviceLayout, z: f64, field: &ComplexField, filter: CoreFilter) -> Result<Vec<ModeSet>> {
    local_guides(layout, z, filter)?.iter().map(|g| sample_te_modes(g, field.grid(), 2)).collect()
}

pub fn decompose(layout: &DeviceLayout, z: f64, field: &ComplexField, filter: CoreFilter) -> Result<Vec<GuideAmplitudes>> {
    let sets = guide_modes(layout, z, field, filter)?;
    sets.iter()
        .map(|set| {
            let amplitudes = set.modes.iter().map(|m| overlap(&m.profile, field)).collect::<Result<Vec<_>>>()?;
            Ok(GuideAmplitudes {
                centre: set.geometry.center(),
                width: set.geometry.span().1 - set.geometry.span().0,
                n_effs: set.modes.iter().map(|m| m.n_eff).collect(),
                amplitudes,
            })
        })
        .collect()
}
