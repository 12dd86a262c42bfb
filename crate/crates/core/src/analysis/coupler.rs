//! Directional coupler runs: BPM against the coupled-mode prediction, and the
//! designed mode separator.

use serde::{Deserialize, Serialize};

use crate::bpm::{decompose, guide_modes, propagate, BpmConfig, FieldTrajectory};
use crate::cmt::{coupler_phases, design_separator_coupler, CouplerDesign, CouplerGeometry, CouplerPhases, CouplerSearch};
use crate::devices::{build_directional_coupler, CoreFilter, CouplerParams, Material};
use crate::error::{Error, Result};
use crate::field::{power, TransverseGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplerRun {
    pub params: CouplerParams,
    pub phases: CouplerPhases,
    /// `sin²θ_j`: predicted fraction of mode `j` crossing to guide 2.
    pub predicted_cross: [f64; 2],
    /// BPM power in mode `j` of guide 2 (cross) and guide 1 (bar) for a
    /// unit-power mode `j` launched into guide 1.
    pub bpm_cross: [f64; 2],
    pub bpm_bar: [f64; 2],
}

impl CouplerRun {
    /// Largest `|BPM − prediction|` of the crossing power.
    pub fn max_deviation(&self) -> f64 {
        (0..2).map(|j| (self.bpm_cross[j] - self.predicted_cross[j]).abs()).fold(0.0, f64::max)
    }
}

pub fn coupler_geometry(p: &CouplerParams) -> CouplerGeometry {
    CouplerGeometry { gap: p.gap, length: p.parallel_length, far_gap: p.far_gap, separation_rate: 2.0 * p.slope }
}

/// Launches each mode of guide 1 (`x < 0`) and projects the output onto the
/// modes of both guides.
pub fn run_coupler(
    material: &Material,
    params: &CouplerParams,
    grid: &TransverseGrid,
    config: &BpmConfig,
) -> Result<(CouplerRun, Vec<FieldTrajectory>)> {
    let layout = build_directional_coupler(material, params)?;
    let phases = coupler_phases(&material.guide(params.width), &coupler_geometry(params))?;
    let predicted_cross = phases.total.map(|t| t.sin().powi(2));
    let lower = CoreFilter::Band { min: f64::NEG_INFINITY, max: 0.0 };
    let probe = crate::field::ComplexField::zeros(*grid);
    let sets = guide_modes(&layout, 0.0, &probe, lower)?;
    let inputs = sets
        .first()
        .filter(|s| s.len() == 2)
        .ok_or_else(|| Error::NoGuidedModes("coupler input guide must carry two modes".into()))?;
    let z_end = layout.total_length();
    let (mut bpm_cross, mut bpm_bar) = ([0.0; 2], [0.0; 2]);
    let mut runs = Vec::with_capacity(2);
    for j in 0..2 {
        let launch = &inputs.mode(j).profile;
        let run = propagate(&layout, std::slice::from_ref(launch), None, config, false)?;
        let guides = decompose(&layout, z_end, run.final_field(0), CoreFilter::All)?;
        if guides.len() != 2 {
            return Err(Error::Extraction(format!("expected two output guides, found {}", guides.len())));
        }
        let launched = power(launch);
        bpm_bar[j] = guides[0].power(j) / launched;
        bpm_cross[j] = guides[1].power(j) / launched;
        runs.push(run);
    }
    Ok((CouplerRun { params: *params, phases, predicted_cross, bpm_cross, bpm_bar }, runs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatorReport {
    pub design: CouplerDesign,
    pub run: CouplerRun,
    /// TE₀ kept in guide 1 and TE₁ moved to guide 2.
    pub efficiency: [f64; 2],
}

/// Designs a separator with transitions of lateral `slope` and verifies it
/// by BPM.
pub fn run_separator(
    material: &Material,
    width: f64,
    slope: f64,
    lead_length: f64,
    search: &CouplerSearch,
    grid: &TransverseGrid,
    config: &BpmConfig,
) -> Result<(SeparatorReport, Vec<FieldTrajectory>)> {
    if (search.separation_rate - 2.0 * slope).abs() > 1e-12 {
        return Err(Error::Geometry(format!(
            "separation rate {} must be twice the lateral slope {slope}",
            search.separation_rate
        )));
    }
    let design = design_separator_coupler(&material.guide(width), search)?;
    let params = CouplerParams {
        width,
        gap: design.geometry.gap,
        parallel_length: design.geometry.length,
        slope,
        far_gap: search.far_gap,
        lead_length,
    };
    let (run, runs) = run_coupler(material, &params, grid, config)?;
    let efficiency = [run.bpm_bar[0], run.bpm_cross[1]];
    Ok((SeparatorReport { design, run, efficiency }, runs))
}
