//! Trajectory export.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::FieldTrajectory;

/// Writes `z,x,re,im,intensity` rows for every snapshot of `channel`,
/// keeping every `x_stride`-th grid point.
pub fn write_trajectory_csv<W: Write>(
    trajectory: &FieldTrajectory,
    channel: usize,
    x_stride: usize,
    out: &mut W,
) -> io::Result<()> {
    writeln!(out, "z,x,re,im,intensity")?;
    let grid = trajectory.grid;
    for snap in &trajectory.snapshots {
        let field = &snap.fields[channel];
        for (i, v) in field.samples().iter().enumerate().step_by(x_stride.max(1)) {
            writeln!(out, "{},{},{},{},{}", snap.z, grid.x(i), v.re, v.im, v.norm_sqr())?;
        }
    }
    Ok(())
}

/// One row per recorded decomposition: mode powers of each guide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModePowerRow {
    pub z: f64,
    pub channel: usize,
    pub guide_centres: Vec<f64>,
    /// `[|C₀|², |C₁|²]` per guide.
    pub powers: Vec<[f64; 2]>,
    pub rigorous: bool,
}

/// Compact per-run summary suitable for JSON reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub z_end: f64,
    pub n_refs: Vec<f64>,
    pub initial_power: Vec<f64>,
    pub final_power: Vec<f64>,
    pub mode_powers: Vec<ModePowerRow>,
}

impl TrajectorySummary {
    pub fn from_trajectory(t: &FieldTrajectory) -> Self {
        let mode_powers = t
            .mode_amplitudes
            .iter()
            .map(|m| ModePowerRow {
                z: m.z,
                channel: m.channel,
                guide_centres: m.guides.iter().map(|g| g.centre).collect(),
                powers: m.guides.iter().map(|g| [g.power(0), g.power(1)]).collect(),
                rigorous: m.rigorous,
            })
            .collect();
        Self {
            z_end: t.z_end,
            n_refs: t.n_refs.clone(),
            initial_power: t.power_series.first().map(|p| p.1.clone()).unwrap_or_default(),
            final_power: t.power_series.last().map(|p| p.1.clone()).unwrap_or_default(),
            mode_powers,
        }
    }
}
