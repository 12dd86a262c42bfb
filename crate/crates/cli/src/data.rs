//! CSV data files. Floats use Rust's shortest round-trip form, so reports
//! can be recomputed from the files exactly.

use std::io::Write;

use modeqc_core::analysis::GateEstimate;
use modeqc_core::bpm::FieldTrajectory;
use modeqc_core::mode_solver::{ModeSet, SlabGeometry};

use crate::error::CliError;

fn writer(w: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::Writer::from_writer(w)
}

/// `run,channel,z,x,re,im,intensity` for every snapshot of every run.
pub fn trajectories(w: &mut dyn Write, runs: &[&FieldTrajectory], x_stride: usize) -> Result<(), CliError> {
    let mut out = writer(w);
    out.write_record(["run", "channel", "z", "x", "re", "im", "intensity"])?;
    for (r, run) in runs.iter().enumerate() {
        for snap in &run.snapshots {
            for (c, field) in snap.fields.iter().enumerate() {
                for (i, v) in field.samples().iter().enumerate().step_by(x_stride.max(1)) {
                    out.serialize((r, c, snap.z, run.grid.x(i), v.re, v.im, v.norm_sqr()))?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// `run,channel,z,guide,centre,p0,p1,rigorous` from the recorded decompositions.
pub fn mode_powers(w: &mut dyn Write, runs: &[&FieldTrajectory]) -> Result<(), CliError> {
    let mut out = writer(w);
    out.write_record(["run", "channel", "z", "guide", "centre", "p0", "p1", "rigorous"])?;
    for (r, run) in runs.iter().enumerate() {
        for sample in &run.mode_amplitudes {
            for (g, guide) in sample.guides.iter().enumerate() {
                out.serialize((
                    r,
                    sample.channel,
                    sample.z,
                    g,
                    guide.centre,
                    guide.power(0),
                    guide.power(1),
                    u8::from(sample.rigorous),
                ))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Estimated transfer matrix, raw and phase-aligned.
pub fn gate_matrix(w: &mut dyn Write, gate: &GateEstimate) -> Result<(), CliError> {
    let mut out = writer(w);
    out.write_record(["row", "col", "re", "im", "aligned_re", "aligned_im"])?;
    for r in 0..2 {
        for c in 0..2 {
            let (m, a) = (gate.matrix.m[r][c], gate.aligned.m[r][c]);
            out.serialize((r, c, m.re, m.im, a.re, a.im))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `x,n,psi_0,…` profiles of a mode set.
pub fn mode_profiles(w: &mut dyn Write, geometry: &SlabGeometry, modes: &ModeSet) -> Result<(), CliError> {
    let mut out = writer(w);
    let mut header = vec!["x".to_string(), "n".to_string()];
    header.extend((0..modes.len()).map(|j| format!("psi_{j}")));
    out.write_record(&header)?;
    let grid = modes.grid();
    for i in 0..grid.len() {
        let x = grid.x(i);
        let mut row = vec![x.to_string(), geometry.index_at(x).to_string()];
        row.extend((0..modes.len()).map(|j| modes.mode(j).profile.samples()[i].re.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Header plus rows of plain numbers.
pub fn table(w: &mut dyn Write, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut out = writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(row.iter().map(|v| v.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trips_floats() {
        let mut buf = Vec::new();
        let rows = vec![vec![0.1 + 0.2, 1e-300, -3.0]];
        table(&mut buf, &["a", "b", "c"], &rows).unwrap();
        let mut reader = csv::Reader::from_reader(buf.as_slice());
        let back: Vec<f64> = reader.records().next().unwrap().unwrap().iter().map(|s| s.parse().unwrap()).collect();
        assert_eq!(back, rows[0]);
    }
}
