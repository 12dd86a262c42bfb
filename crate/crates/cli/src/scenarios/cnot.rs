use std::f64::consts::PI;

use modeqc_core::analysis::{design_cnot_coupler, run_cnot_at};
use modeqc_core::bpm::calibrate_control_power;
use modeqc_core::devices::build_cnot;

use super::write_propagation;
use crate::config::ScenarioConfig;
use crate::error::{invalid_config, CliError, Stage};
use crate::report::Outcome;
use crate::scenario::{Registry, RunContext, Scenario};

/// Kerr C-NOT truth table.
pub struct Cnot;

const TRUTH_TABLE_MIN: f64 = 0.9;
/// Target left alone when the control is |0>.
const IDLE_TARGET_MIN: f64 = 0.99;

impl Scenario for Cnot {
    fn name(&self) -> &'static str {
        "cnot"
    }

    fn summary(&self) -> &'static str {
        "calibrate the control power for a pi cross-phase and run the four basis inputs"
    }

    fn validate(&self, config: &ScenarioConfig, _: &Registry) -> Result<(), CliError> {
        invalid_config(build_cnot(&config.material, &config.cnot), "cnot").map(|_| ())
    }

    fn derived_keys(&self, config: &ScenarioConfig) -> Vec<&'static str> {
        let mut keys = Vec::new();
        if config.control.design_coupler {
            keys.extend(["cnot.coupler_gap", "cnot.coupler_length"]);
        }
        if config.control.calibrate {
            keys.push("control.power");
        }
        keys
    }

    fn run(&self, config: &ScenarioConfig, ctx: &mut RunContext) -> Result<Outcome, CliError> {
        let grid = config.grids.cnot.grid()?;
        let control = &config.control;
        let mut o = Outcome::default();
        let mut params = config.cnot;
        if control.design_coupler {
            let (tuned, design) = design_cnot_coupler(&config.material, &params, (config.design.gap_min, config.design.gap_max))
                .stage("coupler design")?;
            params = tuned;
            o.metric("design_residual", design.residual);
        }
        let power = if control.calibrate {
            let cal = calibrate_control_power(&config.material, &params, &grid, &config.bpm, PI, control.probe_power)
                .stage("control-power calibration")?;
            o.metric("calibrated_phase", cal.phase);
            cal.power
        } else {
            control.power
        };
        let (run, trajectories) =
            run_cnot_at(&config.material, &params, &grid, &config.bpm, power, control.probe_power).stage("C-NOT propagation")?;
        o.metric("coupler_gap", params.coupler_gap);
        o.metric("coupler_length", params.coupler_length);
        o.metric("control_power", power);
        for row in &run.rows {
            let tag = format!("c{}t{}", row.control_in, row.target_in);
            o.metric(&format!("fidelity_{tag}"), row.fidelity);
            o.metric(&format!("control_out_{tag}"), row.control_out);
            o.metric(&format!("target_out_{tag}"), row.target_out);
        }
        o.metric("min_fidelity", run.min_fidelity());
        o.metric("target_identity_fidelity", run.target_gates[0].fidelity);
        o.metric("target_not_fidelity", run.target_gates[1].fidelity);
        o.above("truth_table_min_fidelity", run.min_fidelity(), TRUTH_TABLE_MIN);
        o.above("target_unchanged_for_control_0", run.target_gates[0].fidelity, IDLE_TARGET_MIN);

        let a = &mut ctx.artifacts;
        let rows: Vec<Vec<f64>> = run
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.control_in as f64,
                    r.target_in as f64,
                    r.control_out[0],
                    r.control_out[1],
                    r.target_out[0],
                    r.target_out[1],
                    r.fidelity,
                ]
            })
            .collect();
        let header = ["control_in", "target_in", "control_p0", "control_p1", "target_p0", "target_p1", "fidelity"];
        a.data_file("truth_table.csv", |w| crate::data::table(w, &header, &rows))?;
        if a.writes_data() {
            let refs: Vec<_> = trajectories.iter().collect();
            let labels: Vec<String> = run.rows.iter().map(|r| format!("|{}{}>", r.control_in, r.target_in)).collect();
            write_propagation(a, config, &refs, &labels)?;
        }
        Ok(o)
    }
}
