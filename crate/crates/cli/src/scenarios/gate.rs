use std::f64::consts::PI;

use modeqc_core::analysis::run_mzi;
use modeqc_core::bpm::calibrate_phase_shifter;
use modeqc_core::devices::{build_phase_shifter_mzi, MziParams};

use super::write_propagation;
use crate::config::ScenarioConfig;
use crate::error::{invalid_config, CliError, Stage};
use crate::report::Outcome;
use crate::scenario::{Registry, RunContext, Scenario};

/// MZI gate at `gate.phase`.
pub struct Gate;

/// The MZI tuned to a π arm phase.
pub struct NotGate;

const FIDELITY_MIN: f64 = 0.95;
const CONVERSION_MIN: f64 = 0.95;
/// Calibrated Δn window around the nominal 8e-4.
const DELTA_N_RANGE: (f64, f64) = (4e-4, 1.2e-3);

fn validate_mzi(config: &ScenarioConfig) -> Result<(), CliError> {
    invalid_config(build_phase_shifter_mzi(&config.material, &config.mzi), "mzi").map(|_| ())
}

fn calibrated_keys(config: &ScenarioConfig) -> Vec<&'static str> {
    if config.gate.calibrate {
        vec!["mzi.delta_n"]
    } else {
        Vec::new()
    }
}

/// Shared pipeline; returns the outcome and the Δn actually used.
fn run_gate(config: &ScenarioConfig, ctx: &mut RunContext, phase: f64) -> Result<(Outcome, f64), CliError> {
    let grid = config.grids.mzi.grid()?;
    let mut params: MziParams = config.mzi;
    let mut o = Outcome::default();
    if config.gate.calibrate {
        let cal =
            calibrate_phase_shifter(&config.material, &params, &grid, &config.bpm, phase).stage("phase-shifter calibration")?;
        params.delta_n = cal.delta_n;
        o.metric("calibrated_phase", cal.phase);
        o.metric("first_order_delta_n", cal.first_order_estimate);
        o.metric("arm_confinement", cal.confinement);
    }
    let (run, trajectories) = run_mzi(&config.material, &params, &grid, &config.bpm, phase).stage("MZI propagation")?;
    let g = &run.gate;
    o.metric("target_phase", phase);
    o.metric("delta_n", params.delta_n);
    o.metric("n_ref", run.n_ref);
    o.metric("conversion", run.conversion);
    o.metric("fidelity", g.fidelity);
    o.metric("basis_fidelities", g.basis_fidelities);
    o.metric("global_phase", g.global_phase);
    o.metric("unitarity_defect", g.unitarity_defect);
    o.metric("residual_fractions", g.residual_fractions);
    o.metric("flagged", g.flagged);
    o.above("gate_fidelity", g.fidelity, FIDELITY_MIN);

    let a = &mut ctx.artifacts;
    a.data_file("gate.csv", |w| crate::data::gate_matrix(w, g))?;
    if a.writes_data() {
        let labels = ["input |0>".to_string(), "input |1>".to_string()];
        write_propagation(a, config, &[&trajectories[0], &trajectories[1]], &labels)?;
    }
    Ok((o, params.delta_n))
}

impl Scenario for Gate {
    fn name(&self) -> &'static str {
        "gate"
    }

    fn summary(&self) -> &'static str {
        "calibrate the MZI shifter for gate.phase and estimate the realized gate"
    }

    fn validate(&self, config: &ScenarioConfig, _: &Registry) -> Result<(), CliError> {
        if config.gate.calibrate && !(config.gate.phase > 0.0 && config.gate.phase <= 2.0 * PI) {
            return Err(CliError::Config(format!("gate.phase {} must lie in (0, 2pi] to calibrate", config.gate.phase)));
        }
        validate_mzi(config)
    }

    fn derived_keys(&self, config: &ScenarioConfig) -> Vec<&'static str> {
        calibrated_keys(config)
    }

    fn run(&self, config: &ScenarioConfig, ctx: &mut RunContext) -> Result<Outcome, CliError> {
        Ok(run_gate(config, ctx, config.gate.phase)?.0)
    }
}

impl Scenario for NotGate {
    fn name(&self) -> &'static str {
        "not-gate"
    }

    fn summary(&self) -> &'static str {
        "calibrate a pi arm phase and check |0> <-> |1> conversion"
    }

    fn validate(&self, config: &ScenarioConfig, _: &Registry) -> Result<(), CliError> {
        validate_mzi(config)
    }

    fn derived_keys(&self, config: &ScenarioConfig) -> Vec<&'static str> {
        calibrated_keys(config)
    }

    fn run(&self, config: &ScenarioConfig, ctx: &mut RunContext) -> Result<Outcome, CliError> {
        let (mut o, delta_n) = run_gate(config, ctx, PI)?;
        let conversion: [f64; 2] = serde_json::from_value(o.metrics["conversion"].clone())?;
        o.above("conversion_0_to_1", conversion[0], CONVERSION_MIN);
        o.above("conversion_1_to_0", conversion[1], CONVERSION_MIN);
        if config.gate.calibrate {
            o.within("calibrated_delta_n", delta_n, DELTA_N_RANGE.0, DELTA_N_RANGE.1);
        }
        Ok(o)
    }
}
