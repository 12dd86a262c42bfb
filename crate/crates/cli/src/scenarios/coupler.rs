use modeqc_core::analysis::{run_coupler, run_separator, CouplerRun};
use modeqc_core::cmt::{design_separator_coupler, CouplerDesign, CouplerSearch};
use modeqc_core::devices::build_directional_coupler;

use super::write_propagation;
use crate::config::ScenarioConfig;
use crate::error::{invalid_config, CliError, Stage};
use crate::report::Outcome;
use crate::scenario::{Registry, RunContext, Scenario};

/// BPM through the configured coupler against the coupled-mode prediction.
pub struct DcVerify;

/// Separator design search, optionally verified by BPM.
pub struct DcDesign;

/// Largest BPM-vs-CMT cross-power difference.
const CMT_AGREEMENT: f64 = 0.05;
const SEPARATOR_EFFICIENCY_MIN: f64 = 0.9;
/// Phase residual of a converged design, rad.
const DESIGN_RESIDUAL_MAX: f64 = 1e-6;

fn search(config: &ScenarioConfig) -> CouplerSearch {
    CouplerSearch {
        gap_min: config.design.gap_min,
        gap_max: config.design.gap_max,
        far_gap: config.coupler.far_gap,
        separation_rate: 2.0 * config.coupler.slope,
        max_length: config.design.max_length,
    }
}

fn coupler_metrics(o: &mut Outcome, run: &CouplerRun) {
    o.metric("gap", run.params.gap);
    o.metric("parallel_length", run.params.parallel_length);
    o.metric("kappas", run.phases.kappas);
    o.metric("transition_phases", run.phases.transition);
    o.metric("total_phases", run.phases.total);
    o.metric("predicted_cross", run.predicted_cross);
    o.metric("bpm_cross", run.bpm_cross);
    o.metric("bpm_bar", run.bpm_bar);
    o.metric("max_deviation", run.max_deviation());
}

fn transfer_rows(run: &CouplerRun) -> Vec<Vec<f64>> {
    (0..2).map(|j| vec![j as f64, run.phases.total[j], run.predicted_cross[j], run.bpm_cross[j], run.bpm_bar[j]]).collect()
}

const TRANSFER_HEADER: [&str; 5] = ["mode", "theta", "predicted_cross", "bpm_cross", "bpm_bar"];

fn design_metrics(o: &mut Outcome, d: &CouplerDesign) {
    o.metric("design_gap", d.geometry.gap);
    o.metric("design_length", d.geometry.length);
    o.metric("design_orders", [d.m, d.n]);
    o.metric("design_phases", d.phases.total);
    o.metric("design_residual", d.residual);
}

impl Scenario for DcVerify {
    fn name(&self) -> &'static str {
        "dc-verify"
    }

    fn summary(&self) -> &'static str {
        "propagate both modes through the directional coupler and compare with coupled-mode theory"
    }

    fn validate(&self, config: &ScenarioConfig, _: &Registry) -> Result<(), CliError> {
        invalid_config(build_directional_coupler(&config.material, &config.coupler), "coupler").map(|_| ())
    }

    fn run(&self, config: &ScenarioConfig, ctx: &mut RunContext) -> Result<Outcome, CliError> {
        let grid = config.grids.coupler.grid()?;
        let (run, trajectories) =
            run_coupler(&config.material, &config.coupler, &grid, &config.bpm).stage("coupler propagation")?;
        let mut o = Outcome::default();
        coupler_metrics(&mut o, &run);
        o.below("bpm_vs_cmt_cross_power", run.max_deviation(), CMT_AGREEMENT);
        let a = &mut ctx.artifacts;
        let rows = transfer_rows(&run);
        a.data_file("transfer.csv", |w| crate::data::table(w, &TRANSFER_HEADER, &rows))?;
        if a.writes_data() {
            let refs: Vec<_> = trajectories.iter().collect();
            write_propagation(a, config, &refs, &["TE0 launch".into(), "TE1 launch".into()])?;
        }
        Ok(o)
    }
}

impl Scenario for DcDesign {
    fn name(&self) -> &'static str {
        "dc-design"
    }

    fn summary(&self) -> &'static str {
        "search a mode-separating coupler (TE0 stays, TE1 crosses) and check it by BPM"
    }

    fn validate(&self, config: &ScenarioConfig, _: &Registry) -> Result<(), CliError> {
        let s = search(config);
        if !(s.separation_rate > 0.0 && s.far_gap >= s.gap_max) {
            return Err(CliError::Config(format!(
                "coupler.far_gap must be at least design.gap_max and coupler.slope positive ({s:?})"
            )));
        }
        invalid_config(build_directional_coupler(&config.material, &config.coupler), "coupler").map(|_| ())
    }

    fn derived_keys(&self, _: &ScenarioConfig) -> Vec<&'static str> {
        vec!["coupler.gap", "coupler.parallel_length"]
    }

    fn run(&self, config: &ScenarioConfig, ctx: &mut RunContext) -> Result<Outcome, CliError> {
        let s = search(config);
        let c = &config.coupler;
        let mut o = Outcome::default();
        if !config.design.verify {
            let design = design_separator_coupler(&config.material.guide(c.width), &s).stage("separator design")?;
            design_metrics(&mut o, &design);
            o.below("design_residual", design.residual, DESIGN_RESIDUAL_MAX);
            return Ok(o);
        }
        let grid = config.grids.coupler.grid()?;
        let (report, trajectories) = run_separator(&config.material, c.width, c.slope, c.lead_length, &s, &grid, &config.bpm)
            .stage("separator design and propagation")?;
        design_metrics(&mut o, &report.design);
        coupler_metrics(&mut o, &report.run);
        o.metric("efficiency", report.efficiency);
        o.below("design_residual", report.design.residual, DESIGN_RESIDUAL_MAX);
        o.above("te0_kept_in_guide_1", report.efficiency[0], SEPARATOR_EFFICIENCY_MIN);
        o.above("te1_moved_to_guide_2", report.efficiency[1], SEPARATOR_EFFICIENCY_MIN);
        let a = &mut ctx.artifacts;
        let rows = transfer_rows(&report.run);
        a.data_file("transfer.csv", |w| crate::data::table(w, &TRANSFER_HEADER, &rows))?;
        if a.writes_data() {
            let refs: Vec<_> = trajectories.iter().collect();
            write_propagation(a, config, &refs, &["TE0 launch".into(), "TE1 launch".into()])?;
        }
        Ok(o)
    }
}
