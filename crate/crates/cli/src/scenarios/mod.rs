//! Built-in scenarios.

mod cnot;
mod coupler;
mod gate;
mod modes;
mod sweep;

use modeqc_core::bpm::FieldTrajectory;

use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::report::Artifacts;
use crate::scenario::Scenario;

pub use sweep::{interior_maxima, SWEEP_FILE};

pub fn builtin() -> Vec<Box<dyn Scenario>> {
    vec![
        Box::new(modes::Modes),
        Box::new(gate::Gate),
        Box::new(gate::NotGate),
        Box::new(coupler::DcDesign),
        Box::new(coupler::DcVerify),
        Box::new(cnot::Cnot),
        Box::new(sweep::Sweep),
    ]
}

/// Trajectory, modal-power and plot files shared by the propagation scenarios.
fn write_propagation(
    artifacts: &mut Artifacts,
    config: &ScenarioConfig,
    runs: &[&FieldTrajectory],
    labels: &[String],
) -> Result<(), CliError> {
    let stride = config.output.x_stride;
    artifacts.data_file("trajectory.csv", |w| crate::data::trajectories(w, runs, stride))?;
    artifacts.data_file("mode_powers.csv", |w| crate::data::mode_powers(w, runs))?;
    let channels = runs.first().map_or(0, |r| r.n_refs.len());
    let script = crate::plot::propagation(runs.len(), channels, labels);
    artifacts.data_file("plot.gp", |w| Ok(w.write_all(script.as_bytes())?))
}
