//! Named scenarios behind a trait-object registry. Each CLI subcommand is one
//! registered scenario.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::report::{write_report, Artifacts, Outcome, RunReport};
use crate::scenarios;

pub const REPORT_FILE: &str = "report.json";

/// What a scenario gets while running.
pub struct RunContext<'a> {
    pub registry: &'a Registry,
    pub artifacts: Artifacts,
}

pub trait Scenario: Send + Sync {
    fn name(&self) -> &'static str;

    /// One line for `--help`.
    fn summary(&self) -> &'static str;

    /// Scenario-specific parameter checks, run before any computation.
    fn validate(&self, config: &ScenarioConfig, registry: &Registry) -> Result<(), CliError> {
        let _ = (config, registry);
        Ok(())
    }

    fn run(&self, config: &ScenarioConfig, ctx: &mut RunContext) -> Result<Outcome, CliError>;

    /// Settings the run replaces with computed values (calibrations,
    /// designs); sweeping them would have no effect.
    fn derived_keys(&self, config: &ScenarioConfig) -> Vec<&'static str> {
        let _ = config;
        Vec::new()
    }

    /// Optional human-readable table printed after the run.
    fn table(&self, outcome: &Outcome) -> Option<String> {
        let _ = outcome;
        None
    }
}

#[derive(Default)]
pub struct Registry {
    entries: BTreeMap<&'static str, Box<dyn Scenario>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding every built-in scenario.
    pub fn builtin() -> Self {
        let mut r = Self::new();
        for s in scenarios::builtin() {
            r.register(s).expect("built-in scenario names are unique");
        }
        r
    }

    pub fn register(&mut self, scenario: Box<dyn Scenario>) -> Result<(), CliError> {
        let name = scenario.name();
        if self.entries.contains_key(name) {
            return Err(CliError::Config(format!("scenario `{name}` registered twice")));
        }
        self.entries.insert(name, scenario);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&dyn Scenario> {
        self.entries.get(name).map(|b| b.as_ref())
    }

    pub fn lookup(&self, name: &str) -> Result<&dyn Scenario, CliError> {
        self.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.names().collect();
            CliError::Config(format!("unknown scenario `{name}`; known: {}", known.join(", ")))
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Scenario> {
        self.entries.values().map(|b| b.as_ref())
    }
}

/// Result of one execution; `error` is set when the run stopped early.
pub struct Execution {
    pub report: RunReport,
    pub error: Option<CliError>,
}

impl Execution {
    /// 0 when every check passed, 1 when one failed, 2 or 3 on errors.
    pub fn exit_code(&self) -> i32 {
        match &self.error {
            Some(e) => e.exit_code(),
            None if self.report.passed => 0,
            None => 1,
        }
    }
}

/// Runs `config.scenario` into `dir` and writes its report there. Data files
/// are written only when `data` is set.
pub fn execute(registry: &Registry, config: &ScenarioConfig, dir: &Path, data: bool) -> Result<Execution, CliError> {
    let scenario = registry.lookup(&config.scenario)?;
    config.validate()?;
    scenario.validate(config, registry)?;
    let start = Instant::now();
    let mut ctx = RunContext { registry, artifacts: Artifacts::new(dir, data)? };
    let result = scenario.run(config, &mut ctx);
    let elapsed = start.elapsed().as_secs_f64();
    let files = ctx.artifacts.files();
    let (report, error) = match result {
        Ok(outcome) => (RunReport::complete(config, outcome, files, elapsed), None),
        Err(e) => (RunReport::failed(config, &e, files, elapsed), Some(e)),
    };
    write_report(dir, REPORT_FILE, &report)?;
    Ok(Execution { report, error })
}

/// Runs the configured scenario into `config.out_dir`.
pub fn run_scenario(registry: &Registry, config: &ScenarioConfig) -> Result<Execution, CliError> {
    execute(registry, config, &config.out_dir, true)
}
