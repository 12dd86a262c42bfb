//! Layered scenario configuration: built-in defaults, then an optional
//! TOML file, then the output-directory variable, then command-line flags.

use std::path::{Path, PathBuf};

use modeqc_core::bpm::BpmConfig;
use modeqc_core::devices::{CnotParams, CouplerParams, Material, MziParams};
use modeqc_core::field::TransverseGrid;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "MODEQC_OUT";
/// Largest sweep grid.
pub const MAX_SWEEP_POINTS: usize = 10_000;

/// Transverse window `[-half_width, half_width]` sampled every `dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    pub dx: f64,
}

impl GridSpec {
    pub fn points(&self) -> usize {
        (2.0 * self.half_width / self.dx).round() as usize + 1
    }

    pub fn grid(&self) -> Result<TransverseGrid, CliError> {
        if !(self.half_width > 0.0 && self.dx > 0.0) || !(self.half_width / self.dx).is_finite() {
            return Err(CliError::Config(format!("grid {self:?} needs positive half_width and dx")));
        }
        TransverseGrid::centered(self.half_width, self.points()).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub modes: GridSpec,
    pub mzi: GridSpec,
    pub coupler: GridSpec,
    pub cnot: GridSpec,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            modes: GridSpec { half_width: 25.0, dx: 0.025 },
            mzi: GridSpec { half_width: 20.0, dx: 0.05 },
            coupler: GridSpec { half_width: 40.0, dx: 0.05 },
            cnot: GridSpec { half_width: 36.0, dx: 0.05 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesSettings {
    /// Guide width, μm.
    pub width: f64,
    /// Most modes to report.
    pub max_modes: usize,
}

/// Generic MZI gate. `not-gate` always targets π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSettings {
    /// Target differential arm phase, rad.
    pub phase: f64,
    /// Calibrate `mzi.delta_n` for `phase`; otherwise use it as given.
    pub calibrate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSettings {
    pub gap_min: f64,
    pub gap_max: f64,
    pub max_length: f64,
    /// Check the design by BPM.
    pub verify: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSettings {
    /// Replace the C-NOT couplers by a separator design within `design`'s gap range.
    pub design_coupler: bool,
    /// Calibrate the control power for a π cross-phase; otherwise use `power`.
    pub calibrate: bool,
    pub power: f64,
    pub probe_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    /// Scenario run at every point.
    pub scenario: String,
    /// Dotted configuration key varied over the grid, e.g. `mzi.delta_n`.
    pub parameter: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// Explicit values; replaces `start`/`stop`/`points` when non-empty.
    #[serde(default)]
    pub values: Vec<f64>,
    /// Worker threads; 0 uses every core.
    pub parallel: usize,
    /// Metric whose maxima are summarized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
}

impl SweepSettings {
    pub fn grid_values(&self) -> Vec<f64> {
        if !self.values.is_empty() {
            return self.values.clone();
        }
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + i as f64 * step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    /// Keep every n-th grid point in trajectory files.
    pub x_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub out_dir: PathBuf,
    /// Shuffles sweep execution order; outputs do not depend on it.
    pub seed: u64,
    pub material: Material,
    pub modes: ModesSettings,
    pub mzi: MziParams,
    pub coupler: CouplerParams,
    pub cnot: CnotParams,
    pub grids: Grids,
    pub bpm: BpmConfig,
    pub gate: GateSettings,
    pub design: DesignSettings,
    pub control: ControlSettings,
    pub sweep: SweepSettings,
    pub output: OutputSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: "modes".into(),
            out_dir: PathBuf::from("out"),
            seed: 0,
            material: Material::nominal(),
            modes: ModesSettings { width: 3.0, max_modes: 4 },
            mzi: MziParams::nominal(),
            coupler: CouplerParams::nominal(),
            cnot: CnotParams::nominal(),
            grids: Grids::default(),
            bpm: BpmConfig::default(),
            gate: GateSettings { phase: std::f64::consts::FRAC_PI_2, calibrate: true },
            design: DesignSettings { gap_min: 0.6, gap_max: 3.0, max_length: 5000.0, verify: true },
            control: ControlSettings { design_coupler: true, calibrate: true, power: 1.08, probe_power: 0.01 },
            sweep: SweepSettings {
                scenario: "dc-verify".into(),
                parameter: "coupler.parallel_length".into(),
                start: 623.0,
                stop: 1023.0,
                points: 21,
                values: Vec::new(),
                parallel: 0,
                metric: Some("bpm_cross_1".into()),
            },
            output: OutputSettings { x_stride: 4 },
        }
    }
}

impl ScenarioConfig {
    pub fn to_table(&self) -> Table {
        Table::try_from(self).expect("configuration serializes to TOML")
    }

    pub fn from_table(table: Table) -> Result<Self, CliError> {
        let config: Self = Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks shared by every scenario; scenarios add their own.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let m = &self.material;
        if !(m.n_core > m.n_clad && m.n_clad > 0.0 && m.wavelength > 0.0) {
            return bad(format!("material {m:?} must have n_core > n_clad > 0 and a positive wavelength"));
        }
        for (name, spec) in
            [("modes", self.grids.modes), ("mzi", self.grids.mzi), ("coupler", self.grids.coupler), ("cnot", self.grids.cnot)]
        {
            let grid = spec.grid().map_err(|e| CliError::Config(format!("grids.{name}: {e}")))?;
            if name != "modes" {
                self.bpm.validate(&grid).map_err(|e| CliError::Config(format!("bpm with grids.{name}: {e}")))?;
            }
        }
        if !(self.modes.width > 0.0) || self.modes.max_modes == 0 {
            return bad("modes.width must be positive and modes.max_modes at least 1".into());
        }
        let d = &self.design;
        if !(d.gap_min > 0.0 && d.gap_max > d.gap_min && d.max_length > 0.0) {
            return bad(format!("design range {d:?} is empty"));
        }
        let c = &self.control;
        if !(c.power >= 0.0 && c.probe_power > 0.0) {
            return bad("control.power must be >= 0 and control.probe_power > 0".into());
        }
        if self.output.x_stride == 0 {
            return bad("output.x_stride must be at least 1".into());
        }
        if !self.gate.phase.is_finite() {
            return bad("gate.phase must be finite".into());
        }
        Ok(())
    }
}

/// Overrides `base` with `top`, descending into tables.
pub fn merge(base: &mut Table, top: Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

/// Parses a `--set` right-hand side as a TOML literal, falling back to a bare string.
pub fn parse_literal(text: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

/// Sets dotted `key` in `table`, creating intermediate tables.
pub fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("malformed key `{key}`")));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut node = table;
    for part in parents {
        let entry = node.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = match entry {
            Value::Table(t) => t,
            _ => return Err(CliError::Config(format!("`{part}` in `{key}` is not a section"))),
        };
    }
    node.insert(last.to_string(), value);
    Ok(())
}

/// Looks up dotted `key`.
pub fn get_path<'a>(table: &'a Table, key: &str) -> Option<&'a Value> {
    let mut parts = key.split('.');
    let mut value = table.get(parts.next()?)?;
    for part in parts {
        value = value.as_table()?.get(part)?;
    }
    Some(value)
}

/// Numeric value for `key`, keeping the integer type of integer settings.
pub fn numeric_value(table: &Table, key: &str, x: f64) -> Result<Value, CliError> {
    match get_path(table, key) {
        Some(Value::Integer(_)) if x.fract() == 0.0 => Ok(Value::Integer(x as i64)),
        Some(Value::Integer(_)) => Err(CliError::Config(format!("`{key}` is an integer setting, got {x}"))),
        Some(Value::Float(_)) | None => Ok(Value::Float(x)),
        Some(other) => Err(CliError::Config(format!("`{key}` holds {}, not a number", other.type_str()))),
    }
}

/// Command-line layer.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config_file: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub sets: Vec<String>,
    pub parallel: Option<usize>,
}

/// Resolves the full layered configuration for `scenario`.
pub fn resolve(scenario: &str, overrides: &Overrides, env_out: Option<PathBuf>) -> Result<ScenarioConfig, CliError> {
    let mut table = ScenarioConfig::default().to_table();
    if let Some(path) = &overrides.config_file {
        merge(&mut table, read_file(path)?);
    }
    if let Some(dir) = env_out {
        table.insert("out_dir".into(), Value::String(dir.display().to_string()));
    }
    if let Some(dir) = &overrides.out_dir {
        table.insert("out_dir".into(), Value::String(dir.display().to_string()));
    }
    if let Some(n) = overrides.parallel {
        set_path(&mut table, "sweep.parallel", Value::Integer(n as i64))?;
    }
    for item in &overrides.sets {
        let (key, value) =
            item.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{item}`")))?;
        set_path(&mut table, key.trim(), parse_literal(value.trim()))?;
    }
    table.insert("scenario".into(), Value::String(scenario.to_string()));
    ScenarioConfig::from_table(table)
}

fn read_file(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
