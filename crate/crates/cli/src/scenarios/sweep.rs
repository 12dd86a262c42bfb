use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{get_path, numeric_value, set_path, ScenarioConfig, MAX_SWEEP_POINTS};
use crate::error::CliError;
use crate::report::Outcome;
use crate::scenario::{execute, Registry, RunContext, Scenario, REPORT_FILE};

pub const SWEEP_FILE: &str = "sweep.csv";

/// Runs another scenario over a grid of one numeric setting.
pub struct Sweep;

#[derive(Debug, Clone, Serialize)]
struct PointResult {
    value: f64,
    status: &'static str,
    passed: bool,
    columns: std::collections::BTreeMap<String, f64>,
    error: String,
}

fn point_dir(i: usize) -> String {
    format!("points/{i:05}")
}

fn run_point(registry: &Registry, base: &toml::Table, config: &ScenarioConfig, value: f64, dir: &Path) -> PointResult {
    let failed = |status, error: String| PointResult { value, status, passed: false, columns: Default::default(), error };
    let mut table = base.clone();
    table.insert("out_dir".into(), toml::Value::String(dir.display().to_string()));
    let point = numeric_value(&table, &config.sweep.parameter, value)
        .and_then(|v| set_path(&mut table, &config.sweep.parameter, v))
        .and_then(|_| ScenarioConfig::from_table(table));
    let point = match point {
        Ok(p) => p,
        Err(e) => return failed("invalid", e.to_string()),
    };
    match execute(registry, &point, dir, false) {
        Ok(ex) => match ex.error {
            Some(e) => failed("error", e.to_string()),
            None => PointResult {
                value,
                status: "ok",
                passed: ex.report.passed,
                columns: ex.report.outcome().numeric_columns(),
                error: String::new(),
            },
        },
        Err(e) => failed(if matches!(e, CliError::Config(_)) { "invalid" } else { "error" }, e.to_string()),
    }
}

/// Indices of interior local maxima. NaN entries (failed points) are
/// skipped, so neighbours are the nearest valid samples.
pub fn interior_maxima(ys: &[f64]) -> Vec<usize> {
    let valid: Vec<(usize, f64)> = ys.iter().copied().enumerate().filter(|(_, y)| !y.is_nan()).collect();
    valid.windows(3).filter(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1).map(|w| w[1].0).collect()
}

impl Scenario for Sweep {
    fn name(&self) -> &'static str {
        "sweep"
    }

    fn summary(&self) -> &'static str {
        "run sweep.scenario over a grid of sweep.parameter, concurrently"
    }

    fn validate(&self, config: &ScenarioConfig, registry: &Registry) -> Result<(), CliError> {
        let s = &config.sweep;
        if s.scenario == self.name() {
            return Err(CliError::Config("a sweep cannot run another sweep".into()));
        }
        let inner = registry.lookup(&s.scenario)?;
        let values = s.grid_values();
        if values.is_empty() || values.len() > MAX_SWEEP_POINTS {
            return Err(CliError::Config(format!("sweep has {} points, allowed 1..={MAX_SWEEP_POINTS}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config("sweep values must be finite".into()));
        }
        let table = config.to_table();
        match get_path(&table, &s.parameter) {
            Some(toml::Value::Float(_)) | Some(toml::Value::Integer(_)) => {}
            Some(_) => return Err(CliError::Config(format!("sweep parameter `{}` is not numeric", s.parameter))),
            None => return Err(CliError::Config(format!("sweep parameter `{}` does not exist", s.parameter))),
        }
        if s.parameter.starts_with("sweep.") || s.parameter == "seed" {
            return Err(CliError::Config(format!("cannot sweep `{}`", s.parameter)));
        }
        let first = ScenarioConfig { scenario: s.scenario.clone(), ..config.clone() };
        if inner.derived_keys(&first).contains(&s.parameter.as_str()) {
            return Err(CliError::Config(format!(
                "`{}` computes `{}` itself; disable the calibration or design step to sweep it",
                s.scenario, s.parameter
            )));
        }
        inner.validate(&first, registry)
    }

    fn run(&self, config: &ScenarioConfig, ctx: &mut RunContext) -> Result<Outcome, CliError> {
        let s = &config.sweep;
        let values = s.grid_values();
        let mut base = config.to_table();
        base.insert("scenario".into(), toml::Value::String(s.scenario.clone()));
        let root = ctx.artifacts.dir().to_path_buf();

        // Execution order is shuffled; results are re-sorted by index below.
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(s.parallel)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        let registry = ctx.registry;
        let mut results: Vec<(usize, PointResult)> = pool.install(|| {
            order.par_iter().map(|&i| (i, run_point(registry, &base, config, values[i], &root.join(point_dir(i))))).collect()
        });
        results.sort_by_key(|r| r.0);

        let columns: BTreeSet<String> = results.iter().flat_map(|(_, r)| r.columns.keys().cloned()).collect();
        ctx.artifacts.file(SWEEP_FILE, |w| {
            let mut out = csv::Writer::from_writer(w);
            let mut header = vec!["index".to_string(), "value".into(), "status".into(), "passed".into()];
            header.extend(columns.iter().cloned());
            header.push("error".into());
            out.write_record(&header)?;
            for (i, r) in &results {
                let mut row = vec![i.to_string(), r.value.to_string(), r.status.to_string(), u8::from(r.passed).to_string()];
                row.extend(columns.iter().map(|c| r.columns.get(c).map_or(String::new(), |v| v.to_string())));
                row.push(r.error.clone());
                out.write_record(&row)?;
            }
            out.flush()?;
            Ok(())
        })?;
        for (i, r) in &results {
            if r.status != "invalid" {
                ctx.artifacts.record(format!("{}/{REPORT_FILE}", point_dir(*i)));
            }
        }

        let completed = results.iter().filter(|(_, r)| r.status == "ok").count();
        let mut o = Outcome::default();
        o.metric("points", values.len());
        o.metric("completed", completed);
        o.metric("passed", results.iter().filter(|(_, r)| r.passed).count());
        if let Some(metric) = &s.metric {
            let ys: Vec<f64> = results.iter().map(|(_, r)| r.columns.get(metric).copied().unwrap_or(f64::NAN)).collect();
            let best = ys.iter().enumerate().filter(|(_, y)| !y.is_nan()).max_by(|a, b| a.1.total_cmp(b.1));
            if let Some((i, y)) = best {
                o.metric("argmax_value", values[i]);
                o.metric("max", *y);
            }
            let interior: Vec<f64> = interior_maxima(&ys).into_iter().map(|i| values[i]).collect();
            o.metric("interior_maxima", interior);
        }
        o.equals("points_completed", completed as f64, values.len() as f64);
        Ok(o)
    }
}
