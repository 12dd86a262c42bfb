use modeqc_core::field::overlap;
use modeqc_core::mode_solver::{confinement_factor, eigen_residual, mode_count_oracle, solve_te_modes, v_number, SlabGeometry};

use crate::config::ScenarioConfig;
use crate::error::{invalid_config, CliError, Stage};
use crate::report::Outcome;
use crate::scenario::{RunContext, Scenario};

/// Guided TE modes of the configured slab.
pub struct Modes;

fn geometry(config: &ScenarioConfig) -> modeqc_core::Result<SlabGeometry> {
    let m = &config.material;
    SlabGeometry::symmetric(m.n_core, m.n_clad, config.modes.width, m.wavelength)
}

impl Scenario for Modes {
    fn name(&self) -> &'static str {
        "modes"
    }

    fn summary(&self) -> &'static str {
        "solve the guided TE modes of the dual-mode slab"
    }

    fn validate(&self, config: &ScenarioConfig, _: &crate::scenario::Registry) -> Result<(), CliError> {
        invalid_config(geometry(config), "slab").map(|_| ())
    }

    fn run(&self, config: &ScenarioConfig, ctx: &mut RunContext) -> Result<Outcome, CliError> {
        let m = &config.material;
        let geom = geometry(config).stage("slab geometry")?;
        let grid = config.grids.modes.grid()?;
        let modes = solve_te_modes(&geom, &grid, config.modes.max_modes).stage("mode solve")?;
        let oracle = mode_count_oracle(&geom).stage("mode-count oracle")?;

        let mut orthonormality = 0.0_f64;
        for i in 0..modes.len() {
            for j in 0..modes.len() {
                let o = overlap(&modes.mode(i).profile, &modes.mode(j).profile).stage("overlap")?;
                let expected = if i == j { 1.0 } else { 0.0 };
                orthonormality = orthonormality.max((o.norm() - expected).abs());
            }
        }
        let n_eff: Vec<f64> = (0..modes.len()).map(|j| modes.mode(j).n_eff).collect();
        let beta: Vec<f64> = (0..modes.len()).map(|j| modes.mode(j).beta).collect();
        let confinement: Vec<f64> = (0..modes.len()).map(|j| confinement_factor(modes.mode(j), &geom)).collect();
        let residual: Vec<f64> = (0..modes.len()).map(|j| eigen_residual(modes.mode(j), &geom)).collect();
        let margin = n_eff.iter().map(|&n| (n - m.n_clad).min(m.n_core - n)).fold(f64::INFINITY, f64::min);

        let mut o = Outcome::default();
        o.metric("mode_count", modes.len());
        o.metric("oracle_count", oracle);
        o.metric("v_number", v_number(m.n_core, m.n_clad, config.modes.width, m.wavelength));
        o.metric("n_eff", &n_eff);
        o.metric("beta", &beta);
        o.metric("confinement", &confinement);
        o.metric("residual", &residual);
        o.metric("orthonormality_error", orthonormality);
        o.equals("mode_count_matches_oracle", modes.len() as f64, oracle as f64);
        o.above("n_eff_inside_index_range", margin, 0.0);
        o.below("orthonormality_error", orthonormality, 1e-8);
        o.below("max_eigen_residual", residual.iter().copied().fold(0.0, f64::max), 1e-4);

        let a = &mut ctx.artifacts;
        a.data_file("modes.csv", |w| crate::data::mode_profiles(w, &geom, &modes))?;
        let rows: Vec<Vec<f64>> = (0..modes.len()).map(|j| vec![j as f64, n_eff[j], beta[j], confinement[j]]).collect();
        a.data_file("mode_table.csv", |w| crate::data::table(w, &["mode", "n_eff", "beta", "confinement"], &rows))?;
        let script = crate::plot::modes(modes.len());
        a.data_file("plot.gp", |w| Ok(w.write_all(script.as_bytes())?))?;
        Ok(o)
    }

    fn table(&self, outcome: &Outcome) -> Option<String> {
        let column = |name: &str| -> Vec<f64> {
            outcome.metrics.get(name).and_then(|v| serde_json::from_value(v.clone()).ok()).unwrap_or_default()
        };
        let (n, b, g) = (column("n_eff"), column("beta"), column("confinement"));
        let mut s = format!("{:>4}  {:>14}  {:>14}  {:>10}\n", "mode", "n_eff", "beta (1/um)", "Gamma");
        for j in 0..n.len() {
            s.push_str(&format!("{j:>4}  {:>14.10}  {:>14.10}  {:>10.6}\n", n[j], b[j], g[j]));
        }
        Some(s)
    }
}
