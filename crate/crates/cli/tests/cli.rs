use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn modeqc(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modeqc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove(modeqc_cli::config::OUT_ENV)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

/// Report with the fields that legitimately differ between runs removed.
fn comparable(dir: &Path) -> Value {
    let mut r = report(dir);
    let o = r.as_object_mut().unwrap();
    o.remove("duration_s");
    let config = o["config"].as_object_mut().unwrap();
    config.remove("out_dir");
    config.remove("seed");
    config["sweep"].as_object_mut().unwrap().remove("parallel");
    r
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn modes_reports_two_guided_modes() {
    let dir = tempfile::tempdir().unwrap();
    let out = modeqc(dir.path(), &["modes"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("PASS mode_count_matches_oracle"));
    let r = report(dir.path());
    assert_eq!(r["status"], "complete");
    assert_eq!(r["metrics"]["mode_count"], 2);
    for f in ["modes.csv", "mode_table.csv", "plot.gp"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn set_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("narrow.toml");
    fs::write(&file, "[modes]\nwidth = 1.0\n").unwrap();
    let file = file.to_str().unwrap();

    let narrow = dir.path().join("narrow");
    assert_eq!(modeqc(&narrow, &["modes", "--config", file]).status.code(), Some(0));
    assert_eq!(report(&narrow)["metrics"]["mode_count"], 1);

    let wide = dir.path().join("wide");
    assert_eq!(modeqc(&wide, &["modes", "--config", file, "--set", "modes.width=3.0"]).status.code(), Some(0));
    assert_eq!(report(&wide)["metrics"]["mode_count"], 2);
}

#[test]
fn out_dir_comes_from_environment_unless_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("env");
    let status =
        Command::new(env!("CARGO_BIN_EXE_modeqc")).arg("modes").env(modeqc_cli::config::OUT_ENV, &env_dir).status().unwrap();
    assert!(status.success());
    assert!(env_dir.join("report.json").is_file());

    let flag_dir = dir.path().join("flag");
    let status = Command::new(env!("CARGO_BIN_EXE_modeqc"))
        .args(["modes", "--out"])
        .arg(&flag_dir)
        .env(modeqc_cli::config::OUT_ENV, dir.path().join("unused"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(flag_dir.join("report.json").is_file());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_file = dir.path().join("bad.toml");
    fs::write(&bad_file, "[modes]\nwdith = 3.0\n").unwrap();
    let cases: [&[&str]; 5] = [
        &["modes", "--set", "modes.nonexistent=1"],
        &["modes", "--set", "modes.width"],
        &["modes", "--set", "modes.width=-3"],
        &["modes", "--config", bad_file.to_str().unwrap()],
        &["sweep", "--set", "sweep.parameter=mzi.delta_n", "--set", "sweep.scenario=not-gate"],
    ];
    for args in cases {
        let out = modeqc(&dir.path().join("x"), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn failed_checks_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = modeqc(dir.path(), &["not-gate", "--set", "gate.calibrate=false", "--set", "mzi.delta_n=0.0"]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).contains("FAIL conversion_0_to_1"));
    let r = report(dir.path());
    assert_eq!(r["status"], "complete");
    assert_eq!(r["passed"], false);
}

#[test]
fn numerical_errors_exit_with_3_and_leave_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = modeqc(dir.path(), &["dc-verify", "--set", "grids.coupler.half_width=12.0"]);
    assert_eq!(out.status.code(), Some(3), "{}", stdout(&out));
    let r = report(dir.path());
    assert_eq!(r["status"], "incomplete");
    assert!(r["error"]["message"].as_str().unwrap().contains("window"));
}

#[test]
fn sweeps_are_deterministic_across_seeds_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = [
        "sweep",
        "--set",
        "sweep.scenario=modes",
        "--set",
        "sweep.parameter=modes.width",
        "--set",
        "sweep.values=[1.0, 2.0, 3.0, 3.5, 6.0, 6.2]",
    ];
    let runs = [("a", "1", "1"), ("b", "3", "1"), ("c", "2", "99")];
    for (name, threads, seed) in runs {
        let mut args = sweep.to_vec();
        args.extend(["--parallel", threads, "--set"]);
        let seed = format!("seed={seed}");
        args.push(&seed);
        let out = modeqc(&dir.path().join(name), &args);
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    }
    let csv = |name: &str| fs::read(dir.path().join(name).join("sweep.csv")).unwrap();
    let point = |name: &str, i: usize| comparable(&dir.path().join(name).join(format!("points/{i:05}")));
    for name in ["b", "c"] {
        assert_eq!(csv("a"), csv(name));
        for i in 0..6 {
            assert_eq!(point("a", i), point(name, i), "point {i} of {name}");
        }
    }
    let r = report(&dir.path().join("a"));
    let counts: Vec<_> = (0..6).map(|i| point("a", i)["metrics"]["mode_count"].as_u64().unwrap()).collect();
    assert_eq!(counts, [1, 1, 2, 2, 3, 3]);
    assert_eq!(r["metrics"]["completed"], 6);
    // The point directory is recorded as each point's output directory.
    let p = report(&dir.path().join("a").join("points/00002"));
    assert!(p["config"]["out_dir"].as_str().unwrap().ends_with("points/00002"));
}

#[test]
fn single_point_sweep_matches_direct_run() {
    let dir = tempfile::tempdir().unwrap();
    let direct = dir.path().join("direct");
    assert_eq!(modeqc(&direct, &["dc-verify"]).status.code(), Some(0));
    let swept = dir.path().join("swept");
    let out = modeqc(&swept, &["sweep", "--set", "sweep.values=[823.0]"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let a = report(&direct);
    let b = report(&swept.join("points/00000"));
    assert_eq!(a["metrics"], b["metrics"]);
    assert_eq!(a["checks"], b["checks"]);
    // Data files are written only for direct runs.
    assert!(direct.join("trajectory.csv").is_file());
    assert_eq!(b["files"].as_array().unwrap().len(), 0);
}

fn column(dir: &Path, name: &str) -> Vec<(f64, f64)> {
    let mut reader = csv::Reader::from_path(dir.join("sweep.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == name).unwrap();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[1].parse().unwrap(), r[col].parse().unwrap_or(f64::NAN))
        })
        .collect()
}

#[test]
fn phase_shifter_sweep_has_one_interior_maximum() {
    let dir = tempfile::tempdir().unwrap();
    let out = modeqc(
        dir.path(),
        &[
            "sweep",
            "--set",
            "sweep.scenario=not-gate",
            "--set",
            "gate.calibrate=false",
            "--set",
            "sweep.parameter=mzi.delta_n",
            "--set",
            "sweep.start=0.0",
            "--set",
            "sweep.stop=0.002",
            "--set",
            "sweep.points=21",
            "--set",
            "sweep.metric=conversion_0",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let r = report(dir.path());
    let maxima = r["metrics"]["interior_maxima"].as_array().unwrap();
    assert_eq!(maxima.len(), 1, "{maxima:?}");
    // The calibrated Δn sits within one grid step of the sampled peak.
    let peak = maxima[0].as_f64().unwrap();
    assert!((peak - 7.3e-4).abs() <= 1e-4, "{peak}");
    let points = column(dir.path(), "conversion_0");
    assert!(points[0].1 < 0.05 && points[7].1 > 0.95, "{points:?}");
}

#[test]
fn coupler_length_sweep_peaks_where_coupled_mode_theory_predicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = modeqc(dir.path(), &["sweep"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let bpm = column(dir.path(), "bpm_cross_1");
    let predicted = column(dir.path(), "predicted_cross_1");
    let argmax = |v: &[(f64, f64)]| v.iter().copied().fold((f64::NAN, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let (l_bpm, p_bpm) = argmax(&bpm);
    let (l_cmt, _) = argmax(&predicted);
    println!("BPM peak {p_bpm:.4} at {l_bpm}, predicted peak at {l_cmt}");
    assert!((l_bpm - l_cmt).abs() <= 20.0);
    assert!(p_bpm > 0.9);
    let at = |v: &[(f64, f64)], l: f64| v.iter().find(|p| p.0 == l).unwrap().1;
    assert!((at(&bpm, 823.0) - at(&predicted, 823.0)).abs() < 0.05);
}
