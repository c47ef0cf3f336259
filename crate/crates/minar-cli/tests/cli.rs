//! End-to-end tests of the `minar` binary: exit-code contract, file formats,
//! reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_minar"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SET1: &str = r#""p": [[0.25, 0.05], [0.1, 0.4]], "lambda1": 5.0, "lambda2": 3.0, "phi": 1.0"#;

fn simulate_series(dir: &Path, steps: usize, seed: u64) -> PathBuf {
    let config = write_config(
        dir,
        &format!("sim_{steps}_{seed}.json"),
        &format!(r#"{{{SET1}, "steps": {steps}, "n0": [7, 6], "seed": {seed}}}"#),
    );
    let out = dir.join(format!("series_{steps}_{seed}.csv"));
    let res = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", stderr(&res));
    out
}

#[test]
fn simulate_writes_reproducible_csv_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "sim.json",
        &format!(r#"{{{SET1}, "steps": 100, "seed": 7}}"#),
    );
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let res = bin()
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert!(res.status.success(), "{}", stderr(&res));
        // effective config echoed as JSON
        let echoed: serde_json::Value = serde_json::from_str(&stdout(&res)).unwrap();
        assert_eq!(echoed["steps"], 100);
        assert_eq!(echoed["seed"], 7);
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 102); // header + initial row + 100 steps
    assert!(text.starts_with("t,series_1,series_2\n0,"));
}

#[test]
fn simulate_zero_steps_gives_initial_row_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate_series(dir.path(), 0, 3);
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn simulate_nonstationary_warns_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "ns.json",
        r#"{"p": [[0.9, 0.9], [0.9, 0.9]], "lambda1": 1.0, "lambda2": 1.0, "phi": 0.0,
            "steps": 5, "seed": 1}"#,
    );
    let out = dir.path().join("ns.csv");
    let res = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success());
    assert!(stderr(&res).contains("nonstationary"), "{}", stderr(&res));
}

#[test]
fn fit_emits_estimates_summary_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let series = simulate_series(dir.path(), 2000, 11);
    let out = dir.path().join("fit.json");
    let res = bin()
        .args(["fit", "--input"])
        .arg(&series)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", stderr(&res));
    let text = stdout(&res);
    assert!(text.contains("p11"), "{text}");
    assert!(text.contains("LRT (over diag.)"), "{text}");
    assert!(text.contains("Uncond. mean (#1)"), "{text}");
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(fit["model"], "full-binar");
    assert_eq!(fit["params"].as_array().unwrap().len(), 7);
    for p in fit["params"].as_array().unwrap() {
        assert!(p["std_error"].as_f64().unwrap() > 0.0, "{p}");
    }
}

#[test]
fn fit_rejects_short_series_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let series = simulate_series(dir.path(), 10, 1);
    let res = bin()
        .args(["fit", "--input"])
        .arg(&series)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("too short"), "{}", stderr(&res));
}

#[test]
fn fit_flags_nonconvergence_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let series = simulate_series(dir.path(), 500, 5);
    let config = write_config(
        dir.path(),
        "tiny_budget.json",
        r#"{"model": "diagonal-binar",
            "fit": {"optim": {"max_evaluations": 8}, "compute_std_errors": false}}"#,
    );
    let res = bin()
        .args(["fit", "--input"])
        .arg(&series)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2), "{}", stderr(&res));
}

#[test]
fn ladder_reports_four_tests() {
    let dir = tempfile::tempdir().unwrap();
    let series = simulate_series(dir.path(), 1500, 13);
    let out = dir.path().join("ladder.json");
    let res = bin()
        .args(["ladder", "--input"])
        .arg(&series)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", stderr(&res));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["tests"].as_array().unwrap().len(), 4);
    assert_eq!(report["fits"].as_array().unwrap().len(), 5);
    // full-model truth: the INARs-vs-Poisson comparison is overwhelming
    assert_eq!(report["tests"][1]["significant"], true);
    // companion CSV of the four comparisons
    let csv = std::fs::read_to_string(dir.path().join("ladder_tests.csv")).unwrap();
    assert!(csv.starts_with("test,statistic,df,p_value,threshold,significant"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn moments_reports_model_implied_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "moments.json",
        r#"{"p": [[0.0817, 0.0280], [0.1060, 0.1552]],
            "lambda1": 0.1620, "lambda2": 0.4261, "phi": 0.0269}"#,
    );
    let res = bin()
        .args(["moments", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", stderr(&res));
    let report: serde_json::Value = serde_json::from_str(&stdout(&res)).unwrap();
    assert!((report["mean_n1"].as_f64().unwrap() - 0.1926).abs() < 2e-4);
    assert!((report["cor_n1_n1_lag1"].as_f64().unwrap() - 0.086).abs() < 2e-3);
    assert!((report["cor_n1_n2_lag1"].as_f64().unwrap() - 0.055).abs() < 2e-3);
}

#[test]
fn granger_classifies_diagonal_truth_as_independent() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "diag.json",
        r#"{"p": [[0.3, 0.0], [0.0, 0.25]], "lambda1": 1.0, "lambda2": 1.4, "phi": 0.0,
            "steps": 3000, "seed": 31}"#,
    );
    let series = dir.path().join("diag.csv");
    let res = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&series)
        .output()
        .unwrap();
    assert!(res.status.success());
    let out = dir.path().join("granger.json");
    let res = bin()
        .args(["granger", "--input"])
        .arg(&series)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", stderr(&res));
    assert!(stdout(&res).contains("independent"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["classification"], "independent");
    assert_eq!(report["lagged"]["diagonal"]["df"], 2);
    assert_eq!(report["instantaneous"]["df"], 1);
}

#[test]
fn forecast_reproduces_published_spot_value() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "fc.json",
        r#"{"p": [[0.0817, 0.0280], [0.1060, 0.1552]],
            "lambda1": 0.1620, "lambda2": 0.4261, "phi": 0.0269,
            "horizons": [1, 5]}"#,
    );
    let out = dir.path().join("forecast.csv");
    let res = bin()
        .args(["forecast", "--n0", "1,3", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", stderr(&res));
    let text = std::fs::read_to_string(&out).unwrap();
    let row1 = text.lines().nth(1).unwrap();
    let mean1: f64 = row1.split(',').nth(1).unwrap().parse().unwrap();
    assert!((mean1 - 0.3277).abs() < 5e-5, "{row1}");
}

#[test]
fn forecast_without_initial_counts_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "fc.json",
        &format!(r#"{{{SET1}, "horizons": [1]}}"#),
    );
    let res = bin()
        .args(["forecast", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("initial counts"));
}

#[test]
fn risk_grid_has_unit_first_row_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "risk.json",
        &format!(
            r#"{{{SET1}, "n0": [4, 2], "horizons": [1, 3], "thresholds": [0, 10, 25],
               "paths": 5000, "seed": 9}}"#
        ),
    );
    let run = |name: &str| {
        let out = dir.path().join(name);
        let res = bin()
            .args(["risk", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(res.status.success(), "{}", stderr(&res));
        out
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let text = std::fs::read_to_string(&a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,1,3");
    let first = lines.next().unwrap();
    assert_eq!(first, "0,1,1");
    // companion standard-error file exists and has the same shape
    let se = std::fs::read_to_string(dir.path().join("a_se.csv")).unwrap();
    assert_eq!(se.lines().count(), text.lines().count());
}

#[test]
fn study_emits_three_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "study.json",
        &format!(r#"{{{SET1}, "sizes": [60, 120], "replications": 3, "seed": 2}}"#),
    );
    let res = bin()
        .args(["study", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("study.csv"))
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", stderr(&res));
    let means = std::fs::read_to_string(dir.path().join("study_means.csv")).unwrap();
    assert!(means.starts_with("n,p11,p12,p21,p22,lambda1,lambda2,phi,excluded"));
    assert_eq!(means.lines().count(), 4); // header + 2 sizes + true row
    assert!(means.lines().last().unwrap().starts_with("true,"));
    let stdevs = std::fs::read_to_string(dir.path().join("study_stdevs.csv")).unwrap();
    assert_eq!(stdevs.lines().count(), 3);
    let raw = std::fs::read_to_string(dir.path().join("study_raw.csv")).unwrap();
    assert_eq!(raw.lines().count(), 1 + 6); // header + 2 sizes x 3 reps
}

#[test]
fn ingest_reproduces_hand_tallied_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "ingest.json",
        &format!(
            r#"{{"catalog": {:?}, "plates": {:?}, "window_hours": 24,
                "start": "2011-03-08T00:00:00Z", "end": "2011-03-13T00:00:00Z",
                "magnitude_band": {{"lo": 5.0, "hi": null}},
                "plate_pair": ["alpha", "wrap"]}}"#,
            fixture("mini_catalog.csv"),
            fixture("plates.json")
        ),
    );
    let out = dir.path().join("counts.csv");
    let res = bin()
        .args(["ingest", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", stderr(&res));
    let produced = std::fs::read(&out).unwrap();
    let expected = std::fs::read(fixture("expected_counts.csv")).unwrap();
    assert_eq!(produced, expected);
    let rejects = std::fs::read_to_string(dir.path().join("counts_rejects.csv")).unwrap();
    assert!(rejects.contains("latitude out of range"), "{rejects}");
    assert_eq!(rejects.lines().count(), 3); // header + 2 rejects
}

#[test]
fn ingest_band_split_mode_tallies_medium_and_large() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bands.json",
        &format!(
            r#"{{"catalog": {:?}, "plates": {:?}, "window_hours": 24,
                "start": "2011-03-08T00:00:00Z", "end": "2011-03-13T00:00:00Z",
                "plate": "alpha", "magnitude_split": {{"lo": 5.0, "mid": 6.0}}}}"#,
            fixture("mini_catalog.csv"),
            fixture("plates.json")
        ),
    );
    let out = dir.path().join("bands.csv");
    let res = bin()
        .args(["ingest", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", stderr(&res));
    let text = std::fs::read_to_string(&out).unwrap();
    let expected = "t,series_1,series_2\n\
                    2011-03-08T00:00:00Z,1,1\n\
                    2011-03-09T00:00:00Z,1,0\n\
                    2011-03-10T00:00:00Z,0,0\n\
                    2011-03-11T00:00:00Z,0,0\n\
                    2011-03-12T00:00:00Z,1,0\n";
    assert_eq!(text, expected);
}

#[test]
fn ingest_rejects_ambiguous_mode() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.json",
        &format!(
            r#"{{"catalog": {:?}, "plates": {:?}, "window_hours": 24,
                "start": "2011-03-08T00:00:00Z", "end": "2011-03-13T00:00:00Z"}}"#,
            fixture("mini_catalog.csv"),
            fixture("plates.json")
        ),
    );
    let res = bin()
        .args(["ingest", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("plate_pair"), "{}", stderr(&res));
}

#[test]
fn unknown_command_exits_64_with_usage() {
    let res = bin().arg("frobnicate").output().unwrap();
    assert_eq!(res.status.code(), Some(64));
    assert!(
        stderr(&res).to_lowercase().contains("usage"),
        "{}",
        stderr(&res)
    );
}

#[test]
fn missing_subcommand_is_usage_error() {
    let res = bin().output().unwrap();
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn unknown_flag_is_usage_error_not_unknown_command() {
    let res = bin().args(["simulate", "--bogus"]).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
}
