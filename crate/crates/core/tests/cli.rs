//! End-to-end tests of the `maxstop` binary: exit codes, artifact layout,
//! determinism, and corrupted-input detection.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const GOLDEN: &str = r#"{
  "model": {"model": "gbm", "mu": 0.0, "sigma": 0.31622776601683794, "r": 0.05},
  "payoffs": {"I": 1.0, "kappa": 2.0},
  "costs": {"family": "exponential", "rate": 1.0},
  "sim": {"n_paths": 5000, "dt": 0.001, "seed": 42, "start": [3.0, 9.0]}
}"#;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_maxstop")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

#[test]
fn solve_writes_artifacts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "golden.json", GOLDEN);
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    for out in [&out1, &out2] {
        let output = run(&[
            "solve",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    }
    let csv1 = std::fs::read(out1.join("golden/boundary.csv")).unwrap();
    let csv2 = std::fs::read(out2.join("golden/boundary.csv")).unwrap();
    assert_eq!(csv1, csv2, "boundary.csv differs between identical runs");

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("golden/summary.json")).unwrap())
            .unwrap();
    let m_low = summary["m_low"].as_f64().unwrap();
    let x_r = summary["x_R"].as_f64().unwrap();
    let m_xr = summary["m_xR"].as_f64().unwrap();
    assert!(x_r < m_low && m_low < m_xr, "{summary}");
    // header plus full-precision rows
    let text = String::from_utf8(csv1).unwrap();
    assert!(text.starts_with("# maxstop "));
    assert!(text.lines().nth(1).unwrap().starts_with("m,b,E,m_x"));
}

#[test]
fn invalid_configs_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    // drift above the discount rate
    let bad = write_config(
        dir.path(),
        "bad_mu.json",
        &GOLDEN.replace("\"mu\": 0.0", "\"mu\": 0.08"),
    );
    let output = run(&["solve", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("mu"));

    // multiplier at the excluded value
    let bad = write_config(
        dir.path(),
        "bad_kappa.json",
        &GOLDEN.replace("\"kappa\": 2.0", "\"kappa\": 1.0"),
    );
    let output = run(&["solve", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("kappa"));

    // unknown key
    let bad = write_config(
        dir.path(),
        "typo.json",
        &GOLDEN.replace("\"rate\": 1.0", "\"rate\": 1.0, \"rte\": 2.0"),
    );
    let output = run(&["solve", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn value_grid_and_domain_violation() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "golden.json", GOLDEN);
    let out = dir.path().join("out");
    // x > m is a domain error
    let output = run(&[
        "value",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--point",
        "5.0,3.0",
    ]);
    assert_eq!(output.status.code(), Some(2));

    // diagonal grid carries the initial-value column
    let output = run(&[
        "value",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--grid",
        "2.0:4.0:3,2.0:4.0:3",
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let text = std::fs::read_to_string(out.join("golden/values.csv")).unwrap();
    let mut diagonal_rows = 0;
    for line in text.lines().skip(2) {
        let cols: Vec<&str> = line.split(',').collect();
        let x: f64 = cols[0].parse().unwrap();
        let m: f64 = cols[1].parse().unwrap();
        let w: f64 = cols[3].parse().unwrap();
        assert!(w > 0.0);
        if x == m {
            let vbar: f64 = cols[6].parse().unwrap();
            assert!(vbar >= w, "V-bar below W on the diagonal");
            diagonal_rows += 1;
        } else {
            assert!(cols[6].is_empty());
        }
    }
    assert_eq!(diagonal_rows, 3);
}

#[test]
fn check_passes_and_detects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "golden.json", GOLDEN);
    let out = dir.path().join("out");
    let output = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let boundary_path = out.join("golden/boundary.csv");

    // the authentic boundary passes the fast suite
    let output = run(&[
        "check",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--boundary",
        boundary_path.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "{}\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("golden/check.json")).unwrap())
            .unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(true));

    // the full level adds Monte Carlo agreement (sized by the sim section)
    let output = run(&[
        "check",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--level",
        "full",
    ]);
    assert!(
        output.status.success(),
        "{}\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("golden/check.json")).unwrap())
            .unwrap();
    assert_eq!(report["level"], "full");
    assert_eq!(report["passed"], serde_json::Value::Bool(true));

    // perturb b by +5%: the pasting conditions must break
    let text = std::fs::read_to_string(&boundary_path).unwrap();
    let corrupted: String = text
        .lines()
        .map(|line| {
            if line.starts_with('#') || line.starts_with('m') {
                line.to_string()
            } else {
                let mut cols: Vec<String> = line.split(',').map(str::to_string).collect();
                let b: f64 = cols[1].parse().unwrap();
                cols[1] = format!("{:.16e}", b * 1.05);
                cols.join(",")
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let corrupted_path = dir.path().join("corrupted.csv");
    std::fs::write(&corrupted_path, corrupted).unwrap();
    let output = run(&[
        "check",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--boundary",
        corrupted_path.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        stdout.contains("FAIL smooth_fit_vertical") || stdout.contains("FAIL neumann"),
        "corruption not flagged by the pasting checks:\n{stdout}"
    );
}

#[test]
fn simulate_writes_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "golden.json", GOLDEN);
    let out = dir.path().join("out");
    let output = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let text = std::fs::read_to_string(out.join("golden/sim.csv")).unwrap();
    let row = text.lines().nth(2).unwrap();
    let cols: Vec<&str> = row.split(',').collect();
    let estimate: f64 = cols[0].parse().unwrap();
    let n_stopped: u64 = cols[2].parse().unwrap();
    let n_truncated: u64 = cols[3].parse().unwrap();
    assert!(estimate > 0.0);
    assert_eq!(n_stopped + n_truncated, 5000);
}

#[test]
fn compare_modes_and_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let fast_solver = GOLDEN.replace(
        "\"costs\"",
        "\"solver\": {\"min_grid_nodes\": 512}, \"costs\"",
    );
    let config_a = write_config(
        dir.path(),
        "lambda2.json",
        &fast_solver.replace("\"rate\": 1.0", "\"rate\": 2.0"),
    );
    let config_b = write_config(dir.path(), "lambda1.json", &fast_solver);
    let out = dir.path().join("out");
    let output = run(&[
        "compare",
        "--config",
        config_a.to_str().unwrap(),
        "--config-b",
        config_b.to_str().unwrap(),
        "--mode",
        "costs",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("lambda2/compare.json")).unwrap())
            .unwrap();
    assert_eq!(verdict["verdict"], "ordering_holds");

    // identical configs agree within tolerance
    let output = run(&[
        "compare",
        "--config",
        config_b.to_str().unwrap(),
        "--config-b",
        config_b.to_str().unwrap(),
        "--mode",
        "costs",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("lambda1/compare.json")).unwrap())
            .unwrap();
    assert_eq!(verdict["verdict"], "equal_within_tolerance");

    // hazards that cross are inconclusive (exit 2 per the contract)
    let lognormal = write_config(
        dir.path(),
        "lognormal.json",
        &fast_solver.replace(
            "{\"family\": \"exponential\", \"rate\": 1.0}",
            "{\"family\": \"lognormal\", \"location\": 0.0, \"scale\": 0.5}",
        ),
    );
    let output = run(&[
        "compare",
        "--config",
        config_b.to_str().unwrap(),
        "--config-b",
        lognormal.to_str().unwrap(),
        "--mode",
        "costs",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2), "{}", String::from_utf8_lossy(&output.stderr));
    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("lambda1/compare.json")).unwrap())
            .unwrap();
    assert_eq!(verdict["verdict"], "inconclusive");
}
