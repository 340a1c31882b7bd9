use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(rel)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_volterra-dispatch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_linear() {
    let dir = TempDir::new().unwrap();
    let (out, report) = (dir.path().join("x.csv"), dir.path().join("r.json"));
    let o = run(&[
        "solve",
        "--kernel",
        p(&data("kernels/three_band.json")),
        "--rhs",
        p(&data("rhs/banded_linear.csv")),
        "--out",
        p(&out),
        "--report",
        p(&report),
        "--quiet",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = json(&report);
    assert_eq!(r["status"], "ok");
    assert_eq!(r["n"], 16);
    assert_eq!(r["resampled_rhs"], false);
    assert!(r["max_node_residual"].as_f64().unwrap() < 1e-12);

    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x"));
    for line in lines {
        let (t, x) = line.split_once(',').unwrap();
        let (t, x): (f64, f64) = (t.parse().unwrap(), x.parse().unwrap());
        assert!((x - t).abs() < 1e-12);
    }
}

#[test]
fn solve_resamples_when_n_differs() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let o = run(&[
        "solve",
        "--kernel",
        p(&data("kernels/unit.json")),
        "--rhs",
        p(&data("rhs/banded_linear.csv")),
        "--n",
        "10",
        "--alpha",
        "0.01",
        "--report",
        p(&report),
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&report);
    assert_eq!(r["resampled_rhs"], true);
    assert_eq!(r["n"], 10);
    assert_eq!(r["alpha"], 0.01);
}

#[test]
fn solve_nonlinear_reports_trace() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let o = run(&[
        "solve",
        "--kernel",
        p(&data("kernels/unit.json")),
        "--rhs",
        p(&data("rhs/quartic.csv")),
        "--nonlinear",
        "--g",
        "cube",
        "--report",
        p(&report),
        "--quiet",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = json(&report);
    let nl = &r["nonlinear"];
    assert_eq!(nl["g"], "cube");
    assert_eq!(nl["trace"]["converged"], true);
    assert!(nl["initial_guess_warning"].is_string());
    assert!(r["max_node_residual"].as_f64().unwrap() < 1e-6);
    match nl["diagnostics"]["rate_estimate"].as_f64() {
        Some(rate) => assert!(rate < 1.0),
        None => assert!(nl["diagnostics_unavailable"].is_string()),
    }
}

#[test]
fn singular_step_report() {
    let dir = TempDir::new().unwrap();
    let kernel = dir.path().join("k.json");
    std::fs::write(
        &kernel,
        r#"{"T": 1, "segments": [{"value": 1}, {"value": 0}], "boundaries": [{"proportional": 0.5}]}"#,
    )
    .unwrap();
    let report = dir.path().join("r.json");
    let o = run(&[
        "solve",
        "--kernel",
        p(&kernel),
        "--rhs",
        p(&data("rhs/banded_linear.csv")),
        "--report",
        p(&report),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let r = json(&report);
    assert_eq!(r["status"], "error");
    assert_eq!(r["error"]["kind"], "singular-step");
    assert_eq!(r["error"]["step"], 2);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "timestamp,mw\n0,1\n1,2\n3,3\n").unwrap();
    let report = dir.path().join("r.json");
    let o = run(&[
        "dispatch",
        "--load",
        p(&bad),
        "--base",
        p(&bad),
        "--report",
        p(&report),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let r = json(&report);
    assert_eq!(r["error"]["kind"], "format");
    assert!(r["error"]["message"].as_str().unwrap().contains("row 3"));

    let o = run(&[
        "solve",
        "--kernel",
        "/nonexistent.json",
        "--rhs",
        p(&data("rhs/quartic.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "solve",
        "--kernel",
        p(&data("kernels/unit.json")),
        "--rhs",
        p(&data("rhs/quartic.csv")),
        "--alpha",
        "-1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "dispatch",
        "--load",
        p(&data("week/forecast.csv")),
        "--base",
        p(&data("week/base.csv")),
        "--alpha",
        "grid:0,0.5",
    ]);
    assert_eq!(o.status.code(), Some(2), "a grid needs a benchmark");
}

#[test]
fn nonlinear_divergence_exits_3() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let o = run(&[
        "solve",
        "--kernel",
        p(&data("kernels/unit.json")),
        "--rhs",
        p(&data("rhs/quartic.csv")),
        "--nonlinear",
        "--g",
        "cube",
        "--max-iter",
        "2",
        "--report",
        p(&report),
        "--quiet",
    ]);
    // two iterations cannot reach 1e-8: the run succeeds with a warning
    assert_eq!(o.status.code(), Some(0));
    let r = json(&report);
    assert_eq!(r["nonlinear"]["trace"]["max_iterations_hit"], true);
    assert!(r["nonlinear"]["diagnostics"].is_null());
    assert!(r["nonlinear"]["diagnostics_unavailable"].is_string());
}

#[test]
fn dispatch_grid_and_determinism() {
    let dir = TempDir::new().unwrap();
    let mut reports = Vec::new();
    for i in 0..2 {
        let report = dir.path().join(format!("r{i}.json"));
        let strategy = dir.path().join(format!("s{i}.csv"));
        let net = dir.path().join(format!("n{i}.csv"));
        let o = run(&[
            "dispatch",
            "--load",
            p(&data("week/forecast.csv")),
            "--base",
            p(&data("week/base.csv")),
            "--kernel",
            p(&data("kernels/three_band.json")),
            "--alpha",
            "grid:0,0.1,0.2,0.5,1,2",
            "--benchmark-load",
            p(&data("week/load.csv")),
            "--out-strategy",
            p(&strategy),
            "--out-net",
            p(&net),
            "--report",
            p(&report),
            "--quiet",
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        reports.push((
            std::fs::read(&report).unwrap(),
            std::fs::read(&strategy).unwrap(),
            std::fs::read(&net).unwrap(),
        ));
    }
    assert_eq!(reports[0], reports[1]);

    let r: Value = serde_json::from_slice(&reports[0].0).unwrap();
    for key in ["rmse", "mae", "chosen_alpha"] {
        assert!(r[key].is_number(), "missing {key}");
    }
    assert!(r["chosen_alpha"].as_f64().unwrap() > 0.0);
    assert_eq!(r["grid"].as_array().unwrap().len(), 6);
    assert!(r["mae"].as_f64().unwrap() <= r["rmse"].as_f64().unwrap());
    assert!(r["net_variance"].as_f64().unwrap() < r["load_variance"].as_f64().unwrap());
    let strategy = String::from_utf8(reports[0].1.clone()).unwrap();
    assert!(strategy.starts_with("timestamp,mw\n2016-04-25T00:00:00,"));
    assert_eq!(strategy.lines().count(), 170);
}

#[test]
fn forecast_scores() {
    let dir = TempDir::new().unwrap();
    let (history, actual, out) = (
        dir.path().join("h.csv"),
        dir.path().join("a.csv"),
        dir.path().join("f.csv"),
    );
    let wave = |k: usize| 1000.0 + [0.0, 50.0, 120.0, 80.0][k % 4];
    let write = |path: &Path, range: std::ops::Range<usize>| {
        let mut text = String::from("timestamp,mw\n");
        for k in range {
            text.push_str(&format!("{k},{}\n", wave(k)));
        }
        std::fs::write(path, text).unwrap();
    };
    write(&history, 0..48);
    write(&actual, 48..72);
    let o = run(&[
        "forecast",
        "--history",
        p(&history),
        "--horizon",
        "24",
        "--period",
        "4",
        "--out",
        p(&out),
        "--score-against",
        p(&actual),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "mae=0 rmse=0");
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 25);

    let o = run(&["forecast", "--history", p(&history), "--period", "100"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn convergence_report_table() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let o = run(&[
        "convergence-report",
        "--case",
        "banded-sin",
        "--n-list",
        "8,16,32",
        "--noise",
        "1e-3",
        "--seed",
        "5",
        "--report",
        p(&report),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("max error"));
    let r = json(&report);
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0]["observed_order"].is_null());
    let order = rows[2]["observed_order"].as_f64().unwrap();
    assert!((1.7..2.3).contains(&order), "{order}");
    assert_eq!(r["noise"]["seed"], 5);

    let o = run(&["convergence-report", "--case", "unknown"]);
    assert_eq!(o.status.code(), Some(2));
}
