use std::fs;
use std::path::Path;
use std::process::Command;

use binno::cli::{compare, run_experiment, run_from, DataSource, ExperimentConfig, Method, EXIT_OK, EXIT_USAGE};
use binno::data::{load_matrix_csv, SyntheticSpec};

fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("binno")
        .chain(list.iter().copied())
        .map(String::from)
        .collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_writes_expected_shapes_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert_eq!(
            run_from(args(&["generate", "--seed", "42", "--out", path_str(out)])),
            EXIT_OK
        );
    }
    let shapes = [("m.csv", (100, 80)), ("x_true.csv", (100, 5)), ("y_true.csv", (5, 80))];
    for (name, shape) in shapes {
        assert_eq!(load_matrix_csv(a.join(name)).unwrap().shape(), shape);
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
    let spec: SyntheticSpec = serde_json::from_str(&fs::read_to_string(a.join("spec.json")).unwrap()).unwrap();
    assert_eq!(spec, SyntheticSpec::default());
}

#[test]
fn generate_config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.json");
    fs::write(&cfg, r#"{"m": 12, "r": 2}"#).unwrap();
    let out = dir.path().join("out");
    let code = run_from(args(&[
        "generate",
        "--m",
        "30",
        "--n",
        "9",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&out),
    ]));
    assert_eq!(code, EXIT_OK);
    assert_eq!(load_matrix_csv(out.join("m.csv")).unwrap().shape(), (12, 9));
    assert_eq!(load_matrix_csv(out.join("x_true.csv")).unwrap().shape(), (12, 2));
}

#[test]
fn solve_writes_report_and_monotone_trace() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_from(args(&[
        "solve",
        "--method",
        "binno",
        "--data",
        "synthetic",
        "--out",
        path_str(dir.path()),
    ]));
    assert_eq!(code, EXIT_OK);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let iters = report["iterations"].as_u64().unwrap() as usize;
    assert!(report["metrics"]["relative_error"].as_f64().unwrap() <= 0.05);
    for key in ["psi1_trace", "psi2_trace", "alpha_trace", "beta_trace", "nu_trace"] {
        assert_eq!(report[key].as_array().unwrap().len(), iters, "{key}");
    }
    let mut rdr = csv::Reader::from_path(dir.path().join("trace.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["iteration", "psi1", "psi2", "alpha", "beta", "nu"]
    );
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), iters);
    for w in rows.windows(2) {
        assert!(binno::bilevel::within_descent(w[1][1], w[0][1]));
        assert!(binno::bilevel::within_descent(w[1][2], w[0][2]));
    }
}

#[test]
fn nmf_error_is_large_on_signed_data() {
    let config = ExperimentConfig {
        method: Method::Nmf,
        ..Default::default()
    };
    let out = run_experiment(&config).unwrap();
    assert!(out.report.metrics.unwrap().relative_error >= 0.5);
}

#[test]
fn single_iteration_run() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_from(args(&["solve", "--max-iters", "1", "--out", path_str(dir.path())]));
    assert_eq!(code, EXIT_OK);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["iterations"], 1);
    assert_eq!(report["converged"], false);
}

#[test]
fn summary_line_is_machine_parseable() {
    let out = run_experiment(&ExperimentConfig {
        method: Method::Palm,
        ..Default::default()
    })
    .unwrap();
    let line = out.summary_line();
    let fields: Vec<&str> = line.split(',').collect();
    assert_eq!(fields.len(), 4, "{line}");
    assert_eq!(fields[0], "palm");
    for f in &fields[1..] {
        f.trim().parse::<f64>().unwrap();
    }
}

#[test]
fn csv_data_source() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run_from(args(&[
            "generate",
            "--m",
            "20",
            "--n",
            "15",
            "--rank",
            "2",
            "--out",
            path_str(dir.path())
        ])),
        EXIT_OK
    );
    let config = ExperimentConfig {
        data: DataSource::Csv(dir.path().join("m.csv")),
        params: binno::SlrfParams {
            rank: 2,
            ..Default::default()
        },
        ..Default::default()
    };
    let out = run_experiment(&config).unwrap();
    assert!(out.failure.is_none());
    assert!(out.report.metrics.unwrap().relative_error < 0.5);
}

#[test]
fn compare_reports_mean_and_std() {
    let base = ExperimentConfig {
        data: DataSource::Synthetic(SyntheticSpec {
            m: 40,
            n: 30,
            r: 3,
            ..Default::default()
        }),
        params: binno::SlrfParams {
            rank: 3,
            ..Default::default()
        },
        ..Default::default()
    };
    let rows = compare(std::slice::from_ref(&base), 5).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].status, "ok");
    assert!(rows[0].err_std > 0.0 && rows[0].time_std > 0.0 && rows[0].psnr_std > 0.0);

    let nmf = ExperimentConfig {
        method: Method::Nmf,
        ..base
    };
    let rows = compare(&[ExperimentConfig::default(), nmf], 1).unwrap();
    assert_eq!(rows[0].method, "binno");
    assert_eq!(rows[1].method, "nmf");
    assert!(rows[0].err_mean < rows[1].err_mean);
}

#[test]
fn compare_command_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.csv");
    let code = run_from(args(&[
        "compare",
        "--method",
        "binno,nmf",
        "--repeats",
        "2",
        "--out",
        path_str(&out),
    ]));
    assert_eq!(code, EXIT_OK);
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        &headers[..7],
        [
            "method",
            "time_mean",
            "time_std",
            "err_mean",
            "err_std",
            "psnr_mean",
            "psnr_std"
        ]
    );
    assert_eq!(rdr.records().count(), 2);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    assert_eq!(run_from(args(&["compare", "--out", path_str(&out)])), EXIT_USAGE);
    assert_eq!(
        run_from(args(&[
            "solve",
            "--data",
            "synthetic",
            "--csv",
            "m.csv",
            "--out",
            path_str(dir.path())
        ])),
        EXIT_USAGE
    );
    assert_eq!(
        run_from(args(&[
            "solve",
            "--csv",
            "/nonexistent/m.csv",
            "--out",
            path_str(dir.path())
        ])),
        EXIT_USAGE
    );
    assert_eq!(run_from(args(&["frobnicate"])), EXIT_USAGE);
}

#[test]
fn binary_reports_unwritable_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_binno"))
        .args(["generate", "--out"])
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(!out.stderr.is_empty());
}
