use std::path::Path;
use std::process::Command;

use serde_json::Value;
use tauwalk::cli::{emit_plot_data, execute, resolve, run, Cli, PlotKind, RunConfig, RunReport, Task};
use clap::Parser;

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> (i32, std::path::PathBuf) {
    let out = dir.join(name);
    let mut argv = vec!["tau-walk"];
    argv.extend_from_slice(args);
    argv.push("--out");
    argv.push(out.to_str().unwrap());
    (run(argv), out)
}

#[test]
fn exact_reports_normalization() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = run_to(dir.path(), "r.json", &["exact", "--steps", "3", "--rate", "1"]);
    assert_eq!(code, 0);
    let v = read_json(&out);
    assert_eq!(v["results"]["Z0"], "7");
    assert_eq!(v["config"]["command"], "exact");
    let probs: f64 = v["results"]["entries"].as_array().unwrap().iter().map(|e| e["probability"].as_f64().unwrap()).sum();
    assert!((probs - 1.0).abs() < 1e-12);

    let (code, out) = run_to(dir.path(), "r0.json", &["exact", "--steps", "0", "--rate", "1"]);
    assert_eq!(code, 0);
    assert_eq!(read_json(&out)["results"]["Z0"], "1");

    let (code, out) = run_to(dir.path(), "f.json", &["exact", "--steps", "3", "--rate", "0.5", "--precision", "float"]);
    assert_eq!(code, 0);
    assert!(read_json(&out)["results"]["Z0"].is_f64());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_to(dir.path(), "a.json", &["exact", "--steps", "3", "--rate", "-1"]).0, 2);
    assert_eq!(run_to(dir.path(), "b.json", &["exact", "--steps", "60"]).0, 3);
    assert_eq!(run_to(dir.path(), "c.json", &["nonsense"]).0, 2);
    assert_eq!(run_to(dir.path(), "d.json", &["gv", "--top", "3,x", "--bottom", "1,0"]).0, 2);
    assert_eq!(run_to(dir.path(), "e.json", &["gv", "--top", "20,1", "--bottom", "2,0"]).0, 0);
    assert_eq!(run_to(dir.path(), "f.json", &["layering", "--word", "3:0.5"]).0, 3);
    // CSV output only exists for shape and sample runs
    assert_eq!(run_to(dir.path(), "g.csv", &["exact", "--steps", "2"]).0, 2);
    assert!(!dir.path().join("a.json").exists());
}

#[test]
fn appendix_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = run_to(dir.path(), "app.json", &["check", "--suite", "appendix"]);
    assert_eq!(code, 0);
    let v = read_json(&out);
    assert!(v["results"]["max_error"].as_f64().unwrap() < 1e-6);
    let (code, _) = run_to(dir.path(), "id.json", &["check", "--suite", "identities"]);
    assert_eq!(code, 0);
}

#[test]
fn subcommand_payloads() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = run_to(dir.path(), "gv.json", &["gv", "--top", "3,1", "--bottom", "2,0"]);
    let v = read_json(&out);
    assert_eq!((v["results"]["determinant"].as_str(), v["results"]["path_count"].as_str()), (Some("3"), Some("3")));

    let (_, out) = run_to(dir.path(), "v.json", &["vicious", "--walkers", "1", "--steps", "2", "--start", "2", "--end", "2"]);
    let v = read_json(&out);
    assert_eq!(v["results"]["weight"], "2");
    assert_eq!((v["results"]["W_plus"].as_str(), v["results"]["W_minus"].as_str()), (Some("2"), Some("0")));

    let (_, out) = run_to(
        dir.path(),
        "vc.json",
        &["vicious", "--walkers", "1", "--steps", "2", "--start", "2", "--end", "2", "--contain", "1:3"],
    );
    assert_eq!(read_json(&out)["results"]["weight"], "1");

    let (_, out) = run_to(dir.path(), "ring.json", &["vicious", "--walkers", "2", "--steps", "2", "--start", "1,0", "--end", "1,0", "--ring", "2"]);
    let v = read_json(&out);
    assert!(v["results"]["W_minus"].is_string());

    let (_, out) = run_to(dir.path(), "s.json", &["schur", "eval", "--lambda", "2,1"]);
    assert_eq!(read_json(&out)["results"]["value"], "1/3");

    let (_, out) = run_to(dir.path(), "lay.json", &["layering", "--word", "1:0.3,3:0.5,2:0.3", "--start", "", "--cap", "6"]);
    let v = read_json(&out);
    assert_eq!(v["results"]["exact"], true);
    assert!(v["results"]["states"].as_array().unwrap().len() > 3);
}

#[test]
fn shape_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = run_to(dir.path(), "shape.csv", &["shape", "--steps", "200", "--rate", "1", "--mode-search", "--restarts", "2"]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h,sigma_predicted,sigma_mode"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.len() > 20);
    assert!(rows.iter().all(|r| r.len() == 3 && !r[2].is_empty()));
    // nine significant digits
    assert!(rows[1][1].contains('e') && rows[1][1].split('e').next().unwrap().len() == 10);
}

#[test]
fn plot_data_edge_cases() {
    let cli = Cli::parse_from(["tau-walk", "sample", "--steps", "4", "--samples", "10"]);
    let config = resolve(&cli).unwrap();
    let mut report = execute(&config).unwrap();
    let csv = emit_plot_data(&report, PlotKind::Histogram).unwrap();
    assert!(csv.starts_with("value,weight_sum\n"));
    report.results["length_histogram"] = Value::Array(vec![]);
    assert_eq!(emit_plot_data(&report, PlotKind::Histogram).unwrap(), "value,weight_sum\n");
    assert!(emit_plot_data(&report, PlotKind::Shape).is_err());
    let empty = RunReport { config, results: serde_json::json!({ "shape_series": { "h": [], "sigma_predicted": [], "sigma_mode": [] } }), wall_time_s: 0.0, diagnostics: Default::default() };
    assert_eq!(emit_plot_data(&empty, PlotKind::Shape).unwrap(), "h,sigma_predicted,sigma_mode\n");
}

#[test]
fn config_round_trip_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = run_to(dir.path(), "orig.json", &["vicious", "--walkers", "2", "--steps", "3", "--start", "3,1", "--end", "4,0", "--gauss", "0.25", "--avoid", "1:2"]);
    let report = read_json(&out);
    let config: RunConfig = serde_json::from_value(report["config"].clone()).unwrap();
    assert!(matches!(config.task, Task::Vicious { .. }));
    let again: RunConfig = serde_json::from_str(&serde_json::to_string(&config).unwrap()).unwrap();
    assert_eq!(again, config);

    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string(&config).unwrap()).unwrap();
    let (code, replay) = run_to(dir.path(), "replay.json", &["--config", cfg_path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(read_json(&replay)["results"], report["results"]);
}

fn binary_results(args: &[&str], threads: &str) -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_tau-walk")).args(args).env("TAU_WALK_THREADS", threads).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    v["results"].clone()
}

#[test]
fn determinism_across_runs_and_threads() {
    let sample = ["sample", "--steps", "8", "--rate", "0.5", "--samples", "20000", "--seed", "42"];
    let a = binary_results(&sample, "1");
    let b = binary_results(&sample, "4");
    let c = binary_results(&sample, "4");
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(b, c);
    let shape = ["shape", "--steps", "120", "--mode-search", "--restarts", "4", "--seed", "7"];
    assert_eq!(binary_results(&shape, "1"), binary_results(&shape, "3"));

    let bad = Command::new(env!("CARGO_BIN_EXE_tau-walk")).args(["exact", "--steps", "2"]).env("TAU_WALK_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
