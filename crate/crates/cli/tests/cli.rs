//! Command-line behaviour: exit codes, artifact layout, stream discipline.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cotrade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cotrade"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .canonicalize()
        .unwrap()
        .display()
        .to_string()
}

#[test]
fn missing_input_exits_with_ingest_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cotrade(&[
        "run",
        "--input",
        "/nonexistent/trades.csv",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(10));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest"));
}

#[test]
fn unknown_config_key_exits_with_ingest_code() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.cfg");
    std::fs::write(&config, "mystery = 1\n").unwrap();
    let out = cotrade(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(10));
}

#[test]
fn build_writes_graph_exports() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("g");
    let out = cotrade(&[
        "build",
        "--trades",
        &fixture("trades_200.csv"),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let edges = std::fs::read_to_string(out_dir.join("edges.csv")).unwrap();
    assert!(edges.starts_with("u,v,weight,firm\n"));
    assert_eq!(edges.lines().count(), 141); // header + 140 planted edges
    assert!(out_dir.join("graph.graphml").exists());
    assert!(out_dir.join("graph.json").exists());
}

#[test]
fn null_subcommand_writes_replicas_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("n");
    let out = cotrade(&[
        "null",
        "calibrated",
        "--trades",
        &fixture("trades_200.csv"),
        "--out",
        out_dir.to_str().unwrap(),
        "--replicas",
        "3",
        "--seed",
        "5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = out_dir.join("nulls/calibrated");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["model"], "calibrated");
    assert_eq!(manifest["seed"], 5);
    for replica in 0..3 {
        let csv =
            std::fs::read_to_string(dir.join(format!("replica_{replica:04}.csv"))).unwrap();
        assert!(csv.starts_with("insider_id,firm_id,date,direction\n"));
    }

    let out = cotrade(&[
        "null",
        "shuffle",
        "--trades",
        &fixture("trades_200.csv"),
        "--out",
        out_dir.to_str().unwrap(),
        "--replicas",
        "2",
        "--bin",
        "month",
    ]);
    assert!(out.status.success());
    assert!(out_dir.join("nulls/shuffle/replica_0001.csv").exists());
}

#[test]
fn analyze_centrality_prints_csv_to_stdout() {
    let out = cotrade(&[
        "analyze",
        "centrality",
        "--trades",
        &fixture("trades_200.csv"),
        "--measure",
        "closeness",
        "--top",
        "5",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("rank,insider_id,score,component_id\n"));
    assert_eq!(stdout.lines().count(), 6);
    // Progress went to stderr, not stdout.
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest:"));
}

#[test]
fn analyze_oddball_ranks_planted_cliques() {
    let out = cotrade(&[
        "analyze",
        "oddball",
        "--trades",
        &fixture("trades_200.csv"),
        "--law",
        "edpl",
        "--top",
        "3",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout
        .starts_with("rank,insider_id,outline,lof,combined,n_nodes,n_edges,total_weight,lambda_w\n"));
    assert_eq!(stdout.lines().count(), 4);
}

#[test]
fn unknown_measure_exits_with_analyze_code() {
    let out = cotrade(&[
        "analyze",
        "centrality",
        "--trades",
        &fixture("trades_200.csv"),
        "--measure",
        "pagerank",
    ]);
    assert_eq!(out.status.code(), Some(50));
}

#[test]
fn pair_score_reports_unknown_insiders() {
    let out = cotrade(&[
        "pair-score",
        "--trades",
        &fixture("trades_200.csv"),
        "--firm",
        "F00",
        "--a",
        "NOBODY",
        "--b",
        "P0_1",
    ]);
    assert_eq!(out.status.code(), Some(50));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NOBODY"));
}

#[test]
fn infeasible_calibration_exits_with_calibrate_code() {
    let out = cotrade(&["calibrate", "--alpha", "1e-300", "--min-trades", "1"]);
    assert_eq!(out.status.code(), Some(60));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no feasible threshold"));
}

#[test]
fn unknown_null_model_exits_with_stats_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cotrade(&[
        "stats",
        "--trades",
        &fixture("trades_200.csv"),
        "--out",
        tmp.path().to_str().unwrap(),
        "--replicas",
        "2",
        "--models",
        "bogus",
    ]);
    assert_eq!(out.status.code(), Some(40));
}

#[test]
fn stats_subcommand_writes_both_report_variants() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cotrade(&[
        "stats",
        "--trades",
        &fixture("trades_200.csv"),
        "--out",
        tmp.path().to_str().unwrap(),
        "--replicas",
        "3",
        "--seed",
        "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("stats.csv").exists());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("stats.json")).unwrap())
            .unwrap();
    assert_eq!(json["observed"]["nodes"], 40);
    assert!(json["models"]["calibrated"]["metrics"].is_array());
}

#[test]
fn calibrate_emits_reference_constants() {
    let out = cotrade(&["calibrate"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let tau = json["result"]["tau_star"].as_f64().unwrap();
    assert!((tau - 0.652).abs() < 0.005);
}

#[test]
fn run_respects_config_file_with_cli_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a: PathBuf = tmp.path().join("a");
    let config = tmp.path().join("run.cfg");
    std::fs::write(
        &config,
        format!(
            "input = {}\noutput = {}\nseed = 9\nreplicas = 2\n",
            fixture("trades_200.csv"),
            out_a.display(),
        ),
    )
    .unwrap();
    let out = cotrade(&["run", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let resolved = std::fs::read_to_string(out_a.join("config.resolved.txt")).unwrap();
    assert!(resolved.contains("seed = 9"));
    assert!(resolved.contains("replicas = 2"));

    // CLI flags override file values, and the override lands in the echo.
    let out_b = tmp.path().join("b");
    let out = cotrade(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
        "--seed",
        "11",
        "--replicas",
        "0",
    ]);
    assert!(out.status.success());
    let resolved = std::fs::read_to_string(out_b.join("config.resolved.txt")).unwrap();
    assert!(resolved.contains("seed = 11"));
    assert!(resolved.contains("replicas = 0"));
    // Null stages skipped: stats has the observed-only shape.
    let stats = std::fs::read_to_string(out_b.join("stats.csv")).unwrap();
    assert!(stats.lines().nth(1).unwrap().contains(",none,"));
}
