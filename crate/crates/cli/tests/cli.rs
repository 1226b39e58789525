//! End-to-end tests of the `fpprace` binary: every subcommand is exercised
//! through a real process, checking exit codes, stdout/stderr contracts, and
//! the files written to the output directory.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fpprace"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn fpprace")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&read(path)).unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}

#[test]
fn generate_writes_single_edge() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "schema_version": 1,
            "degrees": {"kind": "explicit", "values": [1, 1]},
            "master_seed": 7
        }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&["generate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert_eq!(read(&out_dir.join("graph.edges")).trim(), "0 1");
    assert_eq!(read(&out_dir.join("degrees.txt")).trim(), "1\n1");
    let report = json(&out_dir.join("generate.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["resolved_config"]["subcommand"], "generate");
    assert_eq!(report["graph"]["n"], 2);
    assert_eq!(report["graph"]["edge_count"], 1);
}

#[test]
fn generate_simple_flag_yields_triangle() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "schema_version": 1,
            "degrees": {"kind": "explicit", "values": [2, 2, 2]},
            "master_seed": 11
        }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "generate",
        "--config",
        &cfg,
        "--simple",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let mut edges: Vec<(u32, u32)> = read(&out_dir.join("graph.edges"))
        .lines()
        .map(|l| {
            let mut it = l.split_whitespace().map(|x| x.parse::<u32>().unwrap());
            let (a, b) = (it.next().unwrap(), it.next().unwrap());
            (a.min(b), a.max(b))
        })
        .collect();
    edges.sort_unstable();
    assert_eq!(edges, vec![(0, 1), (0, 2), (1, 2)]);
    let report = json(&out_dir.join("generate.json"));
    assert_eq!(report["graph"]["is_simple"], true);
    assert_eq!(report["resolved_config"]["simple"], true);
}

#[test]
fn malformed_config_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version": 1, "master_seed": 3, "no_such_field": true}"#,
    );
    let out = run(&["generate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("schema"), "stderr was: {err}");

    let cfg = write_config(dir.path(), r#"{"schema_version": 99, "master_seed": 3}"#);
    let out = run(&["generate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("schema"), "stderr was: {}", stderr(&out));

    let cfg = write_config(dir.path(), "not json at all");
    let out = run(&["generate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("schema"), "stderr was: {}", stderr(&out));
}

#[test]
fn compete_on_two_leaves_gives_one_vertex_each() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "schema_version": 1,
            "degrees": {"kind": "explicit", "values": [1, 1]},
            "seeds": {"mode": "explicit", "v1": 0, "v2": 1},
            "master_seed": 5
        }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&["compete", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("n1=1 n2=1"), "stdout was: {}", stdout(&out));
    let report = json(&out_dir.join("outcome.json"));
    assert_eq!(report["outcome"]["n1"], 1);
    assert_eq!(report["outcome"]["n2"], 1);
    assert_eq!(report["resolved_config"]["seeds"]["mode"], "explicit");
    let traj = read(&out_dir.join("trajectory.csv"));
    assert!(traj.starts_with("k,t,s1,s2,m"), "header was: {traj}");
}

#[test]
fn compete_reruns_byte_identically() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let run_once = || -> (String, String) {
        let out = run(&[
            "compete",
            "--n",
            "500",
            "--seed",
            "42",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr(&out));
        (read(&out_dir.join("outcome.json")), read(&out_dir.join("trajectory.csv")))
    };
    let (json_a, csv_a) = run_once();
    let (json_b, csv_b) = run_once();
    assert_eq!(json_a, json_b);
    assert_eq!(csv_a, csv_b);
}

#[test]
fn nonpositive_rate_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "compete",
        "--n",
        "100",
        "--seed",
        "1",
        "--lambda2",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("invalid configuration"),
        "stderr was: {}",
        stderr(&out)
    );
}

#[test]
fn missing_master_seed_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let out = run(&["compete", "--n", "100", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("seed"), "stderr was: {}", stderr(&out));
}

#[test]
fn ensemble_writes_one_row_per_replica() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "ensemble",
        "--n",
        "300",
        "--seed",
        "9",
        "--replicas",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let csv = read(&out_dir.join("replicas.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "csv was: {csv}");
    assert!(lines[0].starts_with("replica,n,edges,"), "header was: {}", lines[0]);
    let report = json(&out_dir.join("report.json"));
    assert_eq!(report["report"]["rows"].as_array().unwrap().len(), 2);
    assert_eq!(report["resolved_config"]["replicas"], 2);
}

#[test]
fn ensemble_reruns_byte_identically() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let run_once = || -> (String, String) {
        let out = run(&[
            "ensemble",
            "--n",
            "300",
            "--seed",
            "17",
            "--replicas",
            "3",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr(&out));
        (read(&out_dir.join("report.json")), read(&out_dir.join("replicas.csv")))
    };
    assert_eq!(run_once(), run_once());
}

#[test]
fn ensemble_creates_missing_output_directories() {
    let dir = TempDir::new().unwrap();
    let nested = dir.path().join("a").join("b").join("c");
    let out = run(&[
        "ensemble",
        "--n",
        "200",
        "--seed",
        "4",
        "--replicas",
        "1",
        "--out",
        nested.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(nested.join("replicas.csv").is_file());
}

#[test]
fn uncreatable_output_directory_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let block = dir.path().join("block");
    fs::write(&block, "a file, not a directory").unwrap();
    let out = run(&[
        "ensemble",
        "--n",
        "200",
        "--seed",
        "4",
        "--replicas",
        "1",
        "--out",
        block.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
}

#[test]
fn simple_sampling_gives_up_after_max_attempts() {
    // Two vertices of degree 3 can never form a simple graph.
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "schema_version": 1,
            "degrees": {"kind": "explicit", "values": [3, 3]},
            "master_seed": 2,
            "simple": true,
            "max_simple_attempts": 8
        }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&["generate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("8"), "stderr was: {}", stderr(&out));
}

#[test]
fn branching_with_single_offspring_keeps_populations_constant() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "schema_version": 1,
            "master_seed": 13,
            "branching": {
                "mode": "trajectory",
                "a1": 3,
                "a2": 5,
                "offspring": {"1": 1.0},
                "t_end": 2.0
            }
        }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&["branching", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let csv = read(&out_dir.join("branching.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,b1,b2"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1], "3", "row was: {line}");
        assert_eq!(cols[2], "5", "row was: {line}");
    }
    let report = json(&out_dir.join("branching.json"));
    assert_eq!(report["resolved_config"]["branching"]["mode"], "trajectory");
    assert_eq!(report["final_state"]["b1"], 3);
    assert_eq!(report["final_state"]["b2"], 5);
}

#[test]
fn branching_v_mode_writes_one_fraction_per_line() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "branching",
        "--mode",
        "v",
        "--seed",
        "21",
        "--replicas",
        "50",
        "--t-probe",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let csv = read(&out_dir.join("v_samples.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("v"));
    let mut count = 0;
    for line in lines {
        let v: f64 = line.parse().unwrap_or_else(|e| panic!("parse {line}: {e}"));
        assert!((0.0..=1.0).contains(&v));
        count += 1;
    }
    let report = json(&out_dir.join("v_distribution.json"));
    let extinct = report["extinct_pairs"].as_u64().unwrap() as usize;
    assert_eq!(count + extinct, 50);
}

#[test]
fn branching_coupling_mode_reports_agreement() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "branching",
        "--mode",
        "coupling",
        "--n",
        "3000",
        "--seed",
        "33",
        "--replicas",
        "300",
        "--t-probe",
        "1.5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let report = json(&out_dir.join("coupling.json"));
    assert_eq!(report["report"]["diverged"], false);
    assert_eq!(report["report"]["replicas"], 300);
}

#[test]
fn verify_fast_passes_and_writes_report() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let report_path = out_dir.join("verify.json");
    let out = run(&["verify", "--level", "fast", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stdout: {}\nstderr: {}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("resolved_config:"), "stdout was: {text}");
    assert!(text.contains("verification fast"), "stdout was: {text}");
    assert!(!text.contains("FAIL"), "stdout was: {text}");
    let report = json(&report_path);
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().unwrap().len() >= 6);
}

#[test]
fn every_subcommand_echoes_the_resolved_config() {
    let dir = TempDir::new().unwrap();
    for sub in ["generate", "compete", "ensemble"] {
        let out_dir = dir.path().join(sub);
        let out = run(&[
            sub,
            "--n",
            "120",
            "--seed",
            "6",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{sub} stderr: {}", stderr(&out));
        let file = match sub {
            "generate" => "generate.json",
            "compete" => "outcome.json",
            _ => "report.json",
        };
        let report = json(&out_dir.join(file));
        let rc = &report["resolved_config"];
        assert_eq!(rc["subcommand"], sub);
        assert_eq!(rc["master_seed"], 6);
        assert_eq!(rc["lambda1"], 1.0);
        assert_eq!(rc["lambda2"], 1.0);
        assert!(rc["nu"].as_u64().is_some());
        assert!(rc["epsilon"].as_f64().is_some());
    }
}

#[test]
fn flags_override_config_values() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "schema_version": 1,
            "n": 400,
            "lambda2": 3.0,
            "master_seed": 50,
            "replicas": 4
        }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "ensemble",
        "--config",
        &cfg,
        "--lambda2",
        "2.0",
        "--replicas",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let report = json(&out_dir.join("report.json"));
    let rc = &report["resolved_config"];
    assert_eq!(rc["lambda2"], 2.0);
    assert_eq!(rc["replicas"], 2);
    assert_eq!(rc["degrees"]["kind"], "iid");
    assert_eq!(rc["degrees"]["n"], 400);
    assert_eq!(rc["master_seed"], 50);
}

#[test]
fn subcommand_mismatch_in_config_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version": 1, "subcommand": "ensemble", "master_seed": 8}"#,
    );
    let out = run(&["compete", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("subcommand"), "stderr was: {}", stderr(&out));
}
