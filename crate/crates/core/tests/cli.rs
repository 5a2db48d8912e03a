//! End-to-end runs of the `kflow` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn kflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json report")
}

const SINGLE_EDGE: &str = "p kflow 2 1 1\ne 1 2 5\nc 1 1 3\nd 1 1 -4\nd 1 2 4\n";

const PATH: &str = "p kflow 4 3 1\ne 1 2 2\ne 2 3 6\ne 3 4 3\n";

#[test]
fn gen_is_reproducible() {
    let args = ["gen", "--n", "6", "--m", "10", "--k", "2", "--seed", "9"];
    let a = kflow(&args);
    let b = kflow(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = kflow(&["gen", "--n", "6", "--m", "10", "--k", "2", "--seed", "10"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn gen_rejects_impossible_edge_count() {
    let out = kflow(&["gen", "--n", "3", "--m", "7", "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.txt");
    let sol = dir.path().join("sol.txt");
    let gen = kflow(&["gen", "--n", "5", "--m", "8", "--k", "2", "--seed", "4", "--out", s(&inst)]);
    assert!(gen.status.success());
    let solved = kflow(&["solve", s(&inst), "--eps", "1e-3", "--report", "json", "--solution", s(&sol)]);
    assert_eq!(solved.status.code(), Some(0));
    let report = json(&solved);
    assert_eq!(report["pass"], true);
    assert_eq!(report["instance"]["k"], 2);
    let verified = kflow(&["verify", s(&inst), s(&sol), "--eps", "1e-3", "--report", "json"]);
    assert_eq!(verified.status.code(), Some(0));
    let check = json(&verified);
    assert_eq!(check["pass"], true);
    let objective = check["check"]["objective"].as_f64().unwrap();
    assert!((objective - report["objective"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn single_edge_optimum_in_both_engines() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "one.txt", SINGLE_EDGE);
    for engine in ["direct", "maintained"] {
        let out = kflow(&["solve", s(&inst), "--eps", "1e-3", "--engine", engine, "--report", "json"]);
        assert_eq!(out.status.code(), Some(0), "{engine}");
        let obj = json(&out)["objective"].as_f64().unwrap();
        assert!((obj - 12.0).abs() <= 1e-3, "{engine}: {obj}");
    }
}

#[test]
fn text_report_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "one.txt", SINGLE_EDGE);
    let out = kflow(&["solve", s(&inst), "--eps", "1e-3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("objective ")));
    assert!(text.lines().any(|l| l == "pass true"));
    assert!(text.lines().all(|l| l.split_once(' ').is_some()));
}

#[test]
fn throughput_on_path() {
    // Pair 1→3 is limited by edge 1→2 (2 units), pair 2→4 by the rest of edge
    // 2→3 and by edge 3→4: 2 + 3 = 5.
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "path.txt", PATH);
    let sol = dir.path().join("sol.txt");
    let out = kflow(&[
        "solve", s(&inst), "--mode", "throughput", "--pairs", "1:3,2:4", "--eps", "1e-3", "--report", "json",
        "--solution", s(&sol),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let tp = json(&out)["throughput"].as_f64().unwrap();
    assert!((tp - 5.0).abs() <= 1e-3, "{tp}");
    let verified = kflow(&["verify", s(&inst), s(&sol), "--pairs", "1:3,2:4", "--eps", "1e-3"]);
    assert_eq!(verified.status.code(), Some(0));
    let missing_pairs = kflow(&["verify", s(&inst), s(&sol), "--eps", "1e-3"]);
    assert_eq!(missing_pairs.status.code(), Some(2));
}

#[test]
fn corrupted_flow_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "one.txt", SINGLE_EDGE);
    let sol = write(dir.path(), "sol.txt", "objective 9\nf 1 1 3\n");
    let out = kflow(&["verify", s(&inst), s(&sol), "--eps", "1e-3"]);
    assert_eq!(out.status.code(), Some(1));
    let sol = write(dir.path(), "good.txt", "objective 12\nf 1 1 4\n");
    let out = kflow(&["verify", s(&inst), s(&sol), "--eps", "1e-3"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn invalid_inputs_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let unbalanced = write(dir.path(), "u.txt", "p kflow 2 1 1\ne 1 2 5\nd 1 1 -4\nd 1 2 3\n");
    let out = kflow(&["solve", s(&unbalanced)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("commodity 1"));

    let garbled = write(dir.path(), "g.txt", "p kflow 2 1 1\ne 1 two 5\n");
    let out = kflow(&["solve", s(&garbled)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let inst = write(dir.path(), "path.txt", PATH);
    let out = kflow(&["solve", s(&inst), "--mode", "throughput", "--pairs", "1:9"]);
    assert_eq!(out.status.code(), Some(2));
    let out = kflow(&["solve", s(&inst), "--mode", "throughput", "--pairs", "2:2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = kflow(&["solve", s(&inst), "--bogus-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_instance_exits_with_3() {
    // Two commodities each need 2 units across an edge of capacity 3.
    let dir = tempfile::tempdir().unwrap();
    let inst = write(
        dir.path(),
        "inf.txt",
        "p kflow 3 2 2\ne 1 2 3\ne 2 3 3\nd 1 1 -2\nd 1 3 2\nd 2 1 -2\nd 2 3 2\n",
    );
    let out = kflow(&["solve", s(&inst), "--eps", "1e-3"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn iteration_cap_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "one.txt", SINGLE_EDGE);
    let out = kflow(&["solve", s(&inst), "--max-iters", "5"]);
    assert_eq!(out.status.code(), Some(3));
}
