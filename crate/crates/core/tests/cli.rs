//! The `fgs` binary end to end, through temporary directories.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fgs::cli::RunManifest;

fn fgs_cmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fgs")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = fgs_cmd(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_defaults_shape() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--vars", "100", "--out-dir", s(dir.path())]);
    let data = read(dir.path(), "data.tsv");
    let mut lines = data.lines();
    assert_eq!(lines.next().unwrap().split('\t').count(), 100);
    assert_eq!(lines.count(), 1000);
    assert_eq!(read(dir.path(), "true_dag.txt").lines().count(), 100);
    let manifest: RunManifest = serde_json::from_str(&read(dir.path(), "simulate_manifest.json")).unwrap();
    assert_eq!((manifest.vars, manifest.edges, manifest.seed), (Some(100), Some(100), Some(0)));
}

#[test]
fn simulate_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        ok(&["simulate", "--vars", "30", "--seed", "9", "--samples", "50", "--out-dir", s(d.path())]);
    }
    for f in ["data.tsv", "true_dag.txt", "true_pattern.txt"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn too_many_edges_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fgs_cmd(&["simulate", "--vars", "100", "--edges", "4951", "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("data.tsv").exists());
    ok(&["simulate", "--vars", "100", "--edges", "4950", "--samples", "5", "--out-dir", s(dir.path())]);
    assert_eq!(read(dir.path(), "true_dag.txt").lines().count(), 4950);
}

#[test]
fn single_edge_model_search() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--vars", "2", "--edges", "1", "--seed", "1", "--out-dir", s(dir.path())]);
    let data = dir.path().join("data.tsv");
    ok(&["search", "--in", s(&data), "--threads", "1"]);
    assert_eq!(read(dir.path(), "pattern.txt"), "X1 --- X2\n");
    assert_eq!(read(dir.path(), "true_pattern.txt"), "X1 --- X2\n");
}

#[test]
fn search_threads_do_not_change_output_and_manifest_records_penalty() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--vars", "80", "--seed", "3", "--out-dir", s(dir.path())]);
    let data = dir.path().join("data.tsv");
    let (one, four) = (dir.path().join("one"), dir.path().join("four"));
    for (d, t) in [(&one, "1"), (&four, "4")] {
        ok(&["search", "--in", s(&data), "--threads", t, "--penalty-discount", "4", "--out-dir", s(d)]);
    }
    assert_eq!(read(&one, "pattern.txt"), read(&four, "pattern.txt"));
    let manifest: RunManifest = serde_json::from_str(&read(&four, "search_manifest.json")).unwrap();
    assert_eq!(manifest.penalty_discount, Some(4.0));
    assert_eq!(manifest.threads, Some(4));
}

#[test]
fn eval_of_truth_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--vars", "20", "--seed", "2", "--out-dir", s(dir.path())]);
    let truth = dir.path().join("true_pattern.txt");
    let data = dir.path().join("data.tsv");
    let out = ok(&["eval", "--estimated", s(&truth), "--truth", s(&truth), "--data", s(&data)]);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[0], "20");
    assert_eq!(&row[2..], ["100.0"; 4]);
    // A DAG as truth is reduced to its pattern first.
    let dag = dir.path().join("true_dag.txt");
    let out = ok(&["eval", "--estimated", s(&truth), "--truth", s(&dag), "--data", s(&data)]);
    assert!(out.lines().nth(1).unwrap().ends_with("100.0\t100.0\t100.0\t100.0"));
}

#[test]
fn eval_reads_time_from_search_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--vars", "10", "--seed", "5", "--out-dir", s(dir.path())]);
    ok(&["search", "--in", s(&dir.path().join("data.tsv"))]);
    let manifest: RunManifest = serde_json::from_str(&read(dir.path(), "search_manifest.json")).unwrap();
    let out = ok(&[
        "eval",
        "--estimated",
        s(&dir.path().join("pattern.txt")),
        "--truth",
        s(&dir.path().join("true_pattern.txt")),
    ]);
    let header = out.lines().next().unwrap();
    assert_eq!(header, "vars\ttime_ms\tadj_prec\tadj_rec\tarrow_prec\tarrow_rec");
    let row: Vec<&str> = out.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[1], manifest.elapsed_ms.to_string());
}

#[test]
fn malformed_pattern_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "X1 --> X2\nX2 ==> X3\n").unwrap();
    let good = dir.path().join("good.txt");
    fs::write(&good, "X1 --> X2\n").unwrap();
    let out = fgs_cmd(&["eval", "--estimated", s(&bad), "--truth", s(&good)]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 2"), "{msg}");
}

#[test]
fn garbled_data_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.tsv");
    fs::write(&data, "X1\tX2\n1.0\t2.0\n3.0\tabc\n").unwrap();
    let out = fgs_cmd(&["search", "--in", s(&data)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn bench_rejects_zero_repeats() {
    assert_eq!(fgs_cmd(&["bench", "--vars-list", "10", "--repeats", "0"]).status.code(), Some(2));
    assert_eq!(fgs_cmd(&["search"]).status.code(), Some(2));
    assert_eq!(fgs_cmd(&["--help"]).status.code(), Some(0));
}

#[test]
fn bench_row_matches_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let bench = ok(&["bench", "--vars-list", "40", "--seed", "7", "--threads", "1"]);
    let bench_row: Vec<&str> = bench.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(bench.lines().next().unwrap(), "vars\ttime_min\tadj_prec\tadj_rec\tarrow_prec\tarrow_rec");

    ok(&["simulate", "--vars", "40", "--seed", "7", "--out-dir", s(dir.path())]);
    ok(&["search", "--in", s(&dir.path().join("data.tsv")), "--threads", "1"]);
    let eval = ok(&[
        "eval",
        "--estimated",
        s(&dir.path().join("pattern.txt")),
        "--truth",
        s(&dir.path().join("true_dag.txt")),
        "--data",
        s(&dir.path().join("data.tsv")),
    ]);
    let eval_row: Vec<&str> = eval.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(bench_row[0], eval_row[0]);
    assert_eq!(&bench_row[2..], &eval_row[2..]);
}
