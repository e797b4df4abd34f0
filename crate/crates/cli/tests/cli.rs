//! End-to-end runs of the `tsw` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn tsw(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsw"))
        .current_dir(dir)
        .env_remove("TSW_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = tsw(dir, args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(path).expect("readable output")
}

fn matrix(path: PathBuf) -> Vec<Vec<f64>> {
    read(path)
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn without_timings(manifest: &str) -> Value {
    let mut v: Value = serde_json::from_str(manifest).unwrap();
    v.as_object_mut().unwrap().remove("timings_ms");
    v
}

/// Small orbit dataset plus a quadtree ensemble over it.
fn pipeline(dir: &Path) {
    ok(dir, &["gen-orbits", "--per-class", "2", "--points", "30", "--seed", "5", "--out", "orbits.json"]);
    ok(dir, &["build-ensemble", "--input", "orbits.json", "--slices", "3", "--seed", "9", "--out", "ens.json"]);
}

#[test]
fn orbit_generation_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(p, &["gen-orbits", "--seed", "3", "--out", "a.json"]);
    ok(p, &["gen-orbits", "--seed", "3", "--out", "b.json"]);
    let a = read(p.join("a.json"));
    assert_eq!(a, read(p.join("b.json")));
    let clouds: Value = serde_json::from_str(&a).unwrap();
    let clouds = clouds.as_array().unwrap();
    assert_eq!(clouds.len(), 250);
    assert!(clouds.iter().all(|c| c["points"].as_array().unwrap().len() == 200));

    let ma = without_timings(&read(p.join("a.json.manifest.json")));
    let mb = without_timings(&read(p.join("b.json.manifest.json")));
    assert_eq!(ma["seed"], json!(3));
    assert_eq!(ma["outputs"]["a.json"], mb["outputs"]["b.json"]);
    assert_eq!(ma["config"], mb["config"]);
}

#[test]
fn usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    assert_eq!(code(&tsw(p, &["gen-orbits", "--per-class", "0", "--out", "x.json"])), 2);
    let bad_kind = tsw(p, &["build-ensemble", "--input", "x.json", "--kind", "octree", "--out", "e.json"]);
    assert_eq!(code(&bad_kind), 2);
    let msg = String::from_utf8_lossy(&bad_kind.stderr);
    assert!(msg.contains("quadtree") && msg.contains("cluster"), "{msg}");
    assert_eq!(code(&tsw(p, &["validate", "--suite", "everything"])), 2);
    assert_eq!(code(&tsw(p, &["gram", "--dist", "d.csv", "--bandwidth-quantile", "0", "--out", "k.csv"])), 2);
}

#[test]
fn missing_input_exits_four_with_path() {
    let dir = TempDir::new().unwrap();
    let out = tsw(dir.path(), &["build-ensemble", "--input", "absent.json", "--out", "e.json"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));
}

#[test]
fn single_slice_ensemble() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(p, &["gen-orbits", "--per-class", "1", "--points", "20", "--out", "o.json"]);
    ok(p, &["build-ensemble", "--input", "o.json", "--slices", "1", "--kind", "cluster", "--out", "e.json"]);
    let ens: Value = serde_json::from_str(&read(p.join("e.json"))).unwrap();
    assert_eq!(ens["trees"].as_array().unwrap().len(), 1);
    assert_eq!(ens["kind"], json!("cluster"));
}

#[test]
fn seven_point_quadtree_with_fixed_cube() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let pts = [[6.0, 6.0], [5.0, 3.0], [6.5, 3.5], [6.5, 2.5], [7.5, 2.5], [2.0, 2.0], [7.0, 1.0]];
    std::fs::write(p.join("pts.json"), json!([{ "label": 0, "points": pts }]).to_string()).unwrap();
    ok(
        p,
        &[
            "build-ensemble", "--input", "pts.json", "--slices", "1", "--growth", "0.45454545454545453",
            "--offsets", "0.8,0.4", "--out", "e.json",
        ],
    );
    let ens: Value = serde_json::from_str(&read(p.join("e.json"))).unwrap();
    let nodes = ens["trees"][0]["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 10);
    assert_eq!(nodes.iter().filter(|n| !n["parent"].is_null()).count(), 9);
}

#[test]
fn high_dimensional_quadtree_suggests_cluster_trees() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let cloud: Vec<Vec<f64>> = (0..3).map(|i| (0..21).map(|k| f64::from(i * k)).collect()).collect();
    std::fs::write(p.join("hi.json"), json!([{ "label": 0, "points": cloud }]).to_string()).unwrap();
    let out = tsw(p, &["build-ensemble", "--input", "hi.json", "--out", "e.json"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--kind cluster"));
    ok(p, &["build-ensemble", "--input", "hi.json", "--kind", "cluster", "--out", "e.json"]);
}

#[test]
fn tsw_matrix_is_symmetric_with_zero_diagonal_and_matches_tree_exact_ot() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    pipeline(p);
    ok(p, &["distances", "--ensemble", "ens.json", "--measures", "orbits.json", "--out", "tsw.csv"]);
    ok(
        p,
        &[
            "distances", "--ensemble", "ens.json", "--measures", "orbits.json", "--mode", "exact", "--ground",
            "tree", "--out", "exact.csv",
        ],
    );
    let (d, e) = (matrix(p.join("tsw.csv")), matrix(p.join("exact.csv")));
    assert_eq!(d.len(), 10);
    for i in 0..d.len() {
        assert_eq!(d[i][i], 0.0);
        for j in 0..d.len() {
            assert_eq!(d[i][j], d[j][i]);
            assert!((d[i][j] - e[i][j]).abs() <= 1e-9, "({i}, {j}): {} vs {}", d[i][j], e[i][j]);
        }
    }
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    pipeline(p);
    for (threads, out) in [("1", "one.csv"), ("4", "four.csv")] {
        ok(p, &["--threads", threads, "distances", "--ensemble", "ens.json", "--measures", "orbits.json", "--out", out]);
        ok(p, &["--threads", threads, "distances", "--measures", "orbits.json", "--mode", "sw", "--out", &format!("sw-{out}")]);
    }
    assert_eq!(read(p.join("one.csv")), read(p.join("four.csv")));
    assert_eq!(read(p.join("sw-one.csv")), read(p.join("sw-four.csv")));
}

#[test]
fn pair_list_and_size_guard() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    pipeline(p);
    std::fs::write(p.join("pairs.txt"), "0 1\n# comment\n3,2\n").unwrap();
    ok(
        p,
        &["distances", "--ensemble", "ens.json", "--measures", "orbits.json", "--pairs", "pairs.txt", "--out", "p.csv"],
    );
    let text = read(p.join("p.csv"));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "i,j,distance");
    assert!(lines[1].starts_with("0,1,") && lines[2].starts_with("3,2,"));

    let guarded = tsw(p, &["distances", "--measures", "orbits.json", "--mode", "exact", "--size-limit", "100", "--out", "x.csv"]);
    assert_eq!(code(&guarded), 3);
    assert!(String::from_utf8_lossy(&guarded.stderr).contains("limit"));
}

#[test]
fn gram_from_zero_and_tsw_distances() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    std::fs::write(p.join("zero.csv"), "id,a,b\na,0,0\nb,0,0\n").unwrap();
    ok(p, &["gram", "--dist", "zero.csv", "--out", "ones.csv"]);
    assert!(matrix(p.join("ones.csv")).iter().flatten().all(|&v| v == 1.0));
    assert_eq!(code(&tsw(p, &["gram", "--dist", "zero.csv", "--bandwidth-quantile", "10", "--out", "k.csv"])), 3);

    pipeline(p);
    ok(p, &["distances", "--ensemble", "ens.json", "--measures", "orbits.json", "--out", "d.csv"]);
    for q in ["none", "10", "20", "50"] {
        ok(p, &["gram", "--dist", "d.csv", "--bandwidth-quantile", q, "--out", "k.csv"]);
        let k = matrix(p.join("k.csv"));
        assert!((0..k.len()).all(|i| k[i][i] == 1.0));
        let m: Value = serde_json::from_str(&read(p.join("k.csv.manifest.json"))).unwrap();
        assert!(m["config"]["derived"]["min_eigenvalue"].as_f64().unwrap() >= -1e-8);
    }
}

#[test]
fn validation_suites_pass_and_report() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(p, &["validate", "--suite", "oracle", "--trials", "200", "--seed", "11", "--out", "oracle.json"]);
    let report: Value = serde_json::from_str(&read(p.join("oracle.json"))).unwrap();
    assert_eq!(report["passed"], json!(true));
    assert_eq!(report["reports"][0]["trials"], json!(200));

    let out = tsw(p, &["validate", "--suite", "nd", "--trials", "20"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = report["reports"][0]["checks"].as_array().unwrap();
    let control = checks.iter().find(|c| c["name"] == "negative_control_rejected").unwrap();
    assert_eq!(control["passed"], json!(true));
}
