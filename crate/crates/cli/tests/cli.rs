use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ghlab::partition::Partition;
use ghlab::{Correspondence, FiniteMetricSpace};
use serde_json::Value;
use tempfile::TempDir;

const M346: &str = r#"{"n":3,"d":[[0,3,4],[3,0,6],[4,6,0]]}"#;
const PERTURBED_CSV: &str = "0,3.1,3.9\n3.1,0,6.05\n3.9,6.05,0\n";
const DOUBLED: &str = r#"{"n":4,"d":[[0,3,4,3],[3,0,6,0.05],[4,6,0,6],[3,0.05,6,0]]}"#;

fn ghlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghlab"))
        .args(args)
        .env_remove("GHLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

struct Files {
    dir: TempDir,
}

impl Files {
    fn new() -> Self {
        let f = Files {
            dir: tempfile::tempdir().unwrap(),
        };
        f.write("m.json", M346);
        f.write("x.csv", PERTURBED_CSV);
        f.write("doubled.json", DOUBLED);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> String {
        fs::write(self.path(name), text).unwrap();
        self.arg(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }
}

fn read_space(path: &Path) -> FiniteMetricSpace {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn ghd_of_identical_files_is_zero() {
    let f = Files::new();
    let m = f.arg("m.json");
    let out = ghlab(&["ghd", &m, &m]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["distance"], Value::from(0.0));
}

#[test]
fn ghd_reads_csv_and_agrees_with_bruteforce() {
    let f = Files::new();
    let out = ghlab(&["ghd", &f.arg("m.json"), &f.arg("x.csv"), "--bruteforce"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["distance"], v["bruteforce"]["distance"]);
    assert!((v["distance"].as_f64().unwrap() - 0.05).abs() < 1e-12);
}

#[test]
fn ghd_witness_round_trips() {
    let f = Files::new();
    let out_path = f.arg("ghd.json");
    let out = ghlab(&["ghd", &f.arg("m.json"), &f.arg("doubled.json"), "--out", &out_path]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    let w: Correspondence = serde_json::from_value(v["witness"].clone()).unwrap();
    assert_eq!(serde_json::to_value(&w).unwrap(), v["witness"]);
    assert_eq!((w.nx(), w.ny()), (3, 4));
}

#[test]
fn node_budget_exhaustion_is_a_precondition_error() {
    let f = Files::new();
    let out = ghlab(&["ghd", &f.arg("m.json"), &f.arg("doubled.json"), "--node-budget", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("node budget"));
}

#[test]
fn validate_and_diag() {
    let f = Files::new();
    let out = ghlab(&["validate", &f.arg("x.csv")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["n"], Value::from(3));

    let p = f.write("p.json", r#"{"n":1,"d":[[0]]}"#);
    let out = ghlab(&["diag", &p]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["diam"], Value::from(0.0));
    assert!(v["s"].is_null() && v["e"].is_null());
}

#[test]
fn malformed_inputs_exit_with_two() {
    let f = Files::new();
    let cases = [
        ("tri.json", r#"{"n":3,"d":[[0,1,5],[1,0,1],[5,1,0]]}"#),
        ("asym.json", r#"{"n":2,"d":[[0,1],[2,0]]}"#),
        ("size.json", r#"{"n":3,"d":[[0,1],[1,0]]}"#),
        ("garbage.json", "not json"),
        ("bad.csv", "0,1\n1,x\n"),
    ];
    for (name, text) in cases {
        let p = f.write(name, text);
        let out = ghlab(&["validate", &p]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(!out.stderr.is_empty());
    }
    let out = ghlab(&["validate", &f.arg("missing.json")]);
    assert_eq!(out.status.code(), Some(2));
    let out = ghlab(&["ghd", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tolerance_flag_admits_noise() {
    let f = Files::new();
    let p = f.write("noisy.json", r#"{"n":2,"d":[[0,1],[1.0000001,0]]}"#);
    assert_eq!(ghlab(&["validate", &p]).status.code(), Some(2));
    assert_eq!(ghlab(&["validate", &p, "--tol", "1e-6"]).status.code(), Some(0));
}

#[test]
fn geodesic_series_and_space_round_trip() {
    let f = Files::new();
    let csv = f.arg("series.csv");
    let out = ghlab(&[
        "geodesic",
        &f.arg("m.json"),
        &f.arg("x.csv"),
        "--grid",
        "5",
        "--csv",
        &csv,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["series"].as_array().unwrap().len(), 5);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,diam,gh_to_point");
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[1], "0,6,3");

    let space_path = f.arg("mid.json");
    let out = ghlab(&[
        "geodesic",
        &f.arg("m.json"),
        &f.arg("x.csv"),
        "--at",
        "0.5",
        "--out",
        &space_path,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mid = read_space(Path::new(&space_path));
    assert!((mid.dist(1, 2) - 6.025).abs() < 1e-12);
    assert_eq!(
        serde_json::to_string(&mid).unwrap(),
        serde_json::to_string(&read_space(Path::new(&space_path))).unwrap()
    );

    let csv_space = f.arg("mid.csv");
    let out = ghlab(&[
        "geodesic",
        &f.arg("m.json"),
        &f.arg("x.csv"),
        "--at",
        "0.5",
        "--out",
        &csv_space,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let back = ghlab(&["ghd", &space_path, &csv_space]);
    assert_eq!(json(&back)["distance"], Value::from(0.0));

    let out = ghlab(&["geodesic", &f.arg("m.json"), &f.arg("x.csv"), "--at", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_thm2_unit_radius() {
    let out = ghlab(&["verify-thm2", "--r", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["pass"], Value::Bool(true));
    assert_eq!(v["worst_margin"], Value::from(0.5));
    let diam = v["samples"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["check"] == "diam_c_half")
        .unwrap();
    assert_eq!(diam["t"], Value::from(0.5));
    assert_eq!(diam["value"], Value::from(3.0));
    for key in [
        "theorem",
        "params",
        "samples",
        "pass",
        "worst_margin",
        "seed",
        "version",
    ] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(ghlab(&["verify-thm2", "--r", "0"]).status.code(), Some(2));
}

#[test]
fn hgeo_counterexample_and_general_sets() {
    let f = Files::new();
    let csv = f.arg("hgeo.csv");
    let out = ghlab(&["hgeo", "--r", "1", "--grid", "3", "--csv", &csv]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["diam_c_half"], Value::from(3.0));
    assert_eq!(
        fs::read_to_string(&csv).unwrap(),
        "s,diam,gh_to_point\n0,2,1\n0.5,3,1.5\n1,2,1\n"
    );

    let a = f.write("a.json", r#"{"intervals":[[0,2]]}"#);
    let b = f.write("b.json", r#"{"intervals":[[0,0],[2,2]]}"#);
    let out = ghlab(&["hgeo", "--a", &a, "--b", &b, "--grid", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["hausdorff"], Value::from(1.0));
    assert_eq!(
        v["series"][1]["set"]["intervals"],
        serde_json::json!([[-0.5, 0.5], [1.5, 2.5]])
    );
}

#[test]
fn partition_examples_and_round_trip() {
    let f = Files::new();
    let out_path = f.arg("part.json");
    let out = ghlab(&[
        "partition",
        &f.arg("m.json"),
        &f.arg("doubled.json"),
        "--eps",
        "0.25",
        "--out",
        &out_path,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let p: Partition = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(p.labels(), &[0, 1, 2, 1]);

    let out = ghlab(&[
        "partition",
        &f.arg("m.json"),
        &f.arg("doubled.json"),
        "--eps",
        "0.25",
        "--labels",
        &out_path,
    ]);
    assert_eq!(out.status.code(), Some(0));

    let swapped = f.write("swapped.json", r#"{"labels":[2,1,0,1]}"#);
    let out = ghlab(&[
        "partition",
        &f.arg("m.json"),
        &f.arg("doubled.json"),
        "--eps",
        "0.25",
        "--labels",
        &swapped,
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["report"]["discrepancy_ok"], Value::Bool(false));

    let out = ghlab(&["partition", &f.arg("m.json"), &f.arg("x.csv"), "--eps", "5"]);
    assert_eq!(out.status.code(), Some(2));

    let out = ghlab(&[
        "partition",
        &f.arg("m.json"),
        &f.arg("x.csv"),
        "--eps",
        "0.25",
        "--split",
        &f.arg("doubled.json"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["split"]["blocks"]["blocks"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_thm1_and_thm3() {
    let f = Files::new();
    let out = ghlab(&["verify-thm1", &f.arg("m.json"), &f.arg("x.csv"), "--r", "3.025"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["theorem"], Value::from("theorem1"));
    let out = ghlab(&["verify-thm1", &f.arg("m.json"), &f.arg("x.csv"), "--r", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = ghlab(&["verify-thm3", &f.arg("m.json"), &f.arg("x.csv"), &f.arg("doubled.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["pass"], Value::Bool(true));
    let far = f.write("far.json", r#"{"n":3,"d":[[0,3,5],[3,0,6],[5,6,0]]}"#);
    let out = ghlab(&["verify-thm3", &f.arg("m.json"), &far, &f.arg("x.csv")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn campaign_passes_and_is_reproducible() {
    let out = ghlab(&["campaign", "--seed", "7", "--trials", "100"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["pass"], Value::Bool(true));
    assert_eq!(v["theorem3"]["passed"], Value::from(100));

    let again = Command::new(env!("CARGO_BIN_EXE_ghlab"))
        .args(["campaign", "--seed", "7", "--trials", "100"])
        .env("GHLAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.stdout, again.stdout);

    let bad = Command::new(env!("CARGO_BIN_EXE_ghlab"))
        .args(["campaign", "--trials", "1"])
        .env("GHLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
