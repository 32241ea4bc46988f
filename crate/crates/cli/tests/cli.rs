use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metriclab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

#[test]
fn profile_geometric_ratio_one() {
    let out = run(&["profile", "--zoo", "seq_geometric", "--depth", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["schema"], 1);
    let levels = r["result"]["profile"]["levels"].as_array().unwrap();
    for l in levels.iter().filter(|l| l["n"].as_u64().unwrap() <= 20) {
        assert!((l["R"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
    assert_eq!(r["config"]["command"]["name"], "profile");
}

#[test]
fn ultrametrize_power_tower() {
    let out = run(&[
        "ultrametrize",
        "--zoo",
        "seq_power_tower",
        "--s",
        "0.5",
        "--depth",
        "12",
        "--p",
        "3",
        "--epsilon",
        "0.1",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(report(&out)["result"]["certificate"]["holds"], true);
}

#[test]
fn embed_polynomial_writes_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&[
        "embed",
        "--zoo",
        "seq_polynomial",
        "--s",
        "2",
        "--depth",
        "8",
        "--N",
        "11",
        "--p",
        "2",
        "--epsilon",
        "0.5",
        "--out",
        d,
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("coordinates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert!(csv.starts_with("label,x_1,"));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn reports_are_byte_identical() {
    let args = [
        "zoo",
        "--zoo",
        "cantor_factorial",
        "--family-r",
        "0.5",
        "--depth",
        "4",
    ];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn zoo_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&[
        "zoo",
        "--zoo",
        "seq_polynomial",
        "--s",
        "2",
        "--depth",
        "10",
        "--out",
        d,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let space = dir.path().join("space.csv");
    let chain = dir.path().join("chain.json");
    let a = run(&[
        "profile",
        "--zoo",
        "seq_polynomial",
        "--s",
        "2",
        "--depth",
        "10",
    ]);
    let b = run(&[
        "profile",
        "--input",
        space.to_str().unwrap(),
        "--chain-file",
        chain.to_str().unwrap(),
    ]);
    assert_eq!(
        b.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&b.stderr)
    );
    let (pa, pb) = (report(&a), report(&b));
    let ra: Vec<&Value> = pa["result"]["profile"]["levels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| &l["R"])
        .collect();
    let rb: Vec<&Value> = pb["result"]["profile"]["levels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| &l["R"])
        .collect();
    assert_eq!(ra, rb);
}

#[test]
fn domain_error_exit_one() {
    let out = run(&[
        "profile",
        "--zoo",
        "seq_power_tower",
        "--s",
        "1.5",
        "--depth",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn parse_error_has_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "a,b\n0,1e-1\n0.1,zz\n").unwrap();
    let out = run(&["profile", "--input", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 3") && msg.contains("column 2"), "{msg}");
}

#[test]
fn verification_failure_exit_two() {
    // Gaps of 2^-120 vanish in f64 coordinates, so an image distance is 0.
    let out = run(&[
        "embed",
        "--zoo",
        "seq_factorial",
        "--depth",
        "5",
        "--N",
        "2",
        "--p",
        "2",
        "--epsilon",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["verified"], false);
    assert!(r["result"]["violation"]
        .as_str()
        .unwrap()
        .contains("lower distortion"));
}

#[test]
fn max_points_cap() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    std::fs::write(&p, "a,b,c\n0,0.1,0.2\n0.1,0,0.1\n0.2,0.1,0\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_metriclab"))
        .args(["profile", "--input", p.to_str().unwrap()])
        .env("METRICLAB_MAX_POINTS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_and_hyperspace() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    std::fs::write(
        &p,
        "a,b,c,d\n0,0.1,0.5,0.5\n0.1,0,0.5,0.5\n0.5,0.5,0,0.2\n0.5,0.5,0.2,0\n",
    )
    .unwrap();
    let o = run(&["oracle", "--input", p.to_str().unwrap(), "--r", "0.6"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&o)["result"]["dominance"]["partitions_examined"], 15);
    let h = run(&["hyperspace", "--input", p.to_str().unwrap()]);
    assert_eq!(h.status.code(), Some(0));
    let r = report(&h);
    assert_eq!(r["result"]["points"], 15);
    assert_eq!(r["result"]["is_ultrametric"], true);
}
