mod common;

use common::fixtures::{deterministic_files, iris_like, sample_csv};

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use geomed::Error;

fn geomed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geomed"))
        .args(args)
        .env("GEOMED_THREADS", "1")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn run_and_replay(args: &[&str], document: &str) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let mut full: Vec<&str> = args.to_vec();
    let f = first.to_str().unwrap();
    full.extend(["--out", f]);
    let o = geomed(&full);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(first.join("timing.json").exists());
    let o = geomed(&["replay", first.join(document).to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = deterministic_files(&first);
    assert_eq!(a, deterministic_files(&second));
    a
}

#[test]
fn replay_reproduces_every_command() {
    let dir = tempfile::tempdir().unwrap();
    let csv = sample_csv(dir.path());
    let input = csv.to_str().unwrap();
    let cols = ["--input", input, "--columns", "a,b"];
    run_and_replay(&[&["median"], &cols[..], &["--p", "3"]].concat(), "result.json");
    run_and_replay(&[&["quantile"], &cols[..], &["--u", "0.5,-0.2", "--u", "0,0"]].concat(), "result.json");
    run_and_replay(&[&["trmedian"], &cols[..], &["--candidates", "50"]].concat(), "result.json");
    let files = run_and_replay(
        &[&["credible"], &cols[..], &["--draws", "200", "--region", "box", "--filter", "group=1"]].concat(),
        "result.json",
    );
    assert!(files.iter().any(|(n, _)| n == "draws.csv"));
    let files = run_and_replay(
        &[&["credible"], &cols[..], &["--draws", "200", "--method", "affine", "--candidates", "30"]].concat(),
        "result.json",
    );
    let doc: serde_json::Value = serde_json::from_slice(&files.iter().find(|(n, _)| n == "result.json").unwrap().1).unwrap();
    assert_eq!(doc["result"]["regions"][0]["region"]["kind"], "ellipsoid");
    assert!(doc["result"]["alpha"]["indices"].as_array().unwrap().len() == 3);
    assert_eq!(doc["manifest"]["input"]["rows"], 60);
}

#[test]
fn simulate_writes_tables() {
    let files = run_and_replay(
        &["simulate", "--n", "30", "--replications", "5", "--draws", "100", "--region", "ellipsoid"],
        "table.json",
    );
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["table.csv", "table.json", "table.txt"]);
    let csv = String::from_utf8(files[0].1.clone()).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn iris_layout_gives_three_species() {
    let dir = tempfile::tempdir().unwrap();
    let csv = match std::env::var("GEOMED_IRIS_CSV") {
        Ok(p) => PathBuf::from(p),
        Err(_) => iris_like(dir.path()),
    };
    let files = run_and_replay(&["iris", "--input", csv.to_str().unwrap(), "--draws", "300"], "iris.json");
    let doc: serde_json::Value = serde_json::from_slice(&files.iter().find(|(n, _)| n == "iris.json").unwrap().1).unwrap();
    let species = doc["result"].as_array().unwrap();
    assert_eq!(species.len(), 3);
    for s in species {
        assert_eq!(s["n"], 50);
        assert_eq!(s["pairs"].as_array().unwrap().len(), 6);
        assert_eq!(s["pairs"][0]["polyline"].as_array().unwrap().len(), 128);
        let eig: Vec<f64> = s["axes"]["eigenvalues"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert!(eig.windows(2).all(|w| w[0] >= w[1]) && eig[3] > 0.0);
    }
    assert!(files.iter().any(|(n, _)| n == "iris_polylines.csv"));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let csv = sample_csv(dir.path());
    let input = csv.to_str().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(code(&geomed(&["median", "--input", input, "--columns", "a,b", "--out", out])), 0);
    assert_eq!(code(&geomed(&["median", "--bogus"])), 2);
    assert_eq!(code(&geomed(&["--help"])), 0);
    assert_eq!(code(&geomed(&["median", "--input", "/nonexistent/x.csv", "--out", out])), 3);
    assert_eq!(code(&geomed(&["median", "--input", input, "--columns", "a,zz", "--out", out])), 3);
    assert_eq!(code(&geomed(&["median", "--input", input, "--p", "0.5", "--out", out])), 3);
    assert_eq!(code(&geomed(&["quantile", "--input", input, "--columns", "a,b", "--u", "0.9,0.9", "--out", out])), 3);

    let na = dir.path().join("na.csv");
    fs::write(&na, "x,y\n1,2\n3,NA\n").unwrap();
    let o = geomed(&["median", "--input", na.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 3);
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains('3') && msg.contains('y'), "{msg}");

    let line = dir.path().join("line.csv");
    fs::write(&line, "x,y\n0,0\n1,1\n2,2\n3,3\n4,4\n").unwrap();
    let o = geomed(&["trmedian", "--input", line.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));

    assert_eq!(Error::Internal("x".into()).exit_code() as i32, 5);
}

#[test]
fn replay_refuses_changed_input() {
    let dir = tempfile::tempdir().unwrap();
    let csv = sample_csv(dir.path());
    let out = dir.path().join("o");
    let o = geomed(&["median", "--input", csv.to_str().unwrap(), "--columns", "a,b", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    fs::write(&csv, "a,b,group\n1,2,0\n3,4,1\n5,7,0\n").unwrap();
    let o = geomed(&["replay", out.join("result.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}
