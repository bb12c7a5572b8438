use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluidmatch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const SINGLE: &str = r#"{"theta":[1.0],"solo_cost":[1.0],"pair_cost":[[1.0]],"lambda_lower":[0.001],"lambda_upper":[10.0]}"#;
const QUADRATIC: &str = r#"{"theta":[0.0],"solo_cost":[1.0],"pair_cost":[[1.0]],"lambda_lower":[0.001],"lambda_upper":[1.0]}"#;
const TRIPLE: &str = r#"{"theta":[1.0,1.0,1.0],"solo_cost":[1.0,1.2,0.9],
  "pair_cost":[[1.0,1.5,1.4],[1.5,1.2,1.6],[1.4,1.6,0.9]],
  "lambda_lower":[0.01,0.01,0.01],"lambda_upper":[5,5,5]}"#;

#[test]
fn solve_single_type_prints_two_thirds() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "n1.json", SINGLE);
    let o = run(&["solve", "--instance", p.to_str().unwrap(), "--lambda", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("0.666666"), "{}", stdout(&o));
}

#[test]
fn solve_accepts_bundle_files() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = format!(
        r#"{{"matching":{SINGLE},"demand":{{"solo_length":[1.0],"max_rate":[10.0]}},"cluster_centers":[[0,0,1,0]],"counts":[10.0]}}"#
    );
    let p = write(dir.path(), "b.json", &bundle);
    let o = run(&["--format", "json", "solve", "--instance", p.to_str().unwrap(), "--lambda", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["objective"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn missing_file_is_an_input_error() {
    let o = run(&["solve", "--instance", "/nonexistent/x.json", "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/x.json"));
}

#[test]
fn bad_flags_and_rates_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "n1.json", SINGLE);
    let p = p.to_str().unwrap();
    assert_eq!(run(&["solve", "--instance", p, "--lambda", "1", "--nope"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--instance", p, "--lambda", "50"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--instance", p, "--lambda", "x"]).status.code(), Some(2));
    assert_eq!(run(&["examples", "--id", "6"]).status.code(), Some(2));
}

#[test]
fn csv_and_json_carry_identical_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "n3.json", TRIPLE);
    let args = |f: &'static str| vec!["--format", f, "solve", "--instance", p.to_str().unwrap(), "--lambda", "0.7,1.3,2.9"];
    let json: Value = serde_json::from_str(&stdout(&run(&args("json")))).unwrap();
    let csv = stdout(&run(&args("csv")));
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("field,i,j,value"));
    let mut seen = 0;
    for line in rows {
        let f: Vec<&str> = line.split(',').collect();
        let expected = match (f[0], f[1].parse::<usize>(), f[2].parse::<usize>()) {
            ("objective", _, _) => &json["objective"],
            (name, Ok(i), Err(_)) => &json[name][i],
            (name, Ok(i), Ok(j)) => &json[name][i][j],
            _ => panic!("bad row {line}"),
        };
        assert_eq!(f[3].parse::<f64>().unwrap(), expected.as_f64().unwrap(), "{line}");
        seen += 1;
    }
    assert_eq!(seen, 1 + 3 + 3 + 9 + 9);
}

#[test]
fn certify_three_equal_patience_types() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "n3.json", TRIPLE);
    let o = run(&["certify", "--instance", p.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("WeaklyConcaveCertified (Cor3_N3_sameTheta)"));
}

#[test]
fn price_quadratic_market() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "q.json", QUADRATIC);
    let o = run(&[
        "--format", "json", "price", "--instance", p.to_str().unwrap(),
        "--solo-length", "1", "--max-rate", "1", "--lambda0", "0.9",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["lambda_star"][0].as_f64().unwrap() - 0.25).abs() < 1e-6);
    assert!((v["objective"].as_f64().unwrap() - 0.0625).abs() < 1e-6);
    assert_eq!(run(&["price", "--instance", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn zero_time_cap_is_a_partial_result() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "q.json", QUADRATIC);
    let o = run(&[
        "price", "--instance", p.to_str().unwrap(), "--solo-length", "1", "--time-cap", "0",
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn benchmark_csv_header_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "--format", "csv", "--out", out.to_str().unwrap(), "benchmark",
        "--synthetic-n", "4", "--c-per-mile", "0.7", "--seeds", "1,2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("instance_id,solver,step0,seed,time_s,iters,objective"));
    assert_eq!(text.lines().count(), 1 + 2 * 4);
    for f in ["benchmark.csv", "summary.csv", "benchmark.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn synth_then_ingest_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let trips = dir.path().join("trips.csv");
    let t = trips.to_str().unwrap();
    assert!(run(&["synth", "--trips", "200", "--seed", "5", "--output", t]).status.success());
    let a = run(&["synth", "--trips", "200", "--seed", "5"]);
    assert_eq!(std::fs::read_to_string(&trips).unwrap(), stdout(&a));
    let mut bundles = Vec::new();
    for name in ["a.json", "b.json"] {
        let b = dir.path().join(name);
        let o = run(&["ingest", "--trips", t, "--n-types", "5", "--theta", "uniform:0.5,2", "--bundle", b.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        bundles.push(std::fs::read_to_string(b).unwrap());
    }
    assert_eq!(bundles[0], bundles[1]);
    let bad = run(&["ingest", "--trips", t, "--theta", "gamma:1", "--bundle", "/tmp/never.json"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn example_three_reports_pass() {
    let o = run(&["examples", "--id", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("tau1") && text.contains("4.2"));
    assert!(!text.contains("FAIL"));
}
