use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const SYMMETRIC: &str = r#"{
  "schema_version": 1,
  "network": {"gains": [[1.0, 0.5], [0.5, 1.0]]},
  "noise": 0.1,
  "gamma_target": 1.0
}"#;

const THREE_LINKS: &str = r#"{
  "schema_version": 1,
  "network": {"gains": [[1.0, 0.4, 0.1], [0.3, 0.8, 0.5], [0.2, 0.6, 1.2]]},
  "noise": [0.05, 0.1, 0.02],
  "limits": {"p_max": 2.0},
  "gamma_target": 0.5,
  "utility": {"kind": "alpha_fair", "alpha": 2.0}
}"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn powerctl(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_powerctl")).args(args).output().unwrap();
    let code = out.status.code().unwrap();
    let report = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (code, report)
}

fn code(args: &[&str]) -> i32 {
    powerctl(args).0
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let sym = write(dir.path(), "sym.json", SYMMETRIC);
    let sym = sym.to_str().unwrap();
    let three = write(dir.path(), "three.json", THREE_LINKS);
    let three = three.to_str().unwrap();

    let malformed = write(dir.path(), "malformed.json", "{\"schema_version\": 1,");
    let unknown = write(dir.path(), "unknown.json", &SYMMETRIC.replace("\"noise\"", "\"bogus\": 1, \"noise\""));
    let version = write(dir.path(), "version.json", &SYMMETRIC.replace("\"schema_version\": 1", "\"schema_version\": 2"));
    let shape = write(dir.path(), "shape.json", &SYMMETRIC.replace("\"noise\": 0.1", "\"noise\": [0.1, 0.1, 0.1]"));
    for bad in [&malformed, &unknown, &version, &shape] {
        assert_eq!(code(&["check-feas", "--scenario", bad.to_str().unwrap()]), 2, "{}", bad.display());
    }
    assert_eq!(code(&["check-feas"]), 2);
    assert_eq!(code(&["check-feas", "--scenario", "/nonexistent/s.json"]), 2);
    assert_eq!(code(&["check-feas", "--scenario", sym, "--bogus-flag"]), 2);
    assert_eq!(code(&["check-feas", "--scenario", sym, "--gamma", "-1"]), 2);
    // unbounded powers cannot be optimized
    assert_eq!(code(&["solve", "--scenario", sym]), 2);

    assert_eq!(code(&["check-feas", "--scenario", sym]), 0);
    assert_eq!(code(&["check-feas", "--scenario", sym, "--gamma", "2.5"]), 3);
    let floor = write(
        dir.path(),
        "floor.json",
        r#"{"schema_version": 1, "network": {"gains": [[1.0]]}, "noise": 0.1,
            "limits": {"p_max": 1.0, "gamma_min": 50.0}}"#,
    );
    assert_eq!(code(&["solve", "--scenario", floor.to_str().unwrap()]), 3);

    assert_eq!(code(&["solve", "--scenario", three, "--max-iter", "1", "--tol", "1e-12"]), 4);
    assert_eq!(code(&["fixed-point", "--scenario", three, "--max-iter", "2"]), 4);

    let file = write(dir.path(), "occupied", "");
    assert_eq!(code(&["check-feas", "--scenario", sym, "--out", file.to_str().unwrap()]), 5);
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let three = write(dir.path(), "three.json", THREE_LINKS);
    let args = [
        "solve",
        "--scenario",
        three.to_str().unwrap(),
        "--algo",
        "g2too",
        "--async-staleness",
        "4",
        "--seed",
        "11",
    ];
    let (c1, a) = powerctl(&args);
    let (c2, b) = powerctl(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a["results"], b["results"]);
    assert_eq!(a["input_digest"], b["input_digest"]);
    assert_eq!(a["seed"], 11);
    // re-running from the embedded argv gives the same numbers
    let argv: Vec<String> = a["argv"].as_array().unwrap()[1..].iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
    assert_eq!(powerctl(&argv).1["results"], a["results"]);
}

#[test]
fn out_dir_gets_report_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let three = write(dir.path(), "three.json", THREE_LINKS);
    let out = dir.path().join("run");
    let (c, stdout) = powerctl(&["fixed-point", "--scenario", three.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(c, 0);
    assert_eq!(stdout, Value::Null);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["artifacts"][0], "trajectory.csv");
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("iter,p_1,p_2,p_3,residual"), "{csv}");
}

#[test]
fn solver_and_oracle_agree_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let two = write(
        dir.path(),
        "two.json",
        r#"{"schema_version": 1, "network": {"gains": [[1.0, 0.3], [0.6, 0.9]]}, "noise": [0.1, 0.05],
            "limits": {"p_max": [1.0, 2.0]}}"#,
    );
    let two = two.to_str().unwrap();
    let (_, solved) = powerctl(&["solve", "--scenario", two]);
    let (_, oracle) = powerctl(&["oracle", "--scenario", two]);
    let a = solved["results"]["objective"].as_f64().unwrap();
    let b = oracle["results"]["oracle"]["objective"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
}

#[test]
fn generate_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let c = code(&["generate", "--links", "6", "--alpha", "3.5", "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(c, 0);
        std::fs::read(out.join("scenario.json")).unwrap()
    };
    assert_eq!(run("a", "5"), run("b", "5"));
    assert_ne!(run("a", "5"), run("c", "6"));
    assert_eq!(code(&["generate", "--links", "0"]), 2);
    assert_eq!(code(&["generate", "--links", "3", "--alpha", "7"]), 2);
}
