use std::process::Command;

use matball::{main_with, report_schema, EXIT_FAIL, EXIT_INVALID, EXIT_PASS};
use matball_core::VerificationReport;
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("matball").chain(args.iter().copied());
    let code = main_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn schema() -> jsonschema::JSONSchema {
    let v: Value = serde_json::from_str(report_schema()).unwrap();
    jsonschema::JSONSchema::compile(&v).unwrap()
}

fn report(args: &[&str]) -> (i32, Value) {
    let (code, out, err) = run(args);
    let v: Value = serde_json::from_str(&out).unwrap_or_else(|e| panic!("{args:?}: {e}\n{out}\n{err}"));
    (code, v)
}

const CHEAP_CHECKS: &[&[&str]] = &[
    &["verify", "bs-sinh", "--rank", "2", "--a", "1.5", "--delta", "-0.7", "--samples", "20"],
    &["verify", "bs-cosh", "--rank", "1", "--b2", "3", "--iota", "1", "--samples", "20"],
    &["verify", "bs-flat", "--delta", "0.5", "--samples", "20"],
    &["verify", "ladder", "--rank", "2", "--samples", "10"],
    &["verify", "commute", "--rank", "3", "--samples", "10"],
    &["verify", "adjoint", "--rank", "1", "--delta", "0.5"],
    &["verify", "zeta", "--rank", "1", "--delta", "0.5"],
    &["verify", "dirac", "--a", "1", "--n", "4", "--rprime", "3"],
    &["verify", "inversion-geometric", "--points", "40"],
];

#[test]
fn every_check_report_matches_schema_and_passes() {
    let schema = schema();
    for args in CHEAP_CHECKS {
        let (code, v) = report(args);
        let errors: Vec<String> = match schema.validate(&v) {
            Ok(()) => Vec::new(),
            Err(it) => it.map(|e| e.to_string()).collect(),
        };
        assert!(errors.is_empty(), "{args:?}: {errors:?}");
        assert_eq!(code, EXIT_PASS, "{args:?}: {v}");
        assert_eq!(v["pass"], Value::Bool(true));
    }
}

#[test]
fn report_round_trips_through_serde() {
    let (_, out, _) = run(&["verify", "bs-sinh", "--samples", "15", "--seed", "7"]);
    let rep: VerificationReport = serde_json::from_str(&out).unwrap();
    assert_eq!(rep.seed, 7);
    assert_eq!(rep.samples, 15);
    let again = serde_json::to_string_pretty(&rep).unwrap() + "\n";
    assert_eq!(again, out);
}

#[test]
fn unknown_report_fields_are_rejected() {
    let (_, out, _) = run(&["verify", "bs-flat", "--samples", "5"]);
    let mut v: Value = serde_json::from_str(&out).unwrap();
    v["extra"] = Value::from(1);
    assert!(!schema().is_valid(&v));
    assert!(serde_json::from_value::<VerificationReport>(v).is_err());
}

#[test]
fn failing_check_exits_one() {
    let (code, _, err) = run(&["verify", "--tolerance", "1e-300", "bs-sinh", "--samples", "10"]);
    assert_eq!(code, EXIT_FAIL);
    assert!(err.contains("failed"), "{err}");
}

#[test]
fn invalid_domain_exits_two_and_names_the_condition() {
    let (code, out, err) = run(&["verify", "dirac", "--a", "1", "--n", "4", "--rprime", "4"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(out.is_empty());
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("rank condition"), "{err}");

    let (code, _, _) = run(&["verify", "bs-sinh", "--a", "-1"]);
    assert_eq!(code, EXIT_INVALID);
    let (code, _, _) = run(&["no-such-command"]);
    assert_eq!(code, EXIT_INVALID);
}

#[test]
fn constants_for_complex_grassmannian_example() {
    let (code, out, _) = run(&["constants", "--a", "2", "--n", "5", "--rprime", "2"]);
    assert_eq!(code, EXIT_PASS);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["delta0"], Value::from(-6.0));
    assert_eq!(v["l"], Value::from(1));
    assert_eq!(v["lambda"], serde_json::json!([12.0]));
}

#[test]
fn same_seed_same_output() {
    let strip = |s: String| {
        let mut v: Value = serde_json::from_str(&s).unwrap();
        v["runtime_ms"] = Value::from(0);
        v
    };
    let args = ["verify", "bs-cosh", "--rank", "3", "--samples", "30", "--seed", "42"];
    let a = strip(run(&args).1);
    let b = strip(run(&args).1);
    assert_eq!(a, b);
    let c = strip(run(&["verify", "bs-cosh", "--rank", "3", "--samples", "30", "--seed", "43"]).1);
    assert_ne!(a["max_abs_err"], c["max_abs_err"]);
}

#[test]
fn csv_profiles_round_trip() {
    let (code, out, _) = run(&["--format", "csv", "spherical", "--a", "2", "--n", "5", "--lambda", "1", "--tmax", "1", "--step", "0.25"]);
    assert_eq!(code, EXIT_PASS);
    let mut rd = csv::Reader::from_reader(out.as_bytes());
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), ["t", "phi", "dphi", "d2phi"]);
    let rows: Vec<Vec<f64>> = rd
        .records()
        .map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[0][1], 1.0);

    let (_, js, _) = run(&["--format", "json", "spherical", "--a", "2", "--n", "5", "--lambda", "1", "--tmax", "1", "--step", "0.25"]);
    let objs: Vec<Value> = serde_json::from_str(&js).unwrap();
    for (row, obj) in rows.iter().zip(&objs) {
        assert_eq!(row[1], obj["phi"].as_f64().unwrap());
    }

    let (code, _, _) = run(&["--format", "csv", "verify", "bs-flat"]);
    assert_eq!(code, EXIT_INVALID);
}

#[test]
fn output_file_receives_the_report() {
    let path = std::env::temp_dir().join(format!("matball-cli-{}.json", std::process::id()));
    let p = path.to_str().unwrap();
    let (code, out, _) = run(&["--output", p, "--format", "json", "radon-sample", "--h", "0,0.5"]);
    assert_eq!(code, EXIT_PASS);
    assert!(out.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    let rows: Vec<Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(rows.len(), 2);
}

#[test]
fn thread_count_from_environment() {
    let bin = env!("CARGO_BIN_EXE_matball");
    let args = ["verify", "bs-sinh", "--rank", "2", "--samples", "40", "--seed", "3"];
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let o = Command::new(bin).args(args).env("CR_THREADS", threads).output().unwrap();
        assert_eq!(o.status.code(), Some(EXIT_PASS));
        let mut v: Value = serde_json::from_slice(&o.stdout).unwrap();
        v["runtime_ms"] = Value::from(0);
        outputs.push(v);
    }
    assert_eq!(outputs[0], outputs[1]);

    let o = Command::new(bin).args(args).env("CR_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(EXIT_INVALID));
    assert!(String::from_utf8_lossy(&o.stderr).contains("CR_THREADS"));
}
