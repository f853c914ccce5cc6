use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pnstein(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnstein"))
        .args(args)
        .env_remove("PNSTEIN_SEED")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let o = pnstein(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("valid json")
}

fn validator() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value) {
    let errs: Vec<String> = v.iter_errors(doc).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errs.is_empty(), "schema errors for {}: {errs:?}", doc["command"]);
}

#[test]
fn pdf_example_matches_k0_over_pi() {
    let v = json(&["pdf", "--n", "2", "--sigma", "1", "--x", "1"]);
    let got = v["result"]["rows"][0]["pdf"].as_f64().unwrap();
    // K0(1) = 0.42102443824070833 (A&S table 9.8), divided by pi
    let want = 0.421_024_438_240_708_3 / std::f64::consts::PI;
    assert!((got - want).abs() < 1e-13, "{got} vs {want}");
    assert_eq!(v["seed"], 20140917);
    assert!(v["result"]["quad_tol"].is_number());
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = pnstein(&["pdf", "--x", "1", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = pnstein(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn library_errors_exit_one() {
    // PN(2) density is infinite at the origin
    let o = pnstein(&["pdf", "--x", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = pnstein(&["zerobias", "--dist", "atoms:1,0.5", "--what", "moment", "--p", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn appendix_c_suite_passes() {
    let o = pnstein(&["verify-bounds", "--suite", "appendix-c"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["inequalities_passing"], 15);
    assert_eq!(v["result"]["inequalities_total"], 15);
}

#[test]
fn violated_suite_exits_two() {
    // the published x f bound misses the sigma scaling; sigma = 2 exposes it
    let o = pnstein(&["verify-bounds", "--suite", "thm", "--h", "tanh-scaled", "--sigma", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["violations"], 1);
    let o = pnstein(&["verify-bounds", "--suite", "thm", "--h", "sin", "--sigma", "1"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cases: &[&[&str]] = &[
        &["sample", "--n", "3", "--count", "500"],
        &["--format", "csv", "zerobias", "--what", "coupling", "--m", "5", "--count", "200"],
        &["zerobias", "--dist", "uniform", "--order", "2", "--what", "sample", "--count", "300"],
        &["expectation", "--n", "3", "--h", "cos", "--draws", "50000"],
        &["--format", "plain", "experiment", "cor43", "--reps", "20000", "--ladder", "8,16,32"],
    ];
    for args in cases {
        let a = pnstein(args);
        let b = pnstein(args);
        assert!(a.status.success(), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["experiment", "cor42", "--h", "sin", "--reps", "50000"];
    let one = pnstein(&[&["--threads", "1"][..], &args].concat());
    let four = pnstein(&[&["--threads", "4"][..], &args].concat());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn seed_flag_env_and_config_precedence() {
    let env = Command::new(env!("CARGO_BIN_EXE_pnstein"))
        .args(["sample", "--count", "3"])
        .env("PNSTEIN_SEED", "11")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&env.stdout).unwrap();
    assert_eq!(v["seed"], 11);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# shared settings\nseed = 5\ncount = 4\nreps = 20000  # experiment only\nbinary = false\n").unwrap();
    let c = cfg.to_str().unwrap();
    let v = json(&["--config", c, "sample"]);
    assert_eq!(v["seed"], 5);
    assert_eq!(v["result"]["count"], 4);
    // flags override the file
    let v = json(&["--config", c, "sample", "--count", "2", "--seed", "9"]);
    assert_eq!(v["seed"], 9);
    assert_eq!(v["result"]["values"].as_array().unwrap().len(), 2);

    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(pnstein(&["--config", c, "sample"]).status.code(), Some(1));
}

#[test]
fn binary_sample_matches_json_values() {
    let v = json(&["sample", "--n", "2", "--count", "64"]);
    let o = pnstein(&["sample", "--n", "2", "--count", "64", "--binary"]);
    assert_eq!(o.stdout.len(), 64 * 8);
    let vals: Vec<f64> = o.stdout.chunks(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let want: Vec<f64> = v["result"]["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(vals, want);
}

#[test]
fn out_and_csv_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let csv = dir.path().join("draws.csv");
    let o = pnstein(&[
        "experiment",
        "coupling",
        "--reps",
        "10000",
        "--csv",
        csv.to_str().unwrap(),
        "--csv-rows",
        "100",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["command"], "experiment");
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "w,w_star,h_w");
    assert_eq!(lines.len(), 101);
}

#[test]
fn every_command_validates_against_schema() {
    let v = validator();
    let cases: &[&[&str]] = &[
        &["pdf", "--n", "3", "--x", "-0.5,1.5"],
        &["pdf", "--x", "0", "--regularized"],
        &["cdf", "--n", "4", "--x", "-1,0,2"],
        &["cf", "--n", "2", "--t", "0.5,1", "--ode-residual"],
        &["cf", "--n", "4", "--t", "0,1"],
        &["sample", "--count", "10"],
        &["expectation", "--h", "cos"],
        &["expectation", "--n", "3", "--h", "sin", "--method", "monte-carlo", "--draws", "10000"],
        &["zerobias", "--dist", "gaussian", "--order", "2", "--what", "cdf", "--w", "-1,0.5"],
        &["zerobias", "--dist", "atoms:-1,0.6666666666666666;2,0.3333333333333333", "--what", "pdf", "--w", "0.5"],
        &["zerobias", "--what", "moment", "--p", "0,1,2", "--absolute"],
        &["zerobias", "--what", "square-bias", "--count", "5"],
        &["zerobias", "--what", "coupling", "--m", "3", "--count", "5"],
        &["stein-solve", "--h", "arctan", "--sigma", "0.5", "--x", "-1,0,2"],
        &["verify-bounds", "--suite", "arflem", "--h", "cos", "--sigma", "1"],
        &["verify-bounds", "--suite", "appendix-c", "--grid-points", "200"],
        &["experiment", "cor43", "--reps", "10000"],
        &["experiment", "cor42", "--h", "sin", "--reps", "10000", "--ladder", "4,8,16"],
    ];
    for args in cases {
        let o = pnstein(args);
        assert!(matches!(o.status.code(), Some(0) | Some(2)), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_valid(&v, &doc);
    }
    // the schema is not vacuous
    let bad: Value = serde_json::json!({"command": "pdf", "seed": 1, "result": {"n": 2, "sigma": 1.0}});
    assert!(!v.is_valid(&bad));
}
