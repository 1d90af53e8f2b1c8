use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn qai(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qai"))
        .args(args)
        .current_dir(golden(""))
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn parse_pretty_prints_and_reparses() {
    for f in ["bell.qw", "loop.qw", "rus.qw", "ghz3.qw"] {
        let o = qai(&["parse", f]);
        assert_eq!(code(&o), 0, "{f}");
        let text = String::from_utf8(o.stdout).unwrap();
        let again = qai_core::lang::parse(&text).unwrap();
        let orig = qai_core::lang::parse(&std::fs::read_to_string(golden(f)).unwrap()).unwrap();
        assert_eq!(again, orig);
        let o = qai(&["parse", f, "--json"]);
        assert!(json_out(&o).get("body").is_some());
    }
}

#[test]
fn parse_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.qw");
    std::fs::write(&bad, "qubits q; q *= CNOT;").unwrap();
    let o = qai(&["parse", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("DimensionMismatch"));
    std::fs::write(&bad, "qubits q; q *= ;").unwrap();
    assert_eq!(code(&qai(&["parse", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&qai(&["analyze", "bell.qw"])), 2);
}

#[test]
fn ghz_demo_finds_witness() {
    let o = qai(&["paper-5-3", "--json"]);
    assert_eq!(code(&o), 1);
    let v = json_out(&o);
    assert_eq!(v["verdict"], "IncompleteWitness");
    assert_eq!(v["analyzed_contains_11"], serde_json::json!([true, true]));
}

#[test]
fn hoare_valid_and_invalid() {
    let o = qai(&[
        "hoare",
        "bell.qw",
        "--pre",
        "pre_00.json",
        "--post",
        "bell_post.json",
        "--json",
    ]);
    assert_eq!(code(&o), 0);
    let v = json_out(&o);
    assert_eq!(v["verdict"], "valid");
    assert_eq!(v["derivation"]["rule"], "Imp");
    assert!(v.get("witness").is_none());

    let o = qai(&[
        "hoare",
        "bell.qw",
        "--pre",
        "pre_00.json",
        "--post",
        "pre_00.json",
        "--witness",
        "--json",
    ]);
    assert_eq!(code(&o), 1);
    let v = json_out(&o);
    assert_eq!(v["verdict"], "invalid");
    assert!(v["witness"]["residual"].as_f64().unwrap() > 1e-6);
}

#[test]
fn golden_derivations_replay() {
    for (d, p) in [
        ("bell.hoare.json", "bell.qw"),
        ("bell.incorrect.json", "bell.qw"),
        ("loop.hoare.json", "loop.qw"),
        ("loop.incorrect.json", "loop.qw"),
        ("rus.hoare.json", "rus.qw"),
        ("ghz3.local.hoare.json", "ghz3.qw"),
    ] {
        let o = qai(&["replay", d, p]);
        assert_eq!(code(&o), 0, "{d}: {}", String::from_utf8_lossy(&o.stdout));
    }
}

#[test]
fn tampered_derivation_is_rejected() {
    let mut v: Value =
        serde_json::from_str(&std::fs::read_to_string(golden("bell.hoare.json")).unwrap()).unwrap();
    let post = std::fs::read_to_string(golden("pre_00.json")).unwrap();
    let post: Value = serde_json::from_str(&post).unwrap();
    v["derivation"]["conclusion"]["post"] = post.clone();
    v["derivation"]["side"][1]["rhs"] = post;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tampered.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let o = qai(&["replay", path.to_str().unwrap(), "bell.qw", "--json"]);
    assert_eq!(code(&o), 1);
    assert_eq!(json_out(&o)["replay"], false);
    // Replaying against a different program fails too.
    assert_eq!(code(&qai(&["replay", "bell.hoare.json", "loop.qw"])), 1);
}

#[test]
fn analyze_output_is_a_fixed_point_of_skip() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.json");
    let o = qai(&[
        "analyze",
        "loop.qw",
        "--pre",
        "pre_00.json",
        "--output",
        first.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let skip = dir.path().join("skip.qw");
    std::fs::write(&skip, "qubits a b; skip;").unwrap();
    let o = qai(&[
        "analyze",
        skip.to_str().unwrap(),
        "--pre",
        first.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let a: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    assert_eq!(json_out(&o), a);

    let o = qai(&[
        "analyze",
        "ghz3.qw",
        "--pre",
        "pre_000.json",
        "--domain",
        "local:q1,q2;q2,q3",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(json_out(&o)["kind"], "local");
}

#[test]
fn run_and_budget() {
    let o = qai(&["run", "bell.qw", "--state", "state_00.json"]);
    assert_eq!(code(&o), 0);
    let v = json_out(&o);
    assert!((v["rho"][0][3][0].as_f64().unwrap() - 0.5).abs() < 1e-12);

    let dir = tempfile::tempdir().unwrap();
    let spin = dir.path().join("spin.qw");
    std::fs::write(&spin, "qubits a b; while full on a { a *= H; }").unwrap();
    let o = qai(&[
        "run",
        spin.to_str().unwrap(),
        "--state",
        "state_00.json",
        "--max-iters",
        "10",
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn compare_domains_is_deterministic() {
    let args = [
        "compare-domains",
        "ghz3.qw",
        "--pre",
        "pre_000.json",
        "--local",
        "q1,q2;q2,q3",
        "--trials",
        "6",
        "--seed",
        "7",
    ];
    let a = qai(&args);
    let b = qai(&args);
    assert_eq!(a.stdout, b.stdout);
    let v = json_out(&a);
    assert_eq!(v["subspace"]["result"]["verdict"], "Complete");
    assert!(code(&a) == 0 || code(&a) == 1);
}

#[test]
fn incorrectness_exit_codes() {
    let o = qai(&[
        "incorrect",
        "loop.qw",
        "--pre",
        "pre_00.json",
        "--post",
        "loop_spc.json",
    ]);
    assert_eq!(code(&o), 0);
    let o = qai(&[
        "incorrect",
        "loop.qw",
        "--pre",
        "pre_00.json",
        "--post",
        "full_2q.json",
    ]);
    assert_eq!(code(&o), 1);
    assert_eq!(json_out(&o)["valid"], false);
}
