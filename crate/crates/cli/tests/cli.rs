use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qlnc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlnc")).args(args).output().expect("spawn qlnc")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn fixture(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    let out = qlnc(&["fixture", name, "--dir", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (dir.join(format!("{name}.json")), dir.join(format!("{name}.sol.json")))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn validate_accepts_fixtures() {
    let dir = TempDir::new().unwrap();
    for name in ["identity", "chain", "butterfly", "g1", "g2", "g3"] {
        let (net, _) = fixture(dir.path(), name);
        let out = qlnc(&["validate", s(&net)]);
        assert_eq!(code(&out), 0, "{name}: {}", stdout(&out));
        assert!(stdout(&out).contains("valid"));
    }
}

#[test]
fn validate_reports_cycle() {
    let dir = TempDir::new().unwrap();
    let (net, _) = fixture(dir.path(), "chain");
    let mut v = read_json(&net);
    let edges = v["edges"].as_array().unwrap().clone();
    let last = edges.last().unwrap()["to"].clone();
    let mid = edges[1]["from"].clone();
    v["edges"].as_array_mut().unwrap().push(serde_json::json!({"id": "back", "from": last, "to": mid}));
    let cyclic = dir.path().join("cyclic.json");
    fs::write(&cyclic, v.to_string()).unwrap();
    let out = qlnc(&["validate", s(&cyclic)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("acyclicity"), "{}", stdout(&out));
}

#[test]
fn validate_reports_bad_demand() {
    let dir = TempDir::new().unwrap();
    let (net, _) = fixture(dir.path(), "butterfly");
    let text = fs::read_to_string(&net).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    let demands = v["demands"].as_object_mut().expect("demands object");
    let first = demands.keys().next().unwrap().clone();
    demands.insert(first, serde_json::json!([99]));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, v.to_string()).unwrap();
    let out = qlnc(&["validate", s(&bad)]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("demands.") && err.contains("99"), "{err}");
}

#[test]
fn malformed_input_is_io_error() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("junk.json");
    fs::write(&p, "{ not json").unwrap();
    assert_eq!(code(&qlnc(&["validate", s(&p)])), 5);
    assert_eq!(code(&qlnc(&["validate", s(&dir.path().join("missing.json"))])), 5);
}

#[test]
fn usage_error_is_two() {
    assert_eq!(code(&qlnc(&["plan"])), 2);
    assert_eq!(code(&qlnc(&["frobnicate"])), 2);
}

#[test]
fn identity_four_bits_has_rate_four_fifths() {
    let dir = TempDir::new().unwrap();
    let (net, sol) = fixture(dir.path(), "identity");
    let plan = dir.path().join("plan.json");
    let out = qlnc(&["plan", s(&net), s(&sol), "--bits", "4", "-o", s(&plan)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&plan);
    assert_eq!(v["rate"], "4/5");
    assert_eq!(v["p"], 0);
}

#[test]
fn g2_worst_edge_plan_reproduces_reference() {
    let dir = TempDir::new().unwrap();
    let (net, sol) = fixture(dir.path(), "g2");
    let plan = dir.path().join("plan.json");
    let out = qlnc(&[
        "plan", s(&net), s(&sol), "--M", "64", "--accounting", "worst-edge", "--gamma", "0.00572545", "-o", s(&plan),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&plan);
    assert_eq!((v["P"].as_u64(), v["p"].as_u64()), (Some(14), Some(6)));
    assert_eq!(v["rate"], "7/20");

    let out = qlnc(&["plan", s(&net), s(&sol), "--M", "88", "-o", s(&plan)]);
    assert_eq!(code(&out), 3);
}

#[test]
fn verify_passes_then_fails_one_digit_short() {
    let dir = TempDir::new().unwrap();
    let (net, sol) = fixture(dir.path(), "butterfly");
    let plan = dir.path().join("plan.json");
    assert_eq!(code(&qlnc(&["plan", s(&net), s(&sol), "--M", "40", "-o", s(&plan)])), 0);
    let report = dir.path().join("report.json");
    let out = qlnc(&["verify", s(&net), s(&sol), s(&plan), "--exhaustive", "-o", s(&report)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let r = read_json(&report);
    assert_eq!(r["passed"], true);
    assert_eq!(r["total_cases"], 81 * 81);

    let (net, sol) = fixture(dir.path(), "g2");
    assert_eq!(code(&qlnc(&["plan", s(&net), s(&sol), "--M", "64", "-o", s(&plan)])), 0);
    let p = read_json(&plan)["p"].as_u64().unwrap();
    assert_eq!(p, 7);
    let out = qlnc(&["verify", s(&net), s(&sol), s(&plan), "--exhaustive", "--frac-digits", "6", "-o", s(&report)]);
    assert_eq!(code(&out), 4);
    let r = read_json(&report);
    assert_eq!(r["passed"], false);
    assert_eq!(r["failure_count"], 18180);
}

#[test]
fn budget_exceeded_exits_three() {
    let dir = TempDir::new().unwrap();
    let (net, sol) = fixture(dir.path(), "g2");
    let plan = dir.path().join("plan.json");
    assert_eq!(code(&qlnc(&["plan", s(&net), s(&sol), "--M", "64", "-o", s(&plan)])), 0);
    let out = qlnc(&["verify", s(&net), s(&sol), s(&plan), "--exhaustive", "--budget", "1000"]);
    assert_eq!(code(&out), 3);
    let out = qlnc(&["verify", s(&net), s(&sol), s(&plan), "--samples", "200", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn design_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (net, _) = fixture(dir.path(), "butterfly");
    let a = dir.path().join("a.sol.json");
    let b = dir.path().join("b.sol.json");
    let log = dir.path().join("design.json");
    for out in [&a, &b] {
        let o = qlnc(&["design", s(&net), "--seed", "9", "--restarts", "4", "-o", s(out), "--log", s(&log)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let v = read_json(&a);
    assert!(v["F"].as_f64().unwrap() < 1e-12);
}

#[test]
fn gen_is_deterministic_and_valid() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let args = ["gen", "--nodes", "9", "--max-indeg", "3", "--terminals", "2", "--seed", "5", "-o", s(out)];
        assert_eq!(code(&qlnc(&args)), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(code(&qlnc(&["validate", s(&a)])), 0);
}

#[test]
fn simulate_prints_outputs() {
    let dir = TempDir::new().unwrap();
    let (net, sol) = fixture(dir.path(), "butterfly");
    let out = qlnc(&["simulate", s(&net), s(&sol), "--messages", "5,-2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains('5') && text.contains("-2"), "{text}");
    let out = qlnc(&["simulate", s(&net), s(&sol), "--messages", "1,2,3"]);
    assert_ne!(code(&out), 0);
}

#[test]
fn report_writes_manifest() {
    let dir = TempDir::new().unwrap();
    let (net, sol) = fixture(dir.path(), "g1");
    let plan = dir.path().join("plan.json");
    let ver = dir.path().join("ver.json");
    let manifest = dir.path().join("manifest.json");
    assert_eq!(code(&qlnc(&["plan", s(&net), s(&sol), "--bits", "3", "-o", s(&plan)])), 0);
    assert_eq!(code(&qlnc(&["verify", s(&net), s(&sol), s(&plan), "--exhaustive", "-o", s(&ver)])), 0);
    let out = qlnc(&[
        "report", s(&net), "--sol", s(&sol), "--plan", s(&plan), "--verification", s(&ver), "-o", s(&manifest),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("sha256"));
    assert!(stdout(&out).contains("7/20"));
}

#[test]
fn butterfly_theorem_plan_verifies() {
    let dir = TempDir::new().unwrap();
    let (net, sol) = fixture(dir.path(), "butterfly");
    let plan = dir.path().join("plan.json");
    let out = qlnc(&["plan", s(&net), s(&sol), "--M", "100", "--method", "theorem", "-o", s(&plan)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("rate"));
    assert_eq!(read_json(&plan)["method"], "theorem");
    let out = qlnc(&["verify", s(&net), s(&sol), s(&plan), "--exhaustive"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}
