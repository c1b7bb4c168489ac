use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nclil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nclil"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "0")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn builtin_fixtures() -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/selftest.json");
    fs::read_to_string(p).unwrap()
}

#[test]
fn selftest_passes() {
    let o = nclil(&["selftest"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("0 failed"));
}

#[test]
fn selftest_json() {
    let o = nclil(&["selftest", "--json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let results = v["results"].as_array().unwrap();
    assert!(results.iter().all(|r| r["passed"] == Value::Bool(true)));
    assert!(results.iter().any(|r| r["id"] == "condexp.tower"));
}

#[test]
fn corrupted_fixture_names_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fx.json");
    fs::write(&path, builtin_fixtures().replacen("\"expected\": 2.0", "\"expected\": 2.5", 1)).unwrap();
    let o = nclil(&["selftest", "--fixture", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("failed: fixture.trace.two_blocks"));
}

#[test]
fn malformed_fixture_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fx.json");
    fs::write(&path, "{\"version\": 1, \"cases\": [{\"kind\": \"trace\"}]}").unwrap();
    assert_eq!(code(&nclil(&["selftest", "--fixture", path.to_str().unwrap()])), 2);
    assert_eq!(code(&nclil(&["selftest", "--fixture", "/nonexistent/fx.json"])), 2);
}

#[test]
fn verify_gt_battery() {
    let o = nclil(&["verify", "gt", "--dims", "2..6", "--count", "500", "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn verify_as_stated_is_expected_fail() {
    let o = nclil(&["verify", "expineq", "--mode", "as-stated"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("exp2.as_stated_boundary"));
    assert!(s.contains("lhs 1.81552"));
    assert!(s.contains("expected fail"));
}

#[test]
fn verify_remaining_families() {
    for fam in ["igt", "scalars", "chebyshev"] {
        let o = nclil(&["verify", fam, "--json"]);
        assert_eq!(code(&o), 0, "{fam}");
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["family"], fam);
    }
}

#[test]
fn verify_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    for text in ["{\"family\": \"gt\", \"count\": \"many\"}", "not json", "{\"family\": \"igt\"}", "[1]"] {
        fs::write(&bad, text).unwrap();
        assert_eq!(code(&nclil(&["verify", "gt", "--config", bad.to_str().unwrap()])), 2, "{text}");
    }
    assert_eq!(code(&nclil(&["verify", "gt", "--dims", "6..2"])), 2);
    assert_eq!(code(&nclil(&["verify", "nonsense"])), 2);
}

#[test]
fn verify_config_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gt.json");
    fs::write(&cfg, "{\"family\": \"gt\", \"dims\": [3, 3], \"count\": 20, \"seed\": 4}").unwrap();
    let o = nclil(&["verify", "gt", "--config", cfg.to_str().unwrap(), "--json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["summary"]["instances"], 21);
}

#[test]
fn gue_ratio_near_free_reference() {
    let o = nclil(&["lil", "gue", "--dim", "100", "--steps", "1000", "--checkpoints", "100,1000", "--json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let n = r["n"].as_f64().unwrap();
        let reference = 2.0 / n.ln().ln().max(1.0).sqrt();
        let ratio = r["op_ratio"].as_f64().unwrap();
        assert!((ratio / reference - 1.0).abs() < 0.2, "n={n} ratio {ratio} vs {reference}");
    }
}

#[test]
fn classical_spec_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = nclil(&[
        "lil", "classical", "--atoms", "2048", "--steps", "200000", "--seed", "1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    for f in ["config.json", "manifest.json", "ratios.csv", "ensemble.csv", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(out.join("ratios.csv")).unwrap();
    assert!(csv.starts_with("seed,n,s2,u,op_ratio"));
    assert_eq!(fs::read_to_string(out.join("ensemble.csv")).unwrap().lines().count(), 2049);
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = |d: &Path| {
        vec![
            "lil".to_string(),
            "classical".into(),
            "--atoms".into(),
            "128".into(),
            "--steps".into(),
            "5000".into(),
            "--seed".into(),
            "3,1".into(),
            "--out".into(),
            d.to_str().unwrap().into(),
        ]
    };
    let run = |d: &Path| {
        let v = args(d);
        nclil(&v.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let (oa, ob) = (run(&a), run(&b));
    assert_eq!(code(&oa), 0);
    let body = |o: &Output| stdout(o).lines().filter(|l| !l.starts_with("wrote ")).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&oa), body(&ob));
    for f in ["config.json", "ratios.csv", "ensemble.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let (ma, mb): (Value, Value) = (
        serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap(),
        serde_json::from_slice(&fs::read(b.join("manifest.json")).unwrap()).unwrap(),
    );
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["seeds"], serde_json::json!([3, 1]));
    // Rows follow the seed list order.
    let csv = fs::read_to_string(a.join("ratios.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("3,"));
    assert!(csv.lines().last().unwrap().starts_with("1,"));
}

#[test]
fn manifest_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = nclil(&["verify", "scalars", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&nclil(&["manifest", out.to_str().unwrap()])), 0);
    let cfg = out.join("config.json");
    let text = fs::read_to_string(&cfg).unwrap().replace("\"seed\": 0", "\"seed\": 1");
    fs::write(&cfg, text).unwrap();
    let o = nclil(&["manifest", out.join("manifest.json").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("DIFFERS"));
    assert_eq!(code(&nclil(&["manifest", dir.path().join("missing").to_str().unwrap()])), 2);
}

#[test]
fn config_replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = nclil(&[
        "lil", "tensor", "--law", "two-point", "--p", "0.2", "--m", "2", "--steps", "400", "--seed", "1,2", "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let cfg = a.join("config.json");
    let o = nclil(&["lil", "tensor", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for f in ["config.json", "ratios.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    // A tensor config cannot drive another regime.
    assert_eq!(code(&nclil(&["lil", "gue", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn hw_split_run() {
    let o = nclil(&["lil", "hw", "--law", "hermitian", "--dim", "3", "--scale", "1", "--steps", "800", "--json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let ids: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["hw_envelope", "hw_l2_trend", "hw_w_budget", "hw_resum", "hw_disjoint"]);
}

#[test]
fn lil_usage_errors() {
    assert_eq!(code(&nclil(&["lil", "classical", "--dim", "4"])), 2);
    assert_eq!(code(&nclil(&["lil", "gue", "--steps", "0"])), 2);
    assert_eq!(code(&nclil(&["lil", "classical", "--atoms", "1000000", "--steps", "1000000"])), 2);
    assert_eq!(code(&nclil(&["lil", "hw", "--e", "-1"])), 2);
}
