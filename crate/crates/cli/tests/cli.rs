use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dgqft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgqft")).args(args).output().expect("binary runs")
}

fn report(dir: &Path, name: &str, args: &[&str]) -> (i32, Value, String) {
    let out = dir.join(name);
    let mut all = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    let o = dgqft(&all);
    let text = std::fs::read_to_string(&out).unwrap_or_default();
    let v = serde_json::from_str(&text).unwrap_or(Value::Null);
    (o.status.code().unwrap(), v, text)
}

#[test]
fn verify_kg_and_ym_pass() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, extra) in [("verify-kg", vec!["--mass", "1"]), ("verify-ym", vec![])] {
        let mut args = vec![cmd, "--nt", "12", "--nx", "4"];
        args.extend(extra);
        let (code, v, _) = report(dir.path(), &format!("{cmd}.json"), &args);
        assert_eq!(code, 0, "{cmd}: {v}");
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["passed"], true);
        let names: Vec<&str> = v["suites"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
        assert_eq!(names, ["green", "trivializations", "poisson", "ccr", "aqft"]);
    }
}

#[test]
fn ym_homology_table() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v, _) = report(dir.path(), "h.json", &["homology", "--theory", "ym"]);
    assert_eq!(code, 0);
    let rank = |d: i64| {
        v["homology"].as_array().unwrap().iter().find(|r| r["degree"] == d).unwrap()["rank"].as_u64().unwrap()
    };
    assert_eq!([rank(2), rank(1), rank(-1)], [0, 1, 1]);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify-ym", "--seed", "3", "--nx", "6"];
    let (_, _, a) = report(dir.path(), "a.json", &args);
    let (_, _, b) = report(dir.path(), "b.json", &args);
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn einstein_causality_records_at_12_6() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v, _) = report(dir.path(), "k.json", &["verify-kg", "--nx", "6"]);
    assert_eq!(code, 0);
    let axioms = v["axioms"].as_array().unwrap();
    let ec = axioms.iter().filter(|a| a["axiom"] == "einstein_causality").count();
    assert!(ec >= 12);
    assert!(axioms.iter().all(|a| a["status"] != "fail"));
}

#[test]
fn zigzag_suites_pass() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v, _) = report(dir.path(), "z.json", &["zigzag", "--theory", "ym", "--seed", "2"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["suites"].as_array().unwrap().len(), 2);
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "nt = 10\nmass = \"1/2\"\n").unwrap();
    let (code, v, _) = report(dir.path(), "c.json", &["homology", "--nt", "12", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["config"]["nt"], 10);
    assert_eq!(v["config"]["mass"], "1/2");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "bogus = 1\n").unwrap();
    for args in [
        vec!["homology", "--nt", "5"],
        vec!["homology", "--dt", "1", "--dx", "2"],
        vec!["homology", "--mass", "abc"],
        vec!["verify-ym", "--nt", "10"],
        vec!["homology", "--config", bad.to_str().unwrap()],
        vec!["nonsense"],
    ] {
        let o = dgqft(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}
