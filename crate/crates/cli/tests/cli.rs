use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_annular-dyn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn moduli_csv_matches_exponential() {
    let out = run(&["moduli", "--fn", "exp", "--t-grid", "0.5:6:0.5"]);
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_reader(&out.stdout[..]);
    assert_eq!(rdr.headers().unwrap(), vec!["t", "logM", "logm", "tol", "n_samples"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 12);
    for r in rows {
        let t: f64 = r[0].parse().unwrap();
        let log_max: f64 = r[1].parse().unwrap();
        assert!((log_max - t.exp()).abs() <= 1e-9 * t.exp());
    }
}

#[test]
fn partition_report_envelope() {
    let out = run(&["partition", "--log-r", "2", "--depth", "3"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["schema"], "annular-dyn/1");
    assert_eq!(v["command"], "partition");
    assert_eq!(v["data"]["partition"]["levels"].as_array().unwrap().len(), 3);
}

#[test]
fn itinerary_fields() {
    let out = run(&["itinerary", "--log-r", "2", "--depth", "4", "--z", "8,0", "--steps", "3"]);
    assert!(out.status.success());
    let v = json(&out);
    for key in ["point", "logR", "symbols", "truncated", "reason"] {
        assert!(!v["data"][key].is_null(), "{key}");
    }
    assert_eq!(v["data"]["symbols"][0], 1);
}

#[test]
fn failed_covering_exits_two_with_report() {
    let out = run(&["covering", "--source", "2,3", "--target", "1,5"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["status"], "hypothesis-failed");
    assert_eq!(v["data"]["verdict"], "fails");
    let ok = run(&["covering", "--fn", "monomial:1,2", "--source", "1,1.2", "--target", "2.1,2.3"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["data"]["verdict"], "covers");
}

#[test]
fn usage_and_input_errors_exit_one() {
    let out = run(&["bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert_eq!(run(&["moduli", "--t-grid", "1:2:1", "--prec", "32"]).status.code(), Some(1));
    assert_eq!(run(&["moduli", "--t-grid", "nonsense"]).status.code(), Some(1));
    assert_eq!(run(&["partition", "--log-r", "2", "--fn", "nosuch"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let neg = run(&["itinerary", "--log-r", "2", "--z", "-1.5,0.25", "--steps", "2"]);
    assert_eq!(neg.status.code(), Some(0));
}

#[test]
fn invalid_radius_is_a_hypothesis_failure() {
    // The identity has mu(t) = t, so no radius grows.
    let out = run(&["partition", "--fn", "monomial:1,1", "--log-r", "2", "--depth", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["status"], "hypothesis-failed");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "fn = cosh\nprec = 96\n").unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = json(&run(&["--config", c, "partition", "--log-r", "2", "--depth", "2"]));
    assert_eq!(from_file["data"]["function"], "cosh");
    let flagged = json(&run(&["--config", c, "--fn", "exp", "partition", "--log-r", "2", "--depth", "2"]));
    assert_eq!(flagged["data"]["function"], "exp");
    std::fs::write(&cfg, "prec = 12\n").unwrap();
    assert_eq!(run(&["--config", c, "partition", "--log-r", "2"]).status.code(), Some(1));
}

#[test]
fn synthesize_from_transition_system() {
    let dir = tempfile::tempdir().unwrap();
    let ts = dir.path().join("ts.json");
    std::fs::write(&ts, r#"{"n_j":[0],"i_j":[[]],"horizon":2,"rule":"time"}"#).unwrap();
    let t = ts.to_str().unwrap();
    let out = run(&["synthesize", "--ts", t, "--kind", "count", "--horizon", "2", "--s0", "2", "--cap", "3"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["data"]["count"], "4");
}

#[test]
fn flagship_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = run(&[
            "annuli",
            "--fn",
            "exp",
            "--t0",
            "2",
            "--n-max",
            "5",
            "--profile",
            "desk-relaxed",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v = read_json(&a);
    assert_eq!(v["data"]["chain"]["entries"].as_array().unwrap().len(), 5);
    assert!(!v["data"]["log_r"].is_null());

    let chain = a.to_str().unwrap();
    let out = run(&["realize", "--chain", chain, "--seq", "0,1,2,0,1,2", "--depth", "5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["data"]["verified_len"], 5);

    // A backjump out of the tower-sized annulus cannot be checked forward.
    let out = run(&["realize", "--chain", chain, "--seq", "2,3,4,2,3,4", "--depth", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(json(&out)["data"]["failure"].is_string());

    let rate = dir.path().join("rate.txt");
    let lines: String = (0..8).map(|n| format!("{n} {}\n", 2.0 + 0.5 * n as f64)).collect();
    std::fs::write(&rate, lines).unwrap();
    let out = run(&["prescribed", "--chain", chain, "--rate", rate.to_str().unwrap(), "--depth", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["data"]["realization"]["realization"]["verified_len"], 5);
}
