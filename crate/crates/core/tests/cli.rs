use std::path::Path;
use std::process::{Command, Output};

const SCENARIO: &str = r#"{"seed":5,"devices":[
 {"id":"phone","randomization":"per-scan","scan_period_s":60,"burst_size":2,
  "sessions":[[0,1200],[9000,10200],[18000,19200]],"pnl":["a","b","c","d"],"pnl_policy":{"rotating-subset":2}},
 {"id":"laptop","scan_period_s":90,"burst_size":2,"sessions":[[100,5000]],"pnl":["corp"],"pnl_policy":"full"}]}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_probelink")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn staged_run_matches_analyze_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("s.json"), SCENARIO).unwrap();
    ok(&["synth", "--scenario", &p(d, "s.json"), "--out", &p(d, "c.pcap"), "--truth", &p(d, "t.jsonl")]);
    ok(&["analyze", "--in", &p(d, "c.pcap"), "--out", &p(d, "r.json"), "--emit-dir", &p(d, "art")]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["device_count_post_merge"], 2);
    assert_eq!(report["parameters"]["merge"]["gap"], 600.0);

    ok(&["instances", "--in", &p(d, "c.pcap"), "--out", &p(d, "i.jsonl")]);
    ok(&["devices", "--in", &p(d, "i.jsonl"), "--out", &p(d, "d.jsonl")]);
    ok(&["merge", "--in", &p(d, "d.jsonl"), "--out", &p(d, "m.jsonl")]);
    for (staged, emitted) in [("i.jsonl", "art/instances.jsonl"), ("d.jsonl", "art/devices.jsonl"), ("m.jsonl", "art/merged.jsonl")] {
        assert_eq!(std::fs::read(d.join(staged)).unwrap(), std::fs::read(d.join(emitted)).unwrap(), "{staged}");
    }
    let art = |f: &str| p(d, &format!("art/{f}"));
    assert_eq!(
        ok(&["verify", "--report", &p(d, "r.json"), "--instances", &art("instances.jsonl"), "--devices", &art("devices.jsonl"), "--merged", &art("merged.jsonl")]),
        "ok\n"
    );
    let bad = run(&["verify", "--report", &p(d, "r.json"), "--instances", &art("instances.jsonl"), "--devices", &art("merged.jsonl"), "--merged", &art("merged.jsonl")]);
    assert_eq!(bad.status.code(), Some(3));

    let csv = ok(&["timeline", "--report", &p(d, "r.json"), "--devices", "0,1", "--format", "csv"]);
    assert!(csv.starts_with("device,start,end\n"));
    let unknown = run(&["timeline", "--report", &p(d, "r.json"), "--devices", "7"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("s.json"), SCENARIO).unwrap();
    std::fs::write(d.join("cfg.json"), r#"{"similarity":{"threshold":0.2},"merge":{"pad":10}}"#).unwrap();
    ok(&["synth", "--scenario", &p(d, "s.json"), "--out", &p(d, "c.jsonl"), "--truth", &p(d, "t.jsonl"), "--format", "records"]);
    let report: serde_json::Value =
        serde_json::from_str(&ok(&["analyze", "--in", &p(d, "c.jsonl"), "--config", &p(d, "cfg.json"), "--pad", "45"])).unwrap();
    assert_eq!(report["parameters"]["similarity"]["threshold"], 0.2);
    assert_eq!(report["parameters"]["merge"]["pad"], 45.0);
    assert_eq!(report["parameters"]["merge"]["overlap"], 0.5);
}

#[test]
fn anonymize_keeps_analysis_and_hides_ssids() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("s.json"), SCENARIO).unwrap();
    ok(&["synth", "--scenario", &p(d, "s.json"), "--out", &p(d, "c.jsonl"), "--truth", &p(d, "t.jsonl"), "--format", "records"]);
    ok(&["anonymize", "--in", &p(d, "c.jsonl"), "--out", &p(d, "a.jsonl"), "--salt-hex", "0123456789abcdef0123456789abcdef"]);
    let anon = std::fs::read_to_string(d.join("a.jsonl")).unwrap();
    assert!(!anon.contains(&hex::encode("corp")));
    let count = |f: &str| {
        let r: serde_json::Value = serde_json::from_str(&ok(&["analyze", "--in", &p(d, f)])).unwrap();
        (r["instance_count"].clone(), r["device_count_pre_merge"].clone(), r["device_count_post_merge"].clone())
    };
    assert_eq!(count("c.jsonl"), count("a.jsonl"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("junk"), "not a capture").unwrap();
    assert_eq!(run(&["stats", "--in", &p(d, "junk")]).status.code(), Some(1));
    assert_eq!(run(&["stats", "--in", &p(d, "missing")]).status.code(), Some(1));
    std::fs::write(d.join("empty.jsonl"), "").unwrap();
    assert_eq!(run(&["analyze", "--in", &p(d, "empty.jsonl"), "--threshold", "1.5"]).status.code(), Some(2));
    std::fs::write(d.join("cfg.json"), r#"{"merge":{"gapp":1}}"#).unwrap();
    let out = run(&["analyze", "--in", &p(d, "empty.jsonl"), "--config", &p(d, "cfg.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("merge.gapp"));
    let empty: serde_json::Value = serde_json::from_str(&ok(&["analyze", "--in", &p(d, "empty.jsonl")])).unwrap();
    assert_eq!(empty["probe_count"], 0);
    assert_eq!(empty["device_count_post_merge"], 0);
}
