use serde_json::Value;
use std::path::Path;
use std::process::Command;

fn run(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ordermech")).current_dir(dir).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

fn read(dir: &Path, f: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(f)).unwrap()).unwrap()
}

#[test]
fn chain_instance_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let (code, _) = run(d, &["generate", "--chain", "2", "--H", "16", "-o", "inst.json", "--dual-out", "dual.json", "--truth-out", "truth.json"]);
    assert_eq!(code, 0);
    assert_eq!(read(d, "truth.json")["chain"].as_array().unwrap().len(), 2);

    let (code, _) = run(d, &["solve", "inst.json", "--dual", "dual.json", "-o", "sol.json"]);
    assert_eq!(code, 0);
    let sol = read(d, "sol.json");
    assert_eq!(sol["route"], "three");
    assert_eq!(sol["config"]["mode"], "three");
    assert_eq!(sol["report"]["clean"], true);
    assert!(sol["distinct_chain_levels"].as_u64().unwrap() >= 2);
    std::fs::write(d.join("mech.json"), sol["mechanism"].to_string()).unwrap();

    let (code, out) = run(d, &["verify", "inst.json", "mech.json", "--dual", "dual.json"]);
    assert_eq!(code, 0);
    let rep: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(rep["report"]["duality_gap"]["exact"], "0");
    let (code, _) = run(d, &["verify", "inst.json", "sol.json", "--dual", "dual.json"]);
    assert_eq!(code, 0);

    // same instance without its dual falls through to the LP
    let (code, out) = run(d, &["solve", "inst.json", "--grid", "20"]);
    assert_eq!(code, 0);
    let lp: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(lp["route"], "oracle");
    assert!(lp["objective"].as_f64().unwrap() <= sol["revenue"]["value"].as_f64().unwrap() + 1e-9);

    let (code, _) = run(d, &["export", "inst.json", "--mechanism", "mech.json", "--out-dir", "plots"]);
    assert_eq!(code, 0);
    let menu = std::fs::read_to_string(d.join("plots/menu.csv")).unwrap();
    assert!(menu.starts_with("item,prob,price\n"));
    let rev = std::fs::read_to_string(d.join("plots/A_revenue.csv")).unwrap();
    assert!(rev.lines().skip(1).all(|l| l.split(',').count() == 2));
}

#[test]
fn violations_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    run(d, &["generate", "--chain", "1", "-o", "inst.json"]);
    // the worse item C priced above A breaks the order constraint
    std::fs::write(d.join("mech.json"), r#"{"allocation":{"A":[[2,1]],"C":[[4,1]]}}"#).unwrap();
    let (code, out) = run(d, &["verify", "inst.json", "mech.json"]);
    assert_eq!(code, 2);
    let rep: Value = serde_json::from_str(&out).unwrap();
    assert!(!rep["report"]["ic_violations"].as_array().unwrap().is_empty());
}

#[test]
fn bad_input_and_size_limits() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("cyclic.json"), r#"{"items":["A","B"],"edges":[["A","B"],["B","A"]],"H":1,
        "marginals":{"A":{"q":0.5,"pieces":[{"lo":0,"hi":1,"density":1}]},"B":{"q":0.5,"pieces":[{"lo":0,"hi":1,"density":1}]}}}"#).unwrap();
    assert_eq!(run(d, &["solve", "cyclic.json"]).0, 3);
    assert_eq!(run(d, &["solve", "missing.json"]).0, 3);
    assert_eq!(run(d, &["generate", "--chain", "100000", "-o", "x.json"]).0, 4);
}

#[test]
fn batch_matches_single_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::create_dir(d.join("in")).unwrap();
    for s in 0..4 {
        let name = format!("in/line{s}.json");
        assert_eq!(run(d, &["generate", "--line", "3", "--seed", &s.to_string(), "-o", &name]).0, 0);
    }
    let out = Command::new(env!("CARGO_BIN_EXE_ordermech"))
        .current_dir(d)
        .env("ORDERMECH_THREADS", "2")
        .args(["solve", "--batch", "in", "--out-dir", "out"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    for s in 0..4 {
        let (_, single) = run(d, &["solve", &format!("in/line{s}.json")]);
        let single: Value = serde_json::from_str(&single).unwrap();
        let batched = read(d, &format!("out/line{s}.out.json"));
        assert_eq!(single["revenue"], batched["revenue"]);
        assert_eq!(single["route"], batched["route"]);
    }
}

#[test]
fn generation_is_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let a = run(d, &["generate", "--line", "4", "--seed", "11"]).1;
    let b = run(d, &["generate", "--line", "4", "--seed", "11"]).1;
    let c = run(d, &["generate", "--line", "4", "--seed", "12"]).1;
    assert_eq!(a, b);
    assert_ne!(a, c);
}
