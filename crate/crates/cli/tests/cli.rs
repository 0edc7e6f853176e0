use std::path::Path;
use std::process::{Command, Output};

fn pamaj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pamaj"))
        .args(args)
        .env_remove("PAMAJ_WORKERS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn generate(dir: &Path, t: &str) -> String {
    let path = dir.join("g.txt").to_str().unwrap().to_string();
    let o = pamaj(&["generate", "--t", t, "--m", "5", "--seed", "3", "--out", &path]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

#[test]
fn threshold_and_schedule() {
    let o = pamaj(&["threshold", "--d", "5"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("0.2324"));
    let o = pamaj(&["threshold", "--table", "11"]);
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "d,alpha_star");
    assert!(lines[4].starts_with("11,0.4214"));
    let o = pamaj(&["schedule", "--d", "5", "--eps", "0.1", "--t", "100000"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["consensus_bound"], 6);
    assert!(v["tau_star"].as_str().unwrap().starts_with("3.1"));
}

#[test]
fn generate_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let graph = generate(dir.path(), "2000");
    let trace = dir.path().join("trace.csv");
    let o = pamaj(&[
        "run", "--graph", &graph, "--alpha", "0.1", "--seed", "4", "--trace", trace.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["t"], 2000);
    assert_eq!(v["winner"], "blue");
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(csv.lines().next(), Some("step,red_count"));
    assert_eq!(csv.lines().count() as u64, v["steps_run"].as_u64().unwrap() + 2);
    let voter = pamaj(&["run", "--graph", &graph, "--alpha", "0.5", "--protocol", "voter", "--max-steps", "3"]);
    assert!(voter.status.success());
}

#[test]
fn structure_scan() {
    let dir = tempfile::tempdir().unwrap();
    let graph = generate(dir.path(), "3000");
    let o = pamaj(&["structure", "--graph", &graph, "--samples", "50", "--omega", "2"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("root,category,light_cycles,core_edges"));
    assert_eq!(out.lines().count(), 51);
    let summary: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(summary["roots"], 50);
}

#[test]
fn sweep_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    std::fs::write(
        &config,
        r#"{"t":[800],"m":[5],"delta":[0.0],"k":[5,7],"alpha":[0.1,0.3],"trials":2,"base_seed":9}"#,
    )
    .unwrap();
    let c = config.to_str().unwrap();
    let a = pamaj(&["sweep", "--config", c, "--workers", "1"]);
    let b = pamaj(&["sweep", "--config", c, "--workers", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let out = dir.path().join("out.json");
    let o = pamaj(&["sweep", "--config", c, "--format", "json", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(std::fs::read_to_string(&out).unwrap().contains("\"records\""));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(pamaj(&["sweep", "--config", missing.to_str().unwrap()]).status.code(), Some(3));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"t":[10],"m":[5],"delta":[0],"k":[4],"alpha":[0.1],"trials":1}"#).unwrap();
    assert_eq!(pamaj(&["sweep", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(pamaj(&["threshold", "--d", "4"]).status.code(), Some(2));
    assert_eq!(pamaj(&["generate", "--t", "5", "--m", "2", "--delta", "-3"]).status.code(), Some(2));
    let env = Command::new(env!("CARGO_BIN_EXE_pamaj"))
        .args(["sweep", "--config", bad.to_str().unwrap()])
        .env("PAMAJ_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(env.status.code(), Some(2));
}
