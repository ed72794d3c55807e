use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_settlesim"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn empty_batch_reports_zero() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        scenario("empty_batch.json").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = PathBuf::from(stdout(&o).trim());
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("partition.json")).unwrap()).unwrap();
    assert_eq!(report["aggregate"], 0);
    assert_eq!(report["violations"], Value::Array(vec![]));
}

#[test]
fn malformed_scenarios_fail_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs");

    let syntax = dir.path().join("syntax.json");
    fs::write(
        &syntax,
        "{\n  \"name\": \"x\",\n  \"mode\": \"batch\",\n  \"instance\": {\n}",
    )
    .unwrap();
    let o = run(&["run", syntax.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("syntax.json:5:"), "{}", stderr(&o));

    let unknown = dir.path().join("unknown.json");
    fs::write(
        &unknown,
        r#"{"name": "x", "mode": "batch", "instance": {}, "t_ned": 3}"#,
    )
    .unwrap();
    let o = run(&["run", unknown.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("t_ned"), "{}", stderr(&o));

    let semantic = dir.path().join("semantic.json");
    fs::write(
        &semantic,
        r#"{"name": "x", "mode": "batch", "instance": {"elements": [{"id": "a", "value": 1, "queue": "nowhere"}]}}"#,
    )
    .unwrap();
    let o = run(&["run", semantic.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("instance:"), "{}", stderr(&o));
    assert!(stderr(&o).contains("nowhere"), "{}", stderr(&o));

    // No partial output is left behind.
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none());

    let o = run(&["run", dir.path().join("missing.json").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing.json"), "{}", stderr(&o));
}

fn hash_tree(dir: &Path) -> Vec<(String, u64)> {
    let mut out: Vec<(String, u64)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let bytes = fs::read(e.path()).unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                settlesim::digest::fnv1a(&bytes),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn same_scenario_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let path = scenario("events_realtime.json");
    let mut dirs = Vec::new();
    for out in [&a, &b] {
        let o = run(&["run", path.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        dirs.push(PathBuf::from(stdout(&o).trim()));
    }
    assert_eq!(dirs[0].file_name(), dirs[1].file_name());
    let ha = hash_tree(&dirs[0]);
    assert_eq!(ha, hash_tree(&dirs[1]));
    let names: Vec<&str> = ha.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "frames.ndjson",
            "scenario.json",
            "summary.json",
            "trace.csv",
            "trace.ndjson"
        ]
    );
}

#[test]
fn existing_run_directory_is_not_overwritten() {
    let out = tempfile::tempdir().unwrap();
    let args = [
        "run",
        scenario("capacity_gap.json").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]
    .map(String::from);
    assert!(bin().args(&args).status().unwrap().success());
    let o = bin().args(&args).output().unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("already exists"), "{}", stderr(&o));
    // A different seed is a different directory.
    let o = bin().args(&args).args(["--seed", "9"]).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).trim().ends_with("-s9"));
}

#[test]
fn overrides_apply() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        scenario("events_realtime.json").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--t-end",
        "449",
        "--format",
        "csv",
        "--seed",
        "77",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = PathBuf::from(stdout(&o).trim());
    assert!(dir.join("trace.csv").exists());
    assert!(!dir.join("trace.ndjson").exists());
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["ticks"], 450);
    let sc: Value = serde_json::from_str(&fs::read_to_string(dir.join("scenario.json")).unwrap()).unwrap();
    assert_eq!(sc["seed"], 77);

    let o = run(&[
        "run",
        scenario("events_realtime.json").to_str().unwrap(),
        "--mode",
        "sideways",
    ]);
    assert!(!o.status.success());
    // Shrinking the horizon below an inline item is an error, not a cut.
    let o = run(&[
        "run",
        scenario("events_realtime.json").to_str().unwrap(),
        "--t-end",
        "9",
    ]);
    assert!(!o.status.success());
    assert!(
        stderr(&o).contains("network.sources[1].items[1].tick"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn compare_reports_the_capacity_gap() {
    let o = run(&["compare", scenario("capacity_gap.json").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["greedy_aggregate"], 4);
    assert_eq!(r["oracle_aggregate"], 5);
    assert_eq!(r["ratio"], 0.8);
    assert_eq!(r["oracle"]["accepted"], serde_json::json!(["b", "c"]));
}

#[test]
fn compare_refuses_large_instances() {
    let o = run(&["compare", scenario("generated_both.json").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("limited to 20"), "{}", stderr(&o));
}

#[test]
fn gen_writes_the_workload() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "gen",
        scenario("generated_both.json").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = PathBuf::from(stdout(&o).trim());
    let inst: Value = serde_json::from_str(&fs::read_to_string(dir.join("instance.json")).unwrap()).unwrap();
    assert_eq!(inst["elements"].as_array().unwrap().len(), 60);
    let events = fs::read_to_string(dir.join("events.ndjson")).unwrap();
    assert_eq!(events.lines().count(), 601);

    let o = run(&[
        "gen",
        scenario("capacity_gap.json").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
}

#[test]
fn summarize_reads_both_formats() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        scenario("events_realtime.json").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    let dir = PathBuf::from(stdout(&o).trim());
    let stored = fs::read_to_string(dir.join("summary.json")).unwrap();
    for file in ["trace.ndjson", "trace.csv"] {
        let o = run(&["summarize", dir.join(file).to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(stdout(&o), stored);
    }
    let copy = out.path().join("trace.txt");
    fs::copy(dir.join("trace.csv"), &copy).unwrap();
    let o = run(&["summarize", copy.to_str().unwrap()]);
    assert!(!o.status.success());
    let o = run(&["summarize", copy.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
}
