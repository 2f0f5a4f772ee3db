use std::path::Path;
use std::process::{Command, Output};

use flowunits::bundled;
use flowunits::netsim::oracle_run;
use flowunits::planner::{ExecutionGraph, JobSpec, Strategy};
use flowunits_cli::{grid_rows, GridArgs, JobArgs};

fn flowunits(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowunits")).args(args).output().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = flowunits(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Asserts a failure with exactly one diagnostic line carrying `code`.
fn diagnostic(args: &[&str], code: &str) -> String {
    let out = flowunits(args);
    assert!(!out.status.success(), "{args:?} succeeded");
    assert!(out.stdout.is_empty());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    let prefix = format!("flowunits: error[{code}]: ");
    assert!(err.starts_with(&prefix), "{err}");
    err
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn plan_prints_instance_counts() {
    let p = ExecutionGraph::from_json(&stdout(&["plan"])).unwrap();
    let count = |label: &str| p.instance_count(p.graph.find(label).unwrap().id);
    assert_eq!((count("O1"), count("O2"), count("O3")), (4, 8, 16));
    let b = ExecutionGraph::from_json(&stdout(&["plan", "--strategy", "baseline"])).unwrap();
    assert_eq!(b.instance_count(b.graph.find("O3").unwrap().id), 28);
}

#[test]
fn infeasible_plan_names_the_operator() {
    let dir = tempfile::tempdir().unwrap();
    let t = bundled::topology("acme").unwrap();
    let mut doc = json(&t.to_json());
    doc["hosts"].as_array_mut().unwrap().retain(|h| h["capabilities"]["gpu"] != serde_json::json!(true));
    let topo = write(dir.path(), "no-gpu.json", &doc.to_string());
    let err = diagnostic(&["plan", "--topology", &topo, "--pipeline", "acme_v1"], "infeasible");
    assert!(err.contains("operator ML") && err.contains("C1"), "{err}");
    let err = diagnostic(&["plan", "--topology", &topo, "--pipeline", "acme_v1", "--strategy", "baseline"], "infeasible");
    assert!(err.contains("operator ML"), "{err}");
}

#[test]
fn failures_are_single_line() {
    diagnostic(&["plan", "--topology", "nowhere"], "io");
    diagnostic(&["plan", "--pipeline", "nothing"], "io");
    diagnostic(&["plan", "--locations", "L9"], "plan");
    diagnostic(&["plan", "--topology", "single"], "plan");
    diagnostic(&["run", "--bandwidth", "fast"], "usage");
    diagnostic(&["run", "--latency-ms=-1"], "config");
    diagnostic(&["run", "--scale", "0"], "config");
    diagnostic(&["frobnicate"], "usage");
    diagnostic(&["grid", "--latencies-ms", ""], "usage");

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{ not json");
    diagnostic(&["plan", "--topology", &bad], "parse");
    diagnostic(&["plan", "--pipeline", &bad], "parse");
    diagnostic(&["run", "--cost-model", &bad], "parse");
    diagnostic(&["update-scenario", "--scenario", &bad], "parse");
    let unknown = write(dir.path(), "unknown.json", r#"[{"kind": "replace_unit", "at_ms": 0, "unit": "O9", "downtime_ms": 1}]"#);
    diagnostic(&["update-scenario", "--scenario", &unknown, "--events-per-location", "10"], "update");
}

#[test]
fn sink_csv_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sinks.csv");
    let report = json(&stdout(&["run", "--events-per-location", "2000", "--locations", "L2,L3", "--sinks-csv", path.to_str().unwrap()]));
    let job = JobSpec::new(bundled::continuum_v1(10).unwrap(), ["L2", "L3"], Strategy::FlowUnits).with_workload(2000, 42);
    let oracle = oracle_run(&job.graph, &job);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), oracle.to_csv());
    assert_eq!(report["sink_digest"], oracle.digest());
}

#[test]
fn strategies_agree_on_output_not_time() {
    let args = |s| vec!["run", "--strategy", s, "--bandwidth", "10", "--latency-ms", "10", "--events-per-location", "3000"];
    let fu = json(&stdout(&args("flowunits")));
    let bl = json(&stdout(&args("baseline")));
    assert_eq!(fu["sink_digest"], bl["sink_digest"]);
    assert_ne!(fu["makespan_ns"], bl["makespan_ns"]);
}

#[test]
fn single_zone_makespan_ignores_condition() {
    let base = ["run", "--topology", "single", "--pipeline", "word_count", "--strategy", "baseline"];
    let slow: Vec<&str> = base.iter().copied().chain(["--bandwidth", "1", "--latency-ms", "100"]).collect();
    assert_eq!(json(&stdout(&base))["makespan_ns"], json(&stdout(&slow))["makespan_ns"]);
}

#[test]
fn run_accepts_a_plan_file() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(dir.path(), "plan.json", &stdout(&["plan", "--strategy", "baseline", "--locations", "L1,L4"]));
    let direct = stdout(&["run", "--strategy", "baseline", "--locations", "L1,L4", "--events-per-location", "500"]);
    let loaded = stdout(&["run", "--plan", &plan, "--events-per-location", "500"]);
    assert_eq!(direct, loaded);
    diagnostic(&["run", "--plan", &plan, "--topology", "acme"], "sim");
}

#[test]
fn grid_csv_shape() {
    let out = stdout(&["grid", "--bandwidths", "10", "--latencies-ms", "100", "--events-per-location", "1000"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "bandwidth,latency,baseline_makespan_s,flowunits_makespan_s,ratio");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("10,100,"));

    let out = stdout(&["grid", "--bandwidths", "unlimited,100,10", "--latencies-ms", "5,0", "--events-per-location", "500"]);
    let keys: Vec<String> = out.lines().skip(1).map(|l| l.split(',').take(2).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(keys, ["unlimited,5", "unlimited,0", "100,5", "100,0", "10,5", "10,0"]);
    for line in out.lines().skip(1) {
        let f: Vec<f64> = line.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert_eq!(f[2], f[0] / f[1]);
    }
}

#[test]
fn parallel_grid_equals_sequential() {
    let args = |threads| GridArgs {
        job: JobArgs {
            topology: "continuum".into(),
            pipeline: "continuum_v1".into(),
            window: 10,
            locations: vec![],
            events_per_location: 1500,
            scale: 1.0,
            seed: 7,
            cost_model: None,
        },
        bandwidths: vec!["unlimited".parse().unwrap(), "50".parse().unwrap()],
        latencies_ms: vec![0.0, 20.0],
        threads,
    };
    assert_eq!(grid_rows(&args(1)).unwrap(), grid_rows(&args(4)).unwrap());
}

#[test]
fn scale_multiplies_events() {
    let scaled = json(&stdout(&["run", "--events-per-location", "1000", "--scale", "2.5", "--locations", "L1"]));
    let plain = json(&stdout(&["run", "--events-per-location", "2500", "--locations", "L1"]));
    assert_eq!(scaled, plain);
}

#[test]
fn cost_model_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "cost.json", r#"{"operators": {"O3": {"fixed_us": 10000.0, "per_work_us": 0.0}}}"#);
    let args = ["run", "--events-per-location", "1000", "--locations", "L1"];
    let slow: Vec<&str> = args.iter().copied().chain(["--cost-model", &model]).collect();
    let a = json(&stdout(&args));
    let b = json(&stdout(&slow));
    assert_eq!(a["sink_digest"], b["sink_digest"]);
    assert!(b["makespan_ns"].as_u64() > a["makespan_ns"].as_u64());
}

#[test]
fn empty_scenario_equals_queued_run() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "empty.json", "[]");
    let common = ["--events-per-location", "2000", "--bandwidth", "100", "--latency-ms", "10"];
    let updated = json(&stdout(&[&["update-scenario", "--scenario", &scenario][..], &common].concat()));
    let run = json(&stdout(&[&["run", "--boundary", "queued"][..], &common].concat()));
    assert_eq!(updated["report"], run);
    assert_eq!(updated["audit"], serde_json::json!([]));
}

#[test]
fn update_scenario_audits_each_delta() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "grow.json",
        r#"[{"kind": "add_location", "at_ms": 0, "location": "L5"},
            {"kind": "replace_unit", "at_ms": 20, "unit": "AD", "downtime_ms": 100}]"#,
    );
    let args = ["--topology", "acme", "--pipeline", "acme_v1", "--locations", "L1,L2", "--events-per-location", "2000"];
    let out = json(&stdout(&[&["update-scenario", "--scenario", &scenario][..], &args].concat()));
    let audit = out["audit"].as_array().unwrap();
    assert_eq!(audit.len(), 3, "add, pause and resume");
    assert!(audit[0]["delta"]["locations"].to_string().contains("L5"));
    assert_eq!(out["snapshots"].as_array().unwrap().len(), 2);
    let plain = json(&stdout(&[&["run", "--boundary", "queued"][..], &args[..6], &["--locations", "L1,L2,L5", "--events-per-location", "2000"]].concat()));
    assert_eq!(out["report"]["sink_digest"], plain["sink_digest"]);
}
