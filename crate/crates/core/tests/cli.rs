use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn glrmf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glrmf")).args(args).output().expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().expect("utf-8 temp path").to_string()
}

#[test]
fn check_writes_a_condition_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = glrmf(&["check", "--spec", "example:A1", "--n", "50", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("conditions.csv")).unwrap();
    assert!(table.starts_with("condition,verdict,witnesses\n"));
    assert!(table.contains("DOB,fails,argmax_neuron=50;ndob_candidate=1;sup_in_sum=97"));
    assert!(table.lines().any(|l| l.starts_with("A,holds")));
    assert!(o.stdout.is_empty());
}

#[test]
fn schema_violations_exit_2_and_name_the_neuron() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"schema_version":1,"n":2,"weights":[],"drift":0,"reset":[1,-1],
            "intensity":{"family":"affine","slope":[1,1],"offset":[0,0]},
            "interaction":{"kind":"clip_add"},"lower_triangular_inputs":true}"#,
    )
    .unwrap();
    let o = glrmf(&["solve", "--spec", bad.to_str().unwrap(), "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("neuron 2"));
    assert!(!dir.path().join("rates.csv").exists());
}

#[test]
fn malformed_json_and_bad_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("broken.json");
    fs::write(&bad, "{\n  \"n\": 2,\n  oops\n}").unwrap();
    let o = glrmf(&["check", "--spec", bad.to_str().unwrap(), "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    assert_eq!(glrmf(&["solve", "--spec", "example:RMF_POS", "--tol", "0"]).status.code(), Some(2));
    assert_eq!(glrmf(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(glrmf(&["check", "--spec", "example:NOPE"]).status.code(), Some(2));
}

#[test]
fn power_combine_with_negative_weight_names_the_edge() {
    let spec = r#"{"schema_version":1,"n":2,"weights":[[1,2,-0.5]],"drift":0,"reset":1,
        "intensity":{"family":"power","rho":2,"offset":[0,0]},
        "interaction":{"kind":"power_combine","rho":2}}"#;
    let o = glrmf(&["check", "--spec", spec]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(1, 2)"));
}

#[test]
fn event_budget_exhaustion_exits_3_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"schema_version":1,"n":1,"weights":[],"drift":0,"reset":0,
        "intensity":{"family":"affine","slope":[1],"offset":[1e8]},
        "interaction":{"kind":"clip_add"}}"#;
    let o = glrmf(&["simulate", "--spec", spec, "--T", "1", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
    let err: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("error.json")).unwrap()).unwrap();
    assert_eq!(err["error"], "numerical");
}

#[test]
fn replica_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = glrmf(&[
            "replica", "--spec", "example:RMF_POS", "--n", "6", "--M", "64", "--T", "200", "--seed", "7",
            "--out", &out_arg(dir.path()),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["beta.csv", "report.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let beta = fs::read_to_string(a.path().join("beta.csv")).unwrap();
    assert!(beta.starts_with("neuron,beta,stderr,method,M,T,burn_in\n1,"));
}

#[test]
fn simulate_and_couple_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let o = glrmf(&["simulate", "--spec", "example:A1", "--n", "5", "--T", "2", "--grid", "0.5", "--seed", "3", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let snaps = fs::read_to_string(dir.path().join("snapshots.csv")).unwrap();
    let lines: Vec<&str> = snaps.lines().collect();
    assert_eq!(lines[0], "time,x1,x2,x3,x4,x5");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("0,1,1,1,1,1"));
    let events = fs::read_to_string(dir.path().join("events.csv")).unwrap();
    assert!(events.starts_with("time,neuron\n"));

    let o = glrmf(&["couple", "--spec", "example:B3", "--n", "5", "--paths", "20", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dist = fs::read_to_string(dir.path().join("distance.csv")).unwrap();
    assert!(dist.starts_with("time,mean_distance,stderr\n0,"));
}

#[test]
fn solve_reports_every_neuron() {
    let dir = tempfile::tempdir().unwrap();
    let o = glrmf(&["solve", "--spec", "example:RMF_NEG", "--n", "4", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rates = fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    let lines: Vec<&str> = rates.lines().collect();
    assert_eq!(lines[0], "neuron,beta,status,condition_value,quad_error");
    assert_eq!(lines.len(), 5);
    assert!(lines[2].contains("zero_by_divergence"), "{rates}");
}
