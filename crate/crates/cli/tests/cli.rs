//! End-to-end runs of the `fdip` binary on the bundled scenarios.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fdip_cli::commands::AssignmentDoc;
use tempfile::TempDir;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn fdip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdip")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Copies a bundled scenario into a scratch directory so it can be edited.
fn copy_scenario(name: &str, tmp: &TempDir) -> PathBuf {
    let dst = tmp.path().join(name);
    fs::create_dir_all(&dst).unwrap();
    for entry in fs::read_dir(scenarios().join(name)).unwrap() {
        let p = entry.unwrap().path();
        fs::copy(&p, dst.join(p.file_name().unwrap())).unwrap();
    }
    dst.join("fdip.toml")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn toy_pipeline_runs_and_verifies() {
    let tmp = TempDir::new().unwrap();
    let scn = scenarios().join("toy/fdip.toml");
    let out = tmp.path().join("run");
    let plan = fdip(&["plan", "--scenario", s(&scn), "--out", s(&out)]);
    assert_eq!(code(&plan), 0, "{}", stderr(&plan));
    let sim = fdip(&["simulate", "--scenario", s(&scn), "--out", s(&out), "--trace"]);
    assert_eq!(code(&sim), 0, "{}", stderr(&sim));
    let ver = fdip(&["verify", "--scenario", s(&scn), "--assignment", s(&out.join("assignment.json"))]);
    assert_eq!(code(&ver), 0, "{}", stderr(&ver));

    let verification: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("verification.json")).unwrap()).unwrap();
    assert_eq!(verification["passed"], true);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("time_ns,node,event,flow,bits\n"));
    assert!(trace.lines().count() > 1);
}

#[test]
fn every_csv_has_a_header_and_parses() {
    let tmp = TempDir::new().unwrap();
    let scn = scenarios().join("toy/fdip.toml");
    let out = tmp.path().join("run");
    assert_eq!(code(&fdip(&["plan", "--scenario", s(&scn), "--out", s(&out)])), 0);
    assert_eq!(code(&fdip(&["simulate", "--scenario", s(&scn), "--out", s(&out), "--trace"])), 0);
    assert_eq!(code(&fdip(&["report", "--runs", s(tmp.path()), "--out", s(&tmp.path().join("rep"))])), 0);
    let mut files: Vec<PathBuf> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
    files.extend(fs::read_dir(tmp.path().join("rep")).unwrap().map(|e| e.unwrap().path()));
    let mut checked = 0;
    for f in files.iter().filter(|f| f.extension().is_some_and(|e| e == "csv")) {
        let mut rdr = csv::Reader::from_path(f).unwrap();
        let width = rdr.headers().unwrap().len();
        assert!(width > 1, "{}", f.display());
        for rec in rdr.records() {
            assert_eq!(rec.unwrap().len(), width, "{}", f.display());
        }
        checked += 1;
    }
    assert_eq!(checked, 8);
}

#[test]
fn branch_and_bound_agrees_with_oracle_mode() {
    let tmp = TempDir::new().unwrap();
    let scn = scenarios().join("toy/fdip.toml");
    let mut objectives = Vec::new();
    for mode in ["bnb", "oracle", "greedy"] {
        let out = tmp.path().join(mode);
        let r = fdip(&["plan", "--scenario", s(&scn), "--mode", mode, "--out", s(&out)]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
        objectives.push(AssignmentDoc::load(&out.join("assignment.json")).unwrap().objective);
    }
    assert_eq!(objectives[0], objectives[1]);
    assert!(objectives[2] <= objectives[0]);
}

#[test]
fn edited_scenario_rejects_old_assignment() {
    let tmp = TempDir::new().unwrap();
    let scn = copy_scenario("toy", &tmp);
    let out = tmp.path().join("run");
    assert_eq!(code(&fdip(&["plan", "--scenario", s(&scn), "--out", s(&out)])), 0);
    let demands = scn.with_file_name("demands.json");
    let text = fs::read_to_string(&demands).unwrap().replace("\"payload_bytes\": 200", "\"payload_bytes\": 201");
    fs::write(&demands, text).unwrap();
    let r = fdip(&["simulate", "--scenario", s(&scn), "--out", s(&out)]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("planned for scenario"), "{}", stderr(&r));
}

#[test]
fn tampered_assignment_fails_verification() {
    let tmp = TempDir::new().unwrap();
    let scn = scenarios().join("toy/fdip.toml");
    let out = tmp.path().join("run");
    assert_eq!(code(&fdip(&["plan", "--scenario", s(&scn), "--out", s(&out)])), 0);
    let path = out.join("assignment.json");
    let mut doc = AssignmentDoc::load(&path).unwrap();
    doc.accepted.get_mut("a").unwrap().group = 9;
    fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
    let r = fdip(&["verify", "--scenario", s(&scn), "--assignment", s(&path)]);
    assert_eq!(code(&r), 3);
    assert!(String::from_utf8_lossy(&r.stdout).contains("a: group 9 out of range"));
}

#[test]
fn oracle_cap_is_an_internal_limit() {
    let tmp = TempDir::new().unwrap();
    let scn = copy_scenario("toy", &tmp);
    let text = fs::read_to_string(&scn).unwrap().replace("paths_per_demand = 2", "paths_per_demand = 2\noracle_cap = 1");
    fs::write(&scn, text).unwrap();
    let r = fdip(&["plan", "--scenario", s(&scn), "--mode", "oracle", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&r), 4, "{}", stderr(&r));
}

#[test]
fn invalid_inputs_exit_with_code_two() {
    let tmp = TempDir::new().unwrap();
    let missing = fdip(&["plan", "--scenario", s(&tmp.path().join("nope.toml"))]);
    assert_eq!(code(&missing), 2);

    let scn = copy_scenario("toy", &tmp);
    let text = fs::read_to_string(&scn).unwrap().replace("[planner]", "[planner]\nbogus = 1");
    fs::write(&scn, text).unwrap();
    assert_eq!(code(&fdip(&["plan", "--scenario", s(&scn), "--out", s(&tmp.path().join("o"))])), 2);
}

#[test]
fn report_rejects_empty_and_corrupt_runs() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let r = fdip(&["report", "--runs", s(&empty), "--out", s(&tmp.path().join("rep"))]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("no runs found"));

    let bad = tmp.path().join("bad/run1");
    fs::create_dir_all(&bad).unwrap();
    fs::write(bad.join("plan_stats.json"), "{ not json").unwrap();
    let r = fdip(&["report", "--runs", s(&tmp.path().join("bad")), "--out", s(&tmp.path().join("rep"))]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains(s(&bad.join("plan_stats.json"))), "{}", stderr(&r));
}

#[test]
fn single_run_report_has_one_comparison_row() {
    let tmp = TempDir::new().unwrap();
    let scn = scenarios().join("toy/fdip.toml");
    let runs = tmp.path().join("runs");
    assert_eq!(code(&fdip(&["plan", "--scenario", s(&scn), "--out", s(&runs.join("only"))])), 0);
    let rep = tmp.path().join("rep");
    assert_eq!(code(&fdip(&["report", "--runs", s(&runs), "--out", s(&rep)])), 0);
    let table = fs::read_to_string(rep.join("comparison.csv")).unwrap();
    assert_eq!(table, "hop_limit,dip_objective,fdip_objective,difference\n3,,3,\n");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let scn = scenarios().join("toy/fdip.toml");
    let mut dirs = Vec::new();
    for i in 0..2 {
        let out = tmp.path().join(format!("run{i}"));
        assert_eq!(code(&fdip(&["plan", "--scenario", s(&scn), "--out", s(&out)])), 0);
        assert_eq!(code(&fdip(&["simulate", "--scenario", s(&scn), "--out", s(&out), "--trace"])), 0);
        dirs.push(out);
    }
    let names: Vec<_> = fs::read_dir(&dirs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 8);
    for n in names {
        assert_eq!(fs::read(dirs[0].join(&n)).unwrap(), fs::read(dirs[1].join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn seed_override_changes_background_only() {
    let tmp = TempDir::new().unwrap();
    let scn = scenarios().join("toy/fdip.toml");
    let out = tmp.path().join("run");
    assert_eq!(code(&fdip(&["plan", "--scenario", s(&scn), "--out", s(&out)])), 0);
    let mut delays = Vec::new();
    let mut traces = Vec::new();
    for seed in ["1", "2"] {
        let r = fdip(&["simulate", "--scenario", s(&scn), "--out", s(&out), "--seed", seed, "--be-load", "0.7", "--trace"]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
        delays.push(fs::read(out.join("delays.csv")).unwrap());
        traces.push(fs::read(out.join("trace.csv")).unwrap());
    }
    assert_eq!(delays[0], delays[1]);
    assert_ne!(traces[0], traces[1]);
}

#[test]
fn generated_demands_load_as_a_scenario() {
    let tmp = TempDir::new().unwrap();
    let scn = copy_scenario("atlanta", &tmp);
    let demands = scn.with_file_name("demands.json");
    let r = fdip(&[
        "gen-demands", "--sources", "N2,N10", "--sink", "N1", "--per-type", "2", "--seed", "5", "--out", s(&demands),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let r = fdip(&["plan", "--scenario", s(&scn), "--hop-limit", "3", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(String::from_utf8_lossy(&r.stdout).contains("of 6 demands"));
}
