use std::process::Command;

use riemap_cli::{builtin, load, parse_scenario, run_scenario, write_outputs, CliError, RunOptions};
use riemap_core::Verdict;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riemap"))
}

const SMALL: &str = r#"
name = "small"
[[manifold]]
name = "M"
coords = ["x1", "x2"]
metric = [["exp(2*x2)", 0], [0, 1]]
[[manifold]]
name = "N"
coords = ["y1", "y2"]
metric = [["exp(2*y2)", 0], [0, 1]]
[[map]]
name = "F"
source = "M"
target = "N"
components = ["x1", 0]
[[function]]
name = "g"
manifold = "N"
expr = "2*y2"
[[samples]]
name = "fiber"
manifold = "M"
points = [[0.1, 0.0], [1.0, 0.0]]
"#;

fn with_check(extra: &str) -> String {
    format!("{SMALL}\n{extra}")
}

#[test]
fn builtin_list_covers_the_required_scenarios() {
    let names = builtin::names();
    assert!(names.len() >= 5);
    for required in ["example_3_1", "example_5_1", "example_4_1", "rank2_lagrangian", "negative_controls"] {
        assert!(names.contains(&required), "{required}");
    }
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), names.len());
}

#[test]
fn every_builtin_meets_its_expectations() {
    for name in builtin::names() {
        let s = load(name).unwrap();
        let (report, _) = run_scenario(&s, &RunOptions::default()).unwrap();
        let unmet: Vec<String> = report
            .checks
            .iter()
            .flat_map(|c| c.reports.iter().filter(|e| !e.met).map(move |e| format!("{}/{}: {:?}", c.block, e.report.name, e.report.verdict)))
            .collect();
        assert!(unmet.is_empty(), "{name}: {unmet:?}");
        assert!(!report.nonconformant);
    }
}

#[test]
fn reports_are_byte_identical_for_a_fixed_seed() {
    let s = load("example_5_1").unwrap();
    let a = run_scenario(&s, &RunOptions::default()).unwrap().0.to_json();
    let b = run_scenario(&s, &RunOptions::default()).unwrap().0.to_json();
    assert_eq!(a, b);
    let other = run_scenario(&s, &RunOptions { seed: Some(1234), ..Default::default() }).unwrap().0.to_json();
    assert_ne!(a, other);
}

#[test]
fn literal_metric_marks_the_run_nonconformant() {
    let s = load("example_3_1").unwrap();
    let (report, _) = run_scenario(&s, &RunOptions { literal_metric: true, ..Default::default() }).unwrap();
    assert!(report.nonconformant);
    assert!(report.notes.iter().any(|n| n.starts_with("nonconformant")));
    assert!(report.passed());
    let sff = report.check("second_fundamental_form").unwrap().report("second_fundamental_form").unwrap();
    assert!(sff.values["b"].abs() < 1e-12);
}

#[test]
fn malformed_file_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = \"x\"\n[[manifold]\nname = \"M\"\n").unwrap();
    let out = bin().args(["run", path.to_str().unwrap(), "--out"]).arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert!(matches!(load(path.to_str().unwrap()), Err(CliError::Parse { line: 2, .. })));
}

#[test]
fn unknown_scenario_is_an_input_error() {
    let out = bin().args(["run", "no_such_scenario"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dangling_names_are_reference_errors() {
    let text = SMALL.replace("target = \"N\"", "target = \"Q\"");
    let s = parse_scenario(&text).unwrap();
    let err = run_scenario(&s, &RunOptions::default()).unwrap_err();
    assert!(matches!(&err, CliError::Reference { kind: "manifold", name, .. } if name == "Q"), "{err}");
}

#[test]
fn dangling_check_reference_is_isolated() {
    let text = with_check(
        r#"
[[check]]
name = "broken"
kind = "riemannian_map"
map = "G"
samples = "fiber"
[[check]]
name = "fine"
kind = "riemannian_map"
map = "F"
samples = "fiber"
"#,
    );
    let (report, _) = run_scenario(&parse_scenario(&text).unwrap(), &RunOptions::default()).unwrap();
    let broken = &report.check("broken").unwrap().reports[0];
    assert!(broken.report.error.as_deref().unwrap().contains("unknown map 'G'"));
    assert!(!broken.met);
    assert!(report.check("fine").unwrap().met);
    assert_eq!(report.exit_code(), 1);
}

#[test]
fn numeric_errors_do_not_suppress_siblings() {
    let text = r#"
name = "isolation"
[[manifold]]
name = "R"
coords = ["x"]
[[manifold]]
name = "T"
coords = ["y"]
[[map]]
name = "square"
source = "R"
target = "T"
components = ["x^2"]
[[samples]]
name = "origin"
manifold = "R"
points = [[0.0]]
[[samples]]
name = "away"
manifold = "R"
points = [[1.0]]
[[check]]
name = "at_critical_point"
kind = "riemannian_map"
map = "square"
samples = "origin"
[[check]]
name = "away_from_it"
kind = "tension"
map = "square"
samples = "away"
"#;
    let (report, _) = run_scenario(&parse_scenario(text).unwrap(), &RunOptions::default()).unwrap();
    let first = &report.checks[0].reports[0].report;
    assert!(first.error.is_some(), "{first:?}");
    assert_eq!(report.checks[1].reports[0].report.verdict, Verdict::Pass);
}

#[test]
fn expectation_inversion_controls_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let check = r#"
[[check]]
name = "wrong_g"
kind = "clairaut_certificate"
map = "F"
g = "g"
samples = "fiber"
"#;
    let failing = dir.path().join("failing.toml");
    std::fs::write(&failing, with_check(check)).unwrap();
    let inverted = dir.path().join("inverted.toml");
    std::fs::write(
        &inverted,
        with_check(&format!("{check}expect = {{ hypotheses = \"pass\", condition_i = \"fail\", condition_ii = \"fail\", eq_3_13 = \"fail\", eq_3_20 = \"fail\" }}\n")),
    )
    .unwrap();
    let run = |p: &std::path::Path| bin().args(["run", p.to_str().unwrap(), "--out"]).arg(dir.path().join("o")).output().unwrap();
    assert_eq!(run(&failing).status.code(), Some(1));
    assert_eq!(run(&inverted).status.code(), Some(0));
}

#[test]
fn tolerance_override_applies_to_unset_checks() {
    let text = with_check(
        r#"
[[check]]
name = "iso"
kind = "riemannian_map"
map = "F"
samples = "fiber"
[[check]]
name = "pinned"
kind = "riemannian_map"
map = "F"
samples = "fiber"
tol = 1e-3
"#,
    );
    let (report, _) = run_scenario(&parse_scenario(&text).unwrap(), &RunOptions { tolerance: Some(1e-4), ..Default::default() }).unwrap();
    assert_eq!(report.check("iso").unwrap().tolerance, 1e-4);
    assert_eq!(report.check("pinned").unwrap().tolerance, 1e-3);
}

#[test]
fn run_writes_report_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["run", "example_3_1", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["scenario"], "example_3_1");
    assert!(json["checks"].as_array().unwrap().iter().any(|c| c["block"] == "certificate"));
    let csv = std::fs::read_to_string(dir.path().join("traces").join("mixed_0.csv")).unwrap();
    assert!(csv.starts_with("t,y1,y2,v_y1,v_y2,omega,invariant\n"));
    assert_eq!(csv.lines().count(), 1002);
}

#[test]
fn trace_prints_csv_for_one_geodesic() {
    let out = bin().args(["trace", "example_3_1", "beta"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "t,y1,y2,v_y1,v_y2,omega,invariant");
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[1].split(',').count(), 7);
    let missing = bin().args(["trace", "example_3_1", "nope"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn write_outputs_skips_failed_curves() {
    let text = with_check(
        r#"
[[geodesic]]
name = "runaway"
manifold = "N"
start = [0.0, 0.0]
velocity = [0.0, 1.0]
t_end = 1e6
step = 1.0
"#,
    );
    let s = parse_scenario(&text).unwrap();
    let (report, curves) = run_scenario(&s, &RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &report, &curves, &s).unwrap();
    assert!(report.geodesics[0].error.is_some());
    assert!(!dir.path().join("traces").join("runaway.csv").exists());
}
