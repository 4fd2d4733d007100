use super::*;

fn parse(text: &str) -> Result<ExperimentConfig> {
    ExperimentConfig::from_json(text)
}

#[test]
fn minimal_wedge_config_gives_two_passing_cells() {
    let config = parse(r#"{"kind": "counterexample", "example": "wedge", "theta0": 2.356, "p": [4, 8]}"#).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = run(&config, dir.path(), RunOptions::default()).unwrap();
    assert_eq!(summary.index.cells.len(), 2);
    assert_eq!(summary.exit_status(), ExitStatus::Ok, "{:?}", summary.index.cells);
    let table = report_index(dir.path()).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert!(table.rows.iter().all(|r| r.pass == Some(true) && r.wall_seconds.is_some()));
}

#[test]
fn empty_sweep_is_a_noop() {
    let config = parse(r#"{"kind": "probe", "sweep": {"theta": []}}"#).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = run(&config, dir.path(), RunOptions::default()).unwrap();
    assert!(summary.index.cells.is_empty());
    assert_eq!(summary.exit_status(), ExitStatus::Ok);
    let table = report_index(dir.path()).unwrap();
    assert!(table.rows.is_empty());
    assert_eq!(table.warnings.len(), 1);
}

#[test]
fn unknown_domain_type_is_a_config_error() {
    let err = parse(r#"{"kind": "regdist", "domain": {"type": "spiral", "delta": 0.5, "eps0": 0.1, "R0": 1}}"#).unwrap_err();
    assert!(matches!(err, Error::Config { .. }), "{err}");
    assert_eq!(ExitStatus::for_error(&err) as i32, 2);
}

#[test]
fn config_errors_name_the_offending_key() {
    let err = parse(r#"{"kind": "probe", "tolerances": {"picard": 1e-3}}"#).unwrap_err();
    let Error::Config { path, .. } = err else { panic!() };
    assert!(path.starts_with("tolerances"), "{path}");
    let err = parse(r#"{"kind": "probe", "sweep": {"gamma": [1]}}"#).unwrap_err();
    let Error::Config { path, .. } = err else { panic!() };
    assert_eq!(path, "sweep.gamma");
    let err = parse(r#"{"kind": "probe", "p": [2, 0.5]}"#).unwrap_err();
    let Error::Config { path, .. } = err else { panic!() };
    assert_eq!(path, "p[1]");
}

#[test]
fn cells_are_the_cartesian_product() {
    let config = parse(r#"{"kind": "counterexample", "example": "wedge", "theta0": 2.5, "p": [4, 8], "sweep": {"radius": [0.5, 1, 2]}}"#).unwrap();
    let cells = expand_cells(&config);
    assert_eq!(cells.len(), 6);
    assert_eq!(cells[5].labels()["radius"], 2.0);
    assert_eq!(cells[5].p, 8.0);
}

#[test]
fn reports_are_deterministic_and_stamped() {
    let text = r#"{"kind": "regdist", "domain": {"type": "sawtooth", "slope": 0.05, "period": 0.2, "delta": 0.5, "eps0": 0.05, "R0": 1}, "n": [7], "seed": 7}"#;
    let config = parse(text).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = run(&config, a.path(), RunOptions { jobs: 1 }).unwrap();
    run(&config, b.path(), RunOptions { jobs: 3 }).unwrap();
    assert_eq!(sa.exit_status(), ExitStatus::Ok, "{:?}", sa.index.cells);
    for name in ["index.json", "cells/cell-0000.json", "cells/cell-0000-grid.csv"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let report: crate::norms::NormReport =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("cells/cell-0000.json")).unwrap()).unwrap();
    for key in ["version", "config_hash", "seed", "grid_sizes", "tolerances"] {
        assert!(report.metadata.contains_key(key), "{key}");
    }
    assert_eq!(report.metadata["config_hash"], config.hash());
}

#[test]
fn corrupt_reports_are_listed_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let mut report = crate::norms::NormReport::new("x");
    report.meta("version", "0.0.1");
    report.write_json(&dir.path().join("a.json")).unwrap();
    report.meta("version", "0.0.2");
    report.write_json(&dir.path().join("b.json")).unwrap();
    std::fs::write(dir.path().join("c.json"), "{ not json").unwrap();
    let table = report_index(dir.path()).unwrap();
    assert_eq!(table.rows.len(), 3);
    assert_eq!(table.rows[0].version.as_deref(), Some("0.0.1"));
    assert_eq!(table.rows[1].version.as_deref(), Some("0.0.2"));
    assert!(!table.rows[2].readable);
    assert!(table.to_csv().unwrap().contains("unreadable"));
}

#[test]
fn strict_profile_tightens_tolerances() {
    let strict = Tolerances::default().resolve(ToleranceProfile::Strict);
    let default = Tolerances::default().resolve(ToleranceProfile::Default);
    assert!(strict.picard_tol < default.picard_tol);
    assert!(strict.trace_tolerance < default.trace_tolerance);
    let custom = Tolerances { picard_tol: Some(1e-6), ..Default::default() }.resolve(ToleranceProfile::Strict);
    assert_eq!(custom.picard_tol, 1e-6);
}
