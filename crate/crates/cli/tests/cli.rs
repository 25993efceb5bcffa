use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pxlap_cli::{RunConfig, RunReport};

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/interval_p2.json")
}

fn pxlap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pxlap")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(bundled()).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    path
}

fn load_report(dir: &Path) -> RunReport {
    RunReport::from_json(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn bundled_config_checks_pass() {
    let out = tempfile::tempdir().unwrap();
    let res = pxlap(&["check", bundled().to_str().unwrap(), "--out", out.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let report = load_report(out.path());
    let target = 2.0 * std::f64::consts::PI.powi(2);
    assert!((report.solver.lambda1 - target).abs() / target < 1e-2);
    assert_eq!(report.checks.len(), 8);
    let names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    for c in &report.checks {
        assert!(out.path().join(format!("check_{}.csv", c.name)).exists());
    }
    for f in ["eigenfunction.csv", "trace.csv"] {
        assert!(out.path().join(f).exists());
    }
}

#[test]
fn exponent_one_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |v| v["p"] = "1".into());
    let res = pxlap(&["solve", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("p > 1"), "{err}");
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |v| v["tolerance"] = 1e-6.into());
    let res = pxlap(&["solve", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn bad_expression_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |v| v["b"] = "1 + (".into());
    let res = pxlap(&["solve", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("b:"));
}

#[test]
fn solve_mode_reports_only_the_solver() {
    let out = tempfile::tempdir().unwrap();
    let res = pxlap(&["solve", bundled().to_str().unwrap(), "--out", out.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(res.status.code(), Some(0));
    let report = load_report(out.path());
    assert!(report.checks.is_empty());
    assert_eq!(report.mode, "solve");
    assert!(report.solver.converged);
    assert!(!report.timing.contains_key("checks"));
}

#[test]
fn non_convergence_exits_3_and_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |v| v["solver"]["max_iterations"] = 1.into());
    let out = dir.path().join("o");
    let res = pxlap(&["check", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(res.status.code(), Some(3));
    let report = load_report(&out);
    assert!(!report.solver.converged);
    assert!(report.checks.iter().all(|c| !c.applicable && !c.passed));
}

#[test]
fn failing_check_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |v| {
        v["checks"] = serde_json::json!([{ "kind": "moser", "count": 200, "iterations": 50 }]);
    });
    let out = dir.path().join("o");
    let res = pxlap(&["check", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(res.status.code(), Some(4));
    assert!(!load_report(&out).check("moser").unwrap().passed);
}

#[test]
fn seed_flag_overrides_config_seed() {
    let out = tempfile::tempdir().unwrap();
    let res = pxlap(&["solve", bundled().to_str().unwrap(), "--out", out.path().to_str().unwrap(), "--seed", "41", "--quiet"]);
    assert_eq!(res.status.code(), Some(0));
    let report = load_report(out.path());
    assert_eq!(report.config.seed, 41);
    assert!(report.solver.seed >= 41);
}

#[test]
fn report_round_trips() {
    let out = tempfile::tempdir().unwrap();
    pxlap(&["check", bundled().to_str().unwrap(), "--out", out.path().to_str().unwrap(), "--quiet"]);
    let text = std::fs::read_to_string(out.path().join("report.json")).unwrap();
    let report = RunReport::from_json(&text).unwrap();
    assert_eq!(report.to_json().unwrap(), text);
    assert_eq!(RunReport::from_json(&report.to_json().unwrap()).unwrap(), report);
}

#[test]
fn plot_row_counts() {
    let out = tempfile::tempdir().unwrap();
    pxlap(&["check", bundled().to_str().unwrap(), "--out", out.path().to_str().unwrap(), "--quiet"]);
    let report_path = out.path().join("report.json");
    let report = load_report(out.path());
    let rows = |kind: &str| {
        let res = pxlap(&["plot", report_path.to_str().unwrap(), "--kind", kind]);
        assert_eq!(res.status.code(), Some(0));
        let text = String::from_utf8(res.stdout).unwrap();
        let mut lines = text.lines();
        (lines.next().unwrap().to_string(), lines.count())
    };
    let (header, n) = rows("eigenfunction");
    assert!(header.starts_with('x'), "{header}");
    assert_eq!(n, 512);
    let (header, n) = rows("trace");
    assert_eq!(header, "iteration,rayleigh,residual");
    assert_eq!(n, report.solver.trace.len());
    let (header, n) = rows("oscillation");
    assert_eq!(header, "R,osc,bound");
    assert_eq!(n, 4);

    let plots = out.path().join("plots");
    let res = pxlap(&["plot", report_path.to_str().unwrap(), "--kind", "trace", "--out", plots.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    assert!(plots.join("plot_trace.csv").exists());
}

#[test]
fn plot_of_missing_section_fails() {
    let out = tempfile::tempdir().unwrap();
    pxlap(&["solve", bundled().to_str().unwrap(), "--out", out.path().to_str().unwrap(), "--quiet"]);
    let res = pxlap(&["plot", out.path().join("report.json").to_str().unwrap(), "--kind", "oscillation"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("no oscillation section"));
}

#[test]
fn oracle_prints_shooting_and_closed_form() {
    let res = pxlap(&["oracle", "--p", "2", "--length", "1"]);
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8(res.stdout).unwrap();
    let values: Vec<f64> = text.lines().map(|l| l.rsplit('=').next().unwrap().trim().parse().unwrap()).collect();
    let target = 2.0 * std::f64::consts::PI.powi(2);
    assert!(values.iter().all(|v| (v - target).abs() < 1e-8 * target), "{text}");
    assert_eq!(pxlap(&["oracle", "--p", "1", "--length", "1"]).status.code(), Some(2));
}

#[test]
fn two_dimensional_config_with_sp_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |v| {
        v["domain"] = serde_json::json!({ "dimension": 2, "extents": [[0.0, 1.0], [0.0, 1.0]], "node_counts": [17, 17] });
        v["p"] = "2 + 0.5*x".into();
        v["checks"] = serde_json::json!([
            { "kind": "eigen_identity" },
            { "kind": "sp_inequality", "center": [0.5, 0.5], "radius": 0.3 },
            { "kind": "comparison", "map": { "kind": "linear", "slope": 1.0 }, "f1": "1", "f2": "2 + x" },
            { "kind": "hopf" }
        ]);
    });
    let out = dir.path().join("o");
    let res = pxlap(&["check", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    let report = load_report(&out);
    let summary: Vec<String> = report.checks.iter().map(|c| format!("{} {} {}", c.name, c.passed, c.summary)).collect();
    assert_eq!(res.status.code(), Some(0), "{summary:?}");
    assert!(report.checks.iter().all(|c| c.applicable), "{summary:?}");
}

#[test]
fn bundled_config_matches_schema_fields() {
    let cfg = RunConfig::load(&bundled()).unwrap();
    cfg.validate().unwrap();
    let schema: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/run_config.schema.json")).unwrap(),
    )
    .unwrap();
    let props = schema["properties"].as_object().unwrap();
    let echoed = serde_json::to_value(&cfg).unwrap();
    for key in echoed.as_object().unwrap().keys() {
        assert!(props.contains_key(key), "schema lacks `{key}`");
    }
    let kinds: Vec<&str> = schema["properties"]["checks"]["items"]["oneOf"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["properties"]["kind"]["const"].as_str().unwrap())
        .collect();
    assert_eq!(kinds.len(), 11);
    for c in &cfg.checks {
        assert!(kinds.contains(&c.name()), "{}", c.name());
    }
}
