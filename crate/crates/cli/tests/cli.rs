use std::path::Path;
use std::process::{Command, Output};

use qfrac_cli::report::CSV_HEADER;
use qfrac_cli::{run, Report, Scenario, ScenarioConfig};

fn qfrac(config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfrac")).args(["run", "--config"]).arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

#[test]
fn rl_const_passes_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"scenario": "rl_const"}"#).unwrap();
    let out = dir.path().join("r.csv");
    let o = qfrac(&config, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    assert_eq!(text.lines().count(), 1 + 41);
    assert!(String::from_utf8_lossy(&o.stderr).contains("PASS rl_const"));
}

#[test]
fn unknown_scenario_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"scenario": "rl_sideways"}"#).unwrap();
    let o = qfrac(&config, &dir.path().join("r.csv"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("config error: scenario:"), "{err}");
}

#[test]
fn json_output_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"scenario": "frac_stokes", "max_fields": 2, "samples": 2}"#).unwrap();
    let out = dir.path().join("r.json");
    let o = qfrac(&config, &out, &["--format", "json", "--refine", "2", "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Report = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.seed, 5);
    assert_eq!(report.quadrature.refine_levels, 2);
    assert_eq!(report.rows.len(), 2);
    assert!(report.rows.iter().all(|c| c.trace.len() == 2 && c.wall_ms > 0.0));
    assert_eq!(report.header[0].tolerance, Some(1e-5));
}

#[test]
fn failing_scenario_exits_one() {
    // a coarse difference step cannot reach 1e-10
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"scenario": "rl_const", "quadrature": {"fd_step": 1e-2}}"#).unwrap();
    let o = qfrac(&config, &dir.path().join("r.csv"), &[]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn rows_match_cases_and_gates() {
    let mut cfg = ScenarioConfig::new(Scenario::GammaResolution);
    cfg.max_fields = Some(3);
    cfg.samples = 2;
    let r = run(&cfg).unwrap();
    assert_eq!(r.rows.len(), 6);
    assert!(r.passed);
    assert!(r.notes[0].contains("from_eq5"));
}
