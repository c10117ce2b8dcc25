//! Residual reports and their CSV/JSON forms.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use qfrac_core::residual::TracePoint;
use qfrac_core::QuadratureSpec;
use serde::{Deserialize, Serialize};

use crate::config::Scenario;

pub const CSV_HEADER: &str = "scenario,field_id,qx_id,level,residual,skipped_fraction,wall_ms";

/// A check run by a scenario and what it must meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckHeader {
    pub check: String,
    pub description: String,
    /// `None` marks a check that is reported but not gated.
    pub tolerance: Option<f64>,
    /// Whether the refinement trace must decrease strictly.
    pub monotone: bool,
}

impl CheckHeader {
    pub fn gated(check: &str, tolerance: f64, monotone: bool, description: &str) -> Self {
        CheckHeader { check: check.into(), description: description.into(), tolerance: Some(tolerance), monotone }
    }

    pub fn reported(check: &str, description: &str) -> Self {
        CheckHeader { check: check.into(), description: description.into(), tolerance: None, monotone: false }
    }

    pub fn judge(&self, residual: f64, trace: &[TracePoint]) -> bool {
        let Some(tol) = self.tolerance else { return true };
        let decreasing = trace.windows(2).all(|w| w[1].residual < w[0].residual);
        residual.is_finite() && residual <= tol && (!self.monotone || decreasing)
    }
}

/// One executed case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub check: String,
    pub field_id: String,
    pub qx_id: String,
    pub q: Option<[f64; 4]>,
    pub x: Option<[f64; 4]>,
    pub residual: f64,
    pub trace: Vec<TracePoint>,
    pub skipped_fraction: f64,
    pub wall_ms: f64,
    pub passed: bool,
    /// Auxiliary quantities such as cross-term magnitudes.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub info: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check: String,
    pub cases: usize,
    pub max_residual: f64,
    pub tolerance: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: Scenario,
    pub seed: u64,
    pub quadrature: QuadratureSpec,
    pub header: Vec<CheckHeader>,
    pub rows: Vec<Case>,
    pub summary: Vec<CheckSummary>,
    pub notes: Vec<String>,
    pub passed: bool,
}

impl Report {
    /// Builds the summary from `rows`; the report passes iff every gated
    /// check does.
    pub fn new(scenario: Scenario, seed: u64, quadrature: QuadratureSpec, header: Vec<CheckHeader>, rows: Vec<Case>, notes: Vec<String>) -> Self {
        let summary: Vec<CheckSummary> = header
            .iter()
            .map(|h| {
                let mine: Vec<&Case> = rows.iter().filter(|c| c.check == h.check).collect();
                let max_residual = mine.iter().map(|c| c.residual).fold(0.0, |m: f64, r| if r.is_nan() { f64::NAN } else { m.max(r) });
                CheckSummary { check: h.check.clone(), cases: mine.len(), max_residual, tolerance: h.tolerance, passed: mine.iter().all(|c| c.passed) }
            })
            .collect();
        let passed = summary.iter().all(|s| s.passed);
        Report { scenario, seed, quadrature, header, rows, summary, notes, passed }
    }

    pub fn check(&self, name: &str) -> Option<&CheckSummary> {
        self.summary.iter().find(|s| s.check == name)
    }

    pub fn cases<'a>(&'a self, check: &'a str) -> impl Iterator<Item = &'a Case> + 'a {
        self.rows.iter().filter(move |c| c.check == check)
    }

    /// Human-readable summary, one line per check.
    pub fn summary_lines(&self) -> Vec<String> {
        self.summary
            .iter()
            .map(|s| {
                let status = match (s.tolerance, s.passed) {
                    (None, _) => "REPORT",
                    (Some(_), true) => "PASS",
                    (Some(_), false) => "FAIL",
                };
                let tol = s.tolerance.map_or("-".to_string(), |t| format!("{t:e}"));
                format!("{status} {} cases={} max_residual={:e} tolerance={tol}", s.check, s.cases, s.max_residual)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Full-precision decimal form: 17 significant digits.
pub fn float17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// One line per refinement level of every case. `wall_ms` is written as zero
/// unless `timings` is set, so seeded runs are byte-identical.
pub fn write_csv<W: Write>(report: &Report, timings: bool, mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for c in &report.rows {
        let wall = if timings { c.wall_ms } else { 0.0 };
        for p in &c.trace {
            writeln!(w, "{},{},{},{},{},{},{}", c.check, c.field_id, c.qx_id, p.level, float17(p.residual), float17(p.skipped_fraction), float17(wall))?;
        }
    }
    Ok(())
}

struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(float17(value).as_bytes())
    }
}

pub fn write_json<W: Write>(report: &Report, w: W) -> io::Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(w, Digits17);
    report.serialize(&mut ser).map_err(io::Error::other)
}

pub fn emit(report: &Report, format: Format, timings: bool, path: &Path) -> io::Result<()> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(report, timings, &mut buf)?,
        Format::Json => {
            write_json(report, &mut buf)?;
            buf.push(b'\n');
        }
    }
    std::fs::write(path, buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let header = vec![CheckHeader::gated("demo", 1e-3, true, "demo check"), CheckHeader::reported("info", "not gated")];
        let trace = vec![
            TracePoint { level: 0, residual: 0.1, order: 8, epsilon: 0.08, skipped_fraction: 0.0 },
            TracePoint { level: 1, residual: 1.0 / 3.0 * 1e-4, order: 16, epsilon: 0.04, skipped_fraction: 1e-3 },
        ];
        let case = Case {
            check: "demo".into(),
            field_id: "one".into(),
            qx_id: "p00".into(),
            q: Some([0.1, 0.2, 0.3, 0.4]),
            x: None,
            residual: trace[1].residual,
            passed: header[0].judge(trace[1].residual, &trace),
            trace,
            skipped_fraction: 1e-3,
            wall_ms: 12.5,
            info: BTreeMap::from([("cross".to_string(), 0.25)]),
        };
        Report::new(Scenario::RlConst, 3, QuadratureSpec::default(), header, vec![case], vec!["note".into()])
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = Report::new(Scenario::RlConst, 1, QuadratureSpec::default(), vec![], vec![], vec![]);
        let mut buf = Vec::new();
        write_csv(&r, false, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
        assert!(r.passed);
    }

    #[test]
    fn csv_rows_per_level_with_17_digits() {
        let r = sample();
        assert!(r.passed);
        let mut buf = Vec::new();
        write_csv(&r, false, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2], "demo,one,p00,1,3.3333333333333335e-5,1.0000000000000000e-3,0.0000000000000000e0");
        let v: f64 = lines[2].split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(v, 1.0 / 3.0 * 1e-4);
        let mut timed = Vec::new();
        write_csv(&r, true, &mut timed).unwrap();
        assert!(String::from_utf8(timed).unwrap().ends_with(",1.2500000000000000e1\n"));
    }

    #[test]
    fn json_round_trips() {
        let r = sample();
        let mut buf = Vec::new();
        write_json(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("3.3333333333333335e-5"));
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn judging() {
        let h = CheckHeader::gated("c", 1e-2, true, "");
        let up = [
            TracePoint { level: 0, residual: 1e-4, order: 0, epsilon: 0.0, skipped_fraction: 0.0 },
            TracePoint { level: 1, residual: 1e-3, order: 0, epsilon: 0.0, skipped_fraction: 0.0 },
        ];
        assert!(!h.judge(1e-3, &up));
        assert!(CheckHeader::gated("c", 1e-2, false, "").judge(1e-3, &up));
        assert!(!h.judge(f64::NAN, &up[..1]));
        assert!(CheckHeader::reported("c", "").judge(5.0, &up));
    }
}
