//! Report document and the run summary printed by the CLI.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use aware_core::hooks::MediationStage;
use aware_core::log::LogCategory;
use aware_core::sim::SimulationReport;
use aware_core::verify::Violation;

/// Pretty JSON with fields in declaration order, so equal reports are equal bytes.
pub fn to_json(report: &SimulationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports always serialize");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> serde_json::Result<SimulationReport> {
    serde_json::from_str(text)
}

pub fn write_report(path: &Path, report: &SimulationReport) -> io::Result<()> {
    fs::write(path, to_json(report))
}

pub fn read_report(path: &Path) -> io::Result<SimulationReport> {
    let text = fs::read_to_string(path)?;
    from_json(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// Text printed by `run`. Depends on nothing but its arguments.
pub fn summary(name: &str, report: &SimulationReport, violations: &[Violation], failed: &[String]) -> String {
    let s = &report.summary;
    let mut out = String::new();
    let _ = writeln!(out, "scenario={name}");
    let _ = writeln!(out, "events={} requests={} end_t={}", s.events, s.requests, s.end_t);
    let _ = writeln!(
        out,
        "blocked={} granted={}",
        report.log_count(LogCategory::Blocked),
        report.stage_count(MediationStage::Granted)
    );
    let _ = writeln!(
        out,
        "denied={} authorized={} terminated={} conventional_denied={} alerts={}",
        report.log_count(LogCategory::Denied),
        report.log_count(LogCategory::Authorized),
        report.log_count(LogCategory::Terminated),
        s.conventional_denied,
        s.violation_alerts
    );
    let _ = writeln!(out, "violations={}", violations.len());
    for v in violations {
        let at = v.t.map_or_else(|| "-".to_owned(), |t| t.to_string());
        let _ = writeln!(out, "  {} t={at}: {}", v.property.as_str(), v.detail);
    }
    for f in failed {
        let _ = writeln!(out, "expectation failed: {f}");
    }
    out
}
