//! Bandit-style JSON report ingestion (`results[]` with `test_id`,
//! `issue_severity`, `line_number`).

use std::path::PathBuf;

use serde::Deserialize;

use super::finding::{RawFinding, Severity};
use super::AnalysisError;

#[derive(Debug, Deserialize)]
struct Report {
    results: Vec<ReportResult>,
}

#[derive(Debug, Deserialize)]
struct ReportResult {
    test_id: String,
    #[serde(default)]
    issue_severity: Option<String>,
    #[serde(default)]
    issue_text: Option<String>,
    #[serde(default)]
    filename: Option<String>,
    line_number: i64,
}

pub fn parse_json_report(bytes: &[u8]) -> Result<Vec<RawFinding>, AnalysisError> {
    let report: Report = serde_json::from_slice(bytes)
        .map_err(|e| AnalysisError::Parse { format: "json_report", message: e.to_string() })?;
    Ok(report
        .results
        .into_iter()
        .map(|r| RawFinding {
            rule_id: r.test_id,
            severity: match r.issue_severity.as_deref().map(str::to_ascii_uppercase).as_deref() {
                Some("LOW") => Severity::Low,
                Some("MEDIUM") => Severity::Medium,
                Some("HIGH") => Severity::High,
                _ => Severity::Unknown,
            },
            message: r.issue_text.unwrap_or_default(),
            file: PathBuf::from(r.filename.unwrap_or_default()),
            line: if r.line_number >= 1 {
                u32::try_from(r.line_number).unwrap_or(u32::MAX)
            } else {
                1
            },
        })
        .collect())
}
