//! SARIF 2.1.0 ingestion (`runs[].results[]`).

use std::path::PathBuf;

use serde::Deserialize;

use super::finding::{RawFinding, Severity};
use super::AnalysisError;

#[derive(Debug, Deserialize)]
struct SarifLog {
    #[serde(default)]
    version: Option<String>,
    runs: Vec<Run>,
}

#[derive(Debug, Deserialize)]
struct Run {
    #[serde(default)]
    tool: Option<Tool>,
    #[serde(default)]
    results: Vec<SarifResult>,
}

#[derive(Debug, Deserialize)]
struct Tool {
    driver: Driver,
}

#[derive(Debug, Deserialize)]
struct Driver {
    #[serde(default)]
    rules: Vec<Rule>,
}

#[derive(Debug, Deserialize)]
struct Rule {
    id: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SarifResult {
    #[serde(default)]
    rule_id: Option<String>,
    #[serde(default)]
    rule_index: Option<usize>,
    #[serde(default)]
    rule: Option<RuleRef>,
    #[serde(default)]
    level: Option<String>,
    #[serde(default)]
    message: Message,
    #[serde(default)]
    locations: Vec<Location>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RuleRef {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    index: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
struct Message {
    #[serde(default)]
    text: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Location {
    #[serde(default)]
    physical_location: Option<PhysicalLocation>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct PhysicalLocation {
    #[serde(default)]
    artifact_location: Option<ArtifactLocation>,
    #[serde(default)]
    region: Option<Region>,
}

#[derive(Debug, Deserialize)]
struct ArtifactLocation {
    #[serde(default)]
    uri: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Region {
    #[serde(default)]
    start_line: Option<i64>,
}

fn severity_from_level(level: Option<&str>) -> Severity {
    // SARIF default level is "warning" when absent.
    match level.unwrap_or("warning") {
        "error" => Severity::High,
        "warning" => Severity::Medium,
        "note" => Severity::Low,
        _ => Severity::Unknown,
    }
}

/// Parses a SARIF 2.1.0 log into raw findings, one per result, across all runs.
///
/// The rule id is taken from `ruleId`, then `rule.id`, then the driver rule at
/// `ruleIndex`/`rule.index`. Location is `locations[0].physicalLocation`; a
/// missing or non-positive start line becomes line 1.
pub fn parse_sarif(bytes: &[u8]) -> Result<Vec<RawFinding>, AnalysisError> {
    let log: SarifLog = serde_json::from_slice(bytes)
        .map_err(|e| AnalysisError::Parse { format: "sarif", message: e.to_string() })?;
    if let Some(v) = log.version.as_deref() {
        if v != "2.1.0" {
            return Err(AnalysisError::Parse {
                format: "sarif",
                message: format!("unsupported SARIF version {v}"),
            });
        }
    }
    let mut findings = Vec::new();
    for run in &log.runs {
        let rules = run.tool.as_ref().map(|t| t.driver.rules.as_slice()).unwrap_or(&[]);
        for result in &run.results {
            let by_index = result
                .rule_index
                .or_else(|| result.rule.as_ref().and_then(|r| r.index))
                .and_then(|i| rules.get(i))
                .map(|r| r.id.clone());
            let rule_id = result
                .rule_id
                .clone()
                .or_else(|| result.rule.as_ref().and_then(|r| r.id.clone()))
                .or(by_index)
                .ok_or_else(|| AnalysisError::Parse {
                    format: "sarif",
                    message: "result without a rule id".into(),
                })?;
            let physical = result.locations.first().and_then(|l| l.physical_location.as_ref());
            let file = physical
                .and_then(|p| p.artifact_location.as_ref())
                .and_then(|a| a.uri.clone())
                .unwrap_or_default();
            let line = physical
                .and_then(|p| p.region.as_ref())
                .and_then(|r| r.start_line)
                .filter(|&l| l >= 1)
                .map(|l| u32::try_from(l).unwrap_or(u32::MAX))
                .unwrap_or(1);
            findings.push(RawFinding {
                rule_id,
                severity: severity_from_level(result.level.as_deref()),
                message: result.message.text.clone().unwrap_or_default(),
                file: PathBuf::from(file),
                line,
            });
        }
    }
    Ok(findings)
}
