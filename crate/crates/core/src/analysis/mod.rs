//! Static-analyzer adapters, CWE normalization and before/after diffing.

mod adapter;
mod diff;
mod finding;
mod json_report;
mod sarif;

use thiserror::Error;

pub use adapter::{content_hash, run_analyzer, AdapterConfig, Analyzer, ReportFormat, DEFAULT_TIMEOUT_SECS};
pub use diff::{cwe_set, diff_cwe_sets, diff_findings, FindingDiff};
pub use finding::{normalize_finding, CweMap, Finding, RawFinding, Severity, ToolKind, DEFAULT_CWE_MAP};
pub use json_report::parse_json_report;
pub use sarif::parse_sarif;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("analyzer binary `{0}` not found on this host")]
    ToolMissing(String),
    #[error("analyzer environment: {0}")]
    Environment(String),
    #[error("analyzer {adapter} timed out after {secs}s")]
    Timeout { adapter: String, secs: u64 },
    #[error("analyzer {adapter}: {message}{}", if stderr.is_empty() { String::new() } else { format!(" (stderr: {})", stderr.trim()) })]
    Adapter { adapter: String, message: String, stderr: String },
    #[error("analyzer {adapter}: no recorded output for source {hash}")]
    NoRecording { adapter: String, hash: String },
    #[error("{format} parse error: {message}")]
    Parse { format: &'static str, message: String },
    #[error("analysis config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
