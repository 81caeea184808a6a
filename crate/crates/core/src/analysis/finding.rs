use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::cwe::Cwe;

/// Which configured analyzer slot produced a finding. Concrete tools are bound
/// to slots in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    AnalyzerA,
    AnalyzerB,
}

impl ToolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ToolKind::AnalyzerA => "analyzer_a",
            ToolKind::AnalyzerB => "analyzer_b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Low,
    Medium,
    High,
    Unknown,
}

/// A finding as reported by a tool, before CWE normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawFinding {
    pub rule_id: String,
    pub severity: Severity,
    pub message: String,
    pub file: PathBuf,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub tool: ToolKind,
    pub rule_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cwe: Option<Cwe>,
    pub severity: Severity,
    pub message: String,
    pub file: PathBuf,
    pub line: u32,
}

/// Rule-to-CWE mapping per analyzer slot.
///
/// File format: `{"analyzer_a": {"B602": "CWE-78", ...}, "analyzer_b": {...}}`.
/// Every value must be a well-formed `CWE-<digits>` string.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CweMap {
    entries: BTreeMap<ToolKind, BTreeMap<String, Cwe>>,
}

/// Mapping shipped with the crate for the default Bandit (slot a) and CodeQL
/// (slot b) rule sets.
pub const DEFAULT_CWE_MAP: &str = include_str!("../../data/cwe_map.json");

impl CweMap {
    pub fn parse(text: &str) -> Result<Self, AnalysisError> {
        serde_json::from_str(text).map_err(|e| AnalysisError::Config(format!("CWE map: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AnalysisError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn default_map() -> Self {
        Self::parse(DEFAULT_CWE_MAP).expect("bundled CWE map is valid")
    }

    pub fn insert(&mut self, tool: ToolKind, rule_id: impl Into<String>, cwe: Cwe) {
        self.entries.entry(tool).or_default().insert(rule_id.into(), cwe);
    }

    pub fn lookup(&self, tool: ToolKind, rule_id: &str) -> Option<&Cwe> {
        self.entries.get(&tool)?.get(rule_id)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Attaches a CWE to a raw finding. Unmapped rules keep `cwe = None`; they are
/// reported but do not count toward CWE-level metrics.
pub fn normalize_finding(tool: ToolKind, raw: RawFinding, map: &CweMap) -> Finding {
    let cwe = map.lookup(tool, &raw.rule_id).cloned();
    Finding {
        tool,
        rule_id: raw.rule_id,
        cwe,
        severity: raw.severity,
        message: raw.message,
        file: raw.file,
        line: raw.line.max(1),
    }
}
