//! Evaluation harness: datasets, experiment arms and metrics.

mod dataset;
mod metrics;
mod pipeline;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{load_samples, parse_samples, CodeSample, Dataset, Language};
pub use metrics::{
    compute_metrics, per_cwe_breakdown, percent_tenths, round_percent, ArmMetrics, Counts, CweTally, EvalReport,
    SampleOutcome, GRANULARITY_NOTE,
};
pub use pipeline::{analyze_samples, dual_tool_filter, filter_supported, run_arm, AnalyzedSample, ArmRun, RunOptions};

use crate::analysis::AnalysisError;
use crate::cwe::Cwe;
use crate::retrieval::RetrievalError;
use crate::revision::RevisionError;

pub const DEFAULT_SUPPORTED_CWES: &str = include_str!("../../data/supported_cwes.txt");

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Io(String),
    #[error("invalid dataset:{}", .0.iter().map(|(l, m)| format!("\n  line {l}: {m}")).collect::<String>())]
    Schema(Vec<(usize, String)>),
    #[error("evaluation config: {0}")]
    Config(String),
    #[error("cwe_label arm needs labeled_cwe on every sample; missing for: {}", .0.join(", "))]
    MissingLabels(Vec<String>),
    #[error("sosecure arm needs a retrieval index")]
    MissingIndex,
    #[error("dataset mixes {0:?}; evaluate one dataset at a time")]
    MixedDatasets(Vec<Dataset>),
    #[error("no outcomes to aggregate")]
    NoOutcomes,
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Revision(#[from] RevisionError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    PromptOnly,
    CweLabel,
    RevisionOnly,
    Sosecure,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::PromptOnly, Arm::CweLabel, Arm::RevisionOnly, Arm::Sosecure];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::PromptOnly => "prompt_only",
            Arm::CweLabel => "cwe_label",
            Arm::RevisionOnly => "revision_only",
            Arm::Sosecure => "sosecure",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arm {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Arm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| EvalError::Config(format!("unknown arm {s:?} (expected prompt_only, cwe_label, revision_only or sosecure)")))
    }
}

/// CWEs the evaluation counts. Findings outside this set are ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportedCwes(BTreeSet<Cwe>);

impl SupportedCwes {
    pub fn new(cwes: impl IntoIterator<Item = Cwe>) -> Result<Self, EvalError> {
        let set: BTreeSet<Cwe> = cwes.into_iter().collect();
        if set.is_empty() {
            return Err(EvalError::Config("supported CWE list is empty".into()));
        }
        Ok(Self(set))
    }

    /// One CWE per line; `#` comments and blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let mut set = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cwe = Cwe::new(line).map_err(|e| EvalError::Config(format!("supported CWEs line {}: {e}", i + 1)))?;
            set.insert(cwe);
        }
        Self::new(set)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn default_set() -> Self {
        Self::parse(DEFAULT_SUPPORTED_CWES).expect("bundled CWE list is valid")
    }

    pub fn contains(&self, cwe: &Cwe) -> bool {
        self.0.contains(cwe)
    }

    pub fn restrict(&self, cwes: &BTreeSet<Cwe>) -> BTreeSet<Cwe> {
        cwes.intersection(&self.0).cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Cwe> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
