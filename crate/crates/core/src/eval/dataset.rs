use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::cwe::Cwe;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Sallm,
    Llmseceval,
    Lmsys,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    Python,
    C,
    Other,
}

impl Language {
    /// File extension used when handing code to an analyzer.
    pub fn extension(self) -> &'static str {
        match self {
            Language::Python => "py",
            Language::C => "c",
            Language::Other => "txt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSample {
    pub sample_id: String,
    pub dataset: Dataset,
    pub language: Language,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labeled_cwe: Option<Cwe>,
}

/// Parses a JSONL dataset. Every invalid line is reported, not just the first.
pub fn parse_samples<R: BufRead>(input: R) -> Result<Vec<CodeSample>, EvalError> {
    let mut samples = Vec::new();
    let mut problems = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| EvalError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CodeSample>(&line) {
            Ok(sample) if sample.code.trim().is_empty() => {
                problems.push((line_no, "`code` is empty".to_string()));
            }
            Ok(sample) if !ids.insert(sample.sample_id.clone()) => {
                problems.push((line_no, format!("duplicate sample_id {:?}", sample.sample_id)));
            }
            Ok(sample) => samples.push(sample),
            Err(e) => problems.push((line_no, e.to_string())),
        }
    }
    if !problems.is_empty() {
        return Err(EvalError::Schema(problems));
    }
    Ok(samples)
}

pub fn load_samples(path: &Path) -> Result<Vec<CodeSample>, EvalError> {
    let file = std::fs::File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    parse_samples(std::io::BufReader::new(file))
}
