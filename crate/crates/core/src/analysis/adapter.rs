//! External analyzer adapters.
//!
//! An adapter either runs a tool as a subprocess (`command`, with `{file}`
//! and optional `{out}` placeholders) or replays outputs previously captured
//! from that tool (`replay_dir`, one `<sha256 of source>.json` per input).
//! Both paths feed the same format parsers.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wait_timeout::ChildExt;

use super::finding::{normalize_finding, CweMap, Finding, RawFinding, ToolKind};
use super::json_report::parse_json_report;
use super::sarif::parse_sarif;
use super::AnalysisError;

pub const DEFAULT_TIMEOUT_SECS: u64 = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Sarif,
    JsonReport,
}

impl ReportFormat {
    pub fn parse(self, bytes: &[u8]) -> Result<Vec<RawFinding>, AnalysisError> {
        match self {
            ReportFormat::Sarif => parse_sarif(bytes),
            ReportFormat::JsonReport => parse_json_report(bytes),
        }
    }
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_SECS
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterConfig {
    #[serde(default)]
    pub name: String,
    pub tool: ToolKind,
    pub format: ReportFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_dir: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl AdapterConfig {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        match (&self.command, &self.replay_dir) {
            (Some(cmd), None) if !cmd.is_empty() => Ok(()),
            (None, Some(_)) => Ok(()),
            _ => Err(AnalysisError::Config(format!(
                "adapter {:?}: set exactly one of a non-empty `command` or `replay_dir`",
                self.name
            ))),
        }
    }
}

/// Hex SHA-256 of source bytes; names replayed outputs.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Runs one adapter over one file and parses its output. A nonzero exit
/// status is not an error as long as the output parses.
pub fn run_analyzer(config: &AdapterConfig, source_file: &Path) -> Result<Vec<RawFinding>, AnalysisError> {
    config.validate()?;
    if !source_file.is_file() {
        return Err(AnalysisError::Environment(format!(
            "source file {} does not exist",
            source_file.display()
        )));
    }
    if let Some(dir) = &config.replay_dir {
        let source = std::fs::read(source_file)?;
        let hash = content_hash(&source);
        let recorded = dir.join(format!("{hash}.json"));
        let bytes = std::fs::read(&recorded).map_err(|_| AnalysisError::NoRecording {
            adapter: config.name.clone(),
            hash,
        })?;
        return config.format.parse(&bytes).map_err(|e| adapter_error(config, e, ""));
    }
    let command = config.command.as_ref().expect("validated");
    run_process(config, command, source_file)
}

fn adapter_error(config: &AdapterConfig, err: AnalysisError, stderr: &str) -> AnalysisError {
    AnalysisError::Adapter {
        adapter: config.name.clone(),
        message: err.to_string(),
        stderr: stderr.to_string(),
    }
}

fn run_process(
    config: &AdapterConfig,
    command: &[String],
    source_file: &Path,
) -> Result<Vec<RawFinding>, AnalysisError> {
    let out_dir = tempfile::tempdir()?;
    let out_path = out_dir.path().join("report.out");
    let uses_out = command.iter().any(|a| a.contains("{out}"));
    let file_arg = source_file.to_string_lossy();
    let out_arg = out_path.to_string_lossy();
    let args: Vec<String> = command
        .iter()
        .map(|a| a.replace("{file}", &file_arg).replace("{out}", &out_arg))
        .collect();

    let mut child = Command::new(&args[0])
        .args(&args[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => AnalysisError::ToolMissing(args[0].clone()),
            _ => AnalysisError::Environment(format!("failed to start {}: {e}", args[0])),
        })?;

    let mut stdout_pipe = child.stdout.take().expect("piped");
    let mut stderr_pipe = child.stderr.take().expect("piped");
    let stdout_reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        stdout_pipe.read_to_end(&mut buf).map(|_| buf)
    });
    let stderr_reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        stderr_pipe.read_to_end(&mut buf).map(|_| buf)
    });

    let status = child.wait_timeout(Duration::from_secs(config.timeout_secs))?;
    if status.is_none() {
        let _ = child.kill();
        let _ = child.wait();
        return Err(AnalysisError::Timeout {
            adapter: config.name.clone(),
            secs: config.timeout_secs,
        });
    }
    let stdout = stdout_reader.join().expect("stdout reader").unwrap_or_default();
    let stderr = stderr_reader.join().expect("stderr reader").unwrap_or_default();
    let stderr = String::from_utf8_lossy(&stderr);

    let output = if uses_out {
        std::fs::read(&out_path).map_err(|e| AnalysisError::Adapter {
            adapter: config.name.clone(),
            message: format!("tool wrote no report to {{out}}: {e}"),
            stderr: stderr.to_string(),
        })?
    } else {
        stdout
    };
    config.format.parse(&output).map_err(|e| adapter_error(config, e, &stderr))
}

/// An adapter bound to a CWE map, producing normalized findings.
#[derive(Debug, Clone)]
pub struct Analyzer {
    config: AdapterConfig,
    cwe_map: Arc<CweMap>,
}

impl Analyzer {
    pub fn new(config: AdapterConfig, cwe_map: Arc<CweMap>) -> Result<Self, AnalysisError> {
        config.validate()?;
        Ok(Analyzer { config, cwe_map })
    }

    pub fn config(&self) -> &AdapterConfig {
        &self.config
    }

    pub fn analyze_file(&self, path: &Path) -> Result<Vec<Finding>, AnalysisError> {
        Ok(run_analyzer(&self.config, path)?
            .into_iter()
            .map(|raw| normalize_finding(self.config.tool, raw, &self.cwe_map))
            .collect())
    }

    /// Writes `code` to a temporary file with the given extension and
    /// analyzes it.
    pub fn analyze_source(&self, code: &str, extension: &str) -> Result<Vec<Finding>, AnalysisError> {
        let dir = tempfile::tempdir()?;
        let path = dir.path().join(format!("sample.{extension}"));
        std::fs::write(&path, code)?;
        self.analyze_file(&path)
    }
}
