//! Configuration file and its layering under command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sosec_core::analysis::{AdapterConfig, ReportFormat, ToolKind, DEFAULT_TIMEOUT_SECS};
use sosec_core::retrieval::DEFAULT_K;
use sosec_core::revision::{ProviderConfig, DEFAULT_BUDGET};

pub const MIN_BUDGET: usize = 1000;

/// One analyzer as written in the config file, keyed by name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerEntry {
    pub tool: ToolKind,
    pub format: ReportFormat,
    #[serde(default)]
    pub command: Option<Vec<String>>,
    #[serde(default)]
    pub replay_dir: Option<PathBuf>,
    #[serde(default)]
    pub timeout_secs: Option<u64>,
}

/// Contents of the TOML file passed with `--config`. Every field is optional;
/// relative paths are resolved against the file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub kb_path: Option<PathBuf>,
    pub index_path: Option<PathBuf>,
    pub keyword_path: Option<PathBuf>,
    pub cwe_map_path: Option<PathBuf>,
    pub supported_cwes_path: Option<PathBuf>,
    pub k: Option<usize>,
    pub budget: Option<usize>,
    pub workers: Option<usize>,
    pub min_upvote: Option<i64>,
    pub dual_tool_filter: Option<bool>,
    pub provider: Option<ProviderConfig>,
    #[serde(default)]
    pub analyzers: BTreeMap<String, AnalyzerEntry>,
}

#[derive(Debug, Clone)]
pub struct GlobalConfig {
    pub kb_path: Option<PathBuf>,
    pub index_path: Option<PathBuf>,
    pub keyword_path: Option<PathBuf>,
    pub cwe_map_path: Option<PathBuf>,
    pub supported_cwes_path: Option<PathBuf>,
    pub provider: ProviderConfig,
    pub k: usize,
    pub budget: usize,
    pub workers: usize,
    pub min_upvote: i64,
    pub dual_tool_filter: bool,
    pub analyzers: BTreeMap<String, AdapterConfig>,
}

fn resolve(base: &Path, p: Option<PathBuf>) -> Option<PathBuf> {
    p.map(|p| if p.is_absolute() { p } else { base.join(p) })
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get().min(8))
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.kb_path = resolve(base, cfg.kb_path);
        cfg.index_path = resolve(base, cfg.index_path);
        cfg.keyword_path = resolve(base, cfg.keyword_path);
        cfg.cwe_map_path = resolve(base, cfg.cwe_map_path);
        cfg.supported_cwes_path = resolve(base, cfg.supported_cwes_path);
        if let Some(p) = cfg.provider.as_mut() {
            p.transcript_path = resolve(base, p.transcript_path.take());
        }
        for a in cfg.analyzers.values_mut() {
            a.replay_dir = resolve(base, a.replay_dir.take());
        }
        Ok(cfg)
    }
}

impl GlobalConfig {
    pub fn from_file(file: FileConfig) -> Self {
        let analyzers = file
            .analyzers
            .into_iter()
            .map(|(name, a)| {
                let cfg = AdapterConfig {
                    name: name.clone(),
                    tool: a.tool,
                    format: a.format,
                    command: a.command,
                    replay_dir: a.replay_dir,
                    timeout_secs: a.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS),
                };
                (name, cfg)
            })
            .collect();
        GlobalConfig {
            kb_path: file.kb_path,
            index_path: file.index_path,
            keyword_path: file.keyword_path,
            cwe_map_path: file.cwe_map_path,
            supported_cwes_path: file.supported_cwes_path,
            provider: file.provider.unwrap_or_else(|| ProviderConfig::mock(Default::default())),
            k: file.k.unwrap_or(DEFAULT_K),
            budget: file.budget.unwrap_or(DEFAULT_BUDGET),
            workers: file.workers.unwrap_or_else(default_workers),
            min_upvote: file.min_upvote.unwrap_or(1),
            dual_tool_filter: file.dual_tool_filter.unwrap_or(true),
            analyzers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            bail!("k must be at least 1");
        }
        if self.budget < MIN_BUDGET {
            bail!("budget must be at least {MIN_BUDGET} characters");
        }
        if self.workers < 1 {
            bail!("workers must be at least 1");
        }
        Ok(())
    }

    /// Named adapter from the config, or the built-in `bandit` process adapter.
    pub fn adapter(&self, name: &str) -> Option<AdapterConfig> {
        if let Some(a) = self.analyzers.get(name) {
            return Some(a.clone());
        }
        (name == "bandit").then(|| AdapterConfig {
            name: "bandit".into(),
            tool: ToolKind::AnalyzerA,
            format: ReportFormat::JsonReport,
            command: Some(["bandit", "-q", "-f", "json", "-o", "{out}", "{file}"].map(String::from).to_vec()),
            replay_dir: None,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
        })
    }
}
