//! Model providers: a live chat-completions client, a recorded-transcript
//! replayer and a deterministic mock.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, LazyLock, Mutex};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompt::{prompt_hash, RevisionPrompt};

pub const API_KEY_ENV: &str = "SOSEC_API_KEY";

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport: {message}")]
    Transport { message: String, transient: bool },
    #[error("no transcript response for prompt hash {hash}")]
    TranscriptMiss { hash: String },
    #[error("provider config: {0}")]
    Config(String),
    #[error("malformed provider response: {0}")]
    BadResponse(String),
}

pub trait Provider: Send + Sync {
    fn complete(&self, prompt: &RevisionPrompt) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    LiveHttp,
    RecordedTranscript,
    DeterministicMock,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockBehavior {
    /// Rewrites shell-invoking subprocess calls into argument-list form.
    #[default]
    Rewrite,
    /// Returns the original code unchanged, fenced.
    Echo,
    /// Returns prose without a code block.
    NoFence,
}

fn default_max_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_max_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_name: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub initial_backoff_ms: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    /// Minimum spacing between request starts; 0 disables rate limiting.
    #[serde(default)]
    pub min_request_interval_ms: u64,
    #[serde(default)]
    pub transcript_path: Option<PathBuf>,
    #[serde(default)]
    pub mock_behavior: MockBehavior,
}

impl ProviderConfig {
    pub fn mock(behavior: MockBehavior) -> Self {
        ProviderConfig {
            kind: ProviderKind::DeterministicMock,
            endpoint: None,
            model_name: None,
            temperature: 0.0,
            max_retries: default_max_retries(),
            initial_backoff_ms: default_backoff_ms(),
            max_in_flight: default_max_in_flight(),
            min_request_interval_ms: 0,
            transcript_path: None,
            mock_behavior: behavior,
        }
    }

    pub fn recorded(path: impl Into<PathBuf>) -> Self {
        ProviderConfig {
            kind: ProviderKind::RecordedTranscript,
            transcript_path: Some(path.into()),
            ..Self::mock(MockBehavior::default())
        }
    }

    pub fn live(endpoint: impl Into<String>, model_name: impl Into<String>) -> Self {
        ProviderConfig {
            kind: ProviderKind::LiveHttp,
            endpoint: Some(endpoint.into()),
            model_name: Some(model_name.into()),
            ..Self::mock(MockBehavior::default())
        }
    }

    /// Instantiates the provider. The live provider reads its API key from
    /// `SOSEC_API_KEY`.
    pub fn build(&self) -> Result<Box<dyn Provider>, ProviderError> {
        match self.kind {
            ProviderKind::DeterministicMock => Ok(Box::new(MockProvider::new(self.mock_behavior))),
            ProviderKind::RecordedTranscript => {
                let path = self.transcript_path.as_ref().ok_or_else(|| {
                    ProviderError::Config("recorded provider requires a transcript path".into())
                })?;
                Ok(Box::new(TranscriptProvider::load(path)?))
            }
            ProviderKind::LiveHttp => {
                let key = std::env::var(API_KEY_ENV).map_err(|_| {
                    ProviderError::Config(format!("live provider requires {API_KEY_ENV} in the environment"))
                })?;
                Ok(Box::new(LiveProvider::new(self.clone(), key)?))
            }
        }
    }
}

fn fenced_response(preamble: &str, code: &str) -> String {
    format!("{preamble}\n\n```\n{code}\n```\n")
}

static SHELL_CALL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(subprocess\.(?:call|run|Popen|check_call|check_output))\(\s*([^,()]+(?:\([^()]*\))?[^,()]*?)\s*,\s*shell\s*=\s*True").unwrap()
});
static OS_SYSTEM: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"os\.system\(\s*([^()]+(?:\([^()]*\))?[^()]*?)\s*\)").unwrap());

/// The rewrite applied by [`MockBehavior::Rewrite`].
pub fn rewrite_shell_calls(code: &str) -> String {
    let rewritten = SHELL_CALL.replace_all(code, "$1(shlex.split($2)");
    let rewritten = OS_SYSTEM.replace_all(&rewritten, "subprocess.call(shlex.split($1))");
    if rewritten == code {
        return code.to_string();
    }
    let mut imports = String::new();
    let has_import = |module: &str| {
        rewritten.lines().any(|l| {
            let l = l.trim();
            l == format!("import {module}") || l.starts_with(&format!("import {module},"))
        })
    };
    if !has_import("shlex") {
        imports.push_str("import shlex\n");
    }
    if rewritten.contains("subprocess.") && !has_import("subprocess") {
        imports.push_str("import subprocess\n");
    }
    format!("{imports}{rewritten}")
}

pub struct MockProvider {
    behavior: MockBehavior,
}

impl MockProvider {
    pub fn new(behavior: MockBehavior) -> Self {
        MockProvider { behavior }
    }
}

impl Provider for MockProvider {
    fn complete(&self, prompt: &RevisionPrompt) -> Result<String, ProviderError> {
        Ok(match self.behavior {
            MockBehavior::Rewrite => {
                let revised = rewrite_shell_calls(&prompt.code);
                let note = if revised == prompt.code {
                    "The code already avoids the patterns discussed."
                } else {
                    "Replaced shell invocation with an argument list to avoid command injection."
                };
                fenced_response(note, &revised)
            }
            MockBehavior::Echo => fenced_response("No changes needed.", &prompt.code),
            MockBehavior::NoFence => "I reviewed the code and have no further comments.".into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub prompt_hash: String,
    pub response: String,
}

/// Replays responses keyed by the SHA-256 of the rendered prompt.
pub struct TranscriptProvider {
    responses: HashMap<String, String>,
}

impl TranscriptProvider {
    pub fn from_records(records: impl IntoIterator<Item = TranscriptRecord>) -> Self {
        TranscriptProvider {
            responses: records.into_iter().map(|r| (r.prompt_hash, r.response)).collect(),
        }
    }

    pub fn parse<R: BufRead>(input: R) -> Result<Self, ProviderError> {
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| ProviderError::Config(format!("transcript: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TranscriptRecord = serde_json::from_str(&line)
                .map_err(|e| ProviderError::Config(format!("transcript line {}: {e}", i + 1)))?;
            records.push(record);
        }
        Ok(Self::from_records(records))
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let file = std::fs::File::open(path).map_err(|e| {
            ProviderError::Config(format!("transcript {}: {e}", path.display()))
        })?;
        Self::parse(std::io::BufReader::new(file))
    }
}

impl Provider for TranscriptProvider {
    fn complete(&self, prompt: &RevisionPrompt) -> Result<String, ProviderError> {
        let hash = prompt.hash();
        self.responses
            .get(&hash)
            .cloned()
            .ok_or(ProviderError::TranscriptMiss { hash })
    }
}

struct Gate {
    in_flight: Mutex<usize>,
    freed: Condvar,
    limit: usize,
    last_start: Mutex<Option<Instant>>,
    min_interval: Duration,
}

impl Gate {
    fn acquire(&self) {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        drop(n);
        if !self.min_interval.is_zero() {
            let mut last = self.last_start.lock().unwrap();
            if let Some(prev) = *last {
                let next = prev + self.min_interval;
                let now = Instant::now();
                if next > now {
                    std::thread::sleep(next - now);
                }
            }
            *last = Some(Instant::now());
        }
    }

    fn release(&self) {
        *self.in_flight.lock().unwrap() -= 1;
        self.freed.notify_one();
    }
}

/// Chat-completions client with bounded concurrency, request spacing and
/// exponential backoff on transient failures.
pub struct LiveProvider {
    config: ProviderConfig,
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
    gate: Gate,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl LiveProvider {
    pub fn new(config: ProviderConfig, api_key: String) -> Result<Self, ProviderError> {
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| ProviderError::Config("live provider requires an endpoint".into()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        let gate = Gate {
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            limit: config.max_in_flight.max(1),
            last_start: Mutex::new(None),
            min_interval: Duration::from_millis(config.min_request_interval_ms),
        };
        Ok(LiveProvider { config, endpoint, api_key, client, gate })
    }

    fn attempt(&self, text: &str) -> Result<String, ProviderError> {
        let body = serde_json::json!({
            "model": self.config.model_name.clone().unwrap_or_default(),
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": text}],
        });
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| ProviderError::Transport { message: e.to_string(), transient: true })?;
        let status = resp.status();
        if !status.is_success() {
            let transient = status.as_u16() == 429 || status.is_server_error();
            return Err(ProviderError::Transport {
                message: format!("HTTP {status}"),
                transient,
            });
        }
        let parsed: ChatResponse = resp
            .json()
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| ProviderError::BadResponse("no choices".into()))
    }
}

impl Provider for LiveProvider {
    fn complete(&self, prompt: &RevisionPrompt) -> Result<String, ProviderError> {
        let text = prompt.render();
        let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
        let mut attempt = 0;
        loop {
            self.gate.acquire();
            let result = self.attempt(&text);
            self.gate.release();
            match result {
                Err(ProviderError::Transport { transient: true, message }) if attempt < self.config.max_retries => {
                    log::warn!(
                        "request for prompt {} failed ({message}); retrying in {backoff:?}",
                        &prompt_hash(&text)[..12]
                    );
                    std::thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}
