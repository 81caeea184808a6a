//! Security-oriented knowledge base built from Stack Overflow data dumps.

mod build;
pub mod dump;
pub mod html;
mod keywords;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{build_knowledge_base, passes_quality_gate, read_jsonl, write_jsonl, KbBuild, KbOptions};
pub use dump::{parse_dump_rows, CommentReader, DumpKind, DumpRecord, PostReader, PostType, RawComment, RawPost};
pub use html::{extract_code_blocks, strip_html};
pub use keywords::{is_security_relevant, KeywordSet, DEFAULT_KEYWORDS};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("keyword set is empty")]
    EmptyKeywordSet,
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("knowledge base line {line}: {message}")]
    BadEntry { line: usize, message: String },
    #[error("writing knowledge base: {0}")]
    Write(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("malformed dump XML at byte {offset}: {message}")]
    Malformed { offset: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    MissingAttribute(&'static str),
    BadInteger(&'static str),
    UnsupportedPostType(i64),
}

impl std::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SkipReason::MissingAttribute(a) => write!(f, "missing required attribute {a}"),
            SkipReason::BadInteger(a) => write!(f, "attribute {a} is not an integer"),
            SkipReason::UnsupportedPostType(t) => write!(f, "post type {t} is neither question nor answer"),
        }
    }
}

/// Counters collected during ingestion. Counters from independent shards can
/// be combined with [`IngestStats::merge`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub rows: u64,
    pub skipped: u64,
    pub missing_attribute: u64,
    pub bad_integer: u64,
    pub unsupported_type: u64,
    pub duplicate_answers: u64,
    pub orphan_comments: u64,
}

impl IngestStats {
    pub(crate) fn record_skip(&mut self, reason: SkipReason) {
        self.skipped += 1;
        match reason {
            SkipReason::MissingAttribute(_) => self.missing_attribute += 1,
            SkipReason::BadInteger(_) => self.bad_integer += 1,
            SkipReason::UnsupportedPostType(_) => self.unsupported_type += 1,
        }
    }

    pub fn merge(&mut self, other: &IngestStats) {
        self.rows += other.rows;
        self.skipped += other.skipped;
        self.missing_attribute += other.missing_attribute;
        self.bad_integer += other.bad_integer;
        self.unsupported_type += other.unsupported_type;
        self.duplicate_answers += other.duplicate_answers;
        self.orphan_comments += other.orphan_comments;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryComment {
    pub text: String,
    pub score: i64,
}

/// One security-relevant answer with its comment thread. This is the unit
/// that retrieval ranks and returns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeEntry {
    pub answer_id: i64,
    pub question_id: i64,
    pub answer_score: i64,
    pub answer_excerpt: String,
    pub code_blocks: Vec<String>,
    pub comments: Vec<EntryComment>,
    pub tags: Vec<String>,
    pub url: String,
}

impl KnowledgeEntry {
    pub fn answer_url(answer_id: i64) -> String {
        format!("https://stackoverflow.com/a/{answer_id}")
    }

    /// Text indexed for retrieval: the code blocks joined by newlines.
    pub fn document_text(&self) -> String {
        self.code_blocks.join("\n")
    }
}
