use std::collections::BTreeSet;
use std::path::Path;

use super::KbError;

/// Keyword list shipped with the crate.
pub const DEFAULT_KEYWORDS: &str = include_str!("../../data/security_keywords.txt");

/// Lowercase security phrases used to decide whether a post is security relevant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSet {
    keywords: BTreeSet<String>,
}

impl KeywordSet {
    pub fn new<I, S>(phrases: I) -> Result<Self, KbError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let keywords: BTreeSet<String> = phrases
            .into_iter()
            .map(|p| p.as_ref().trim().to_lowercase())
            .filter(|p| !p.is_empty())
            .collect();
        if keywords.is_empty() {
            return Err(KbError::EmptyKeywordSet);
        }
        Ok(KeywordSet { keywords })
    }

    /// Parses the keyword file format: one phrase per line, `#` comment lines
    /// and blank lines ignored.
    pub fn parse(text: &str) -> Result<Self, KbError> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn default_set() -> Self {
        Self::parse(DEFAULT_KEYWORDS).expect("bundled keyword list is non-empty")
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.keywords.iter().map(String::as_str)
    }

    /// True if any phrase occurs in `text` (case-insensitive substring match).
    pub fn matches(&self, text: &str) -> bool {
        let lowered = text.to_lowercase();
        self.keywords.iter().any(|k| lowered.contains(k.as_str()))
    }
}

/// An answer is security relevant if any keyword occurs in the answer text or
/// in one of its comments.
pub fn is_security_relevant<S: AsRef<str>>(
    answer_text: &str,
    comment_texts: &[S],
    keywords: &KeywordSet,
) -> bool {
    keywords.matches(answer_text) || comment_texts.iter().any(|c| keywords.matches(c.as_ref()))
}
