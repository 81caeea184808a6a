//! Code-aware tokenizer.
//!
//! Besides plain identifiers, the tokenizer keeps security-relevant compounds
//! such as `shell=true` and `pickle.loads` whole, then also emits their
//! constituents so that partial matches still score.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(String);

impl Token {
    /// Wraps an already-normalized term. Returns `None` for empty input.
    pub fn new(text: impl Into<String>) -> Option<Self> {
        let text = text.into();
        (!text.is_empty()).then_some(Token(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for Token {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_segment_char(c: char) -> bool {
    is_word_char(c) || c == '.' || c == '='
}

/// Splits an identifier on underscores and camelCase boundaries.
///
/// `myVarName` -> `my, var, name`; `HTTPServer` -> `http, server`;
/// digits stay attached to the preceding run (`md5`, `sha256sum`).
pub fn split_identifier(ident: &str) -> Vec<String> {
    let mut parts = Vec::new();
    for piece in ident.split('_').filter(|p| !p.is_empty()) {
        let chars: Vec<char> = piece.chars().collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if i > 0 && c.is_uppercase() {
                let prev = chars[i - 1];
                let next_is_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
                let boundary = prev.is_lowercase()
                    || prev.is_ascii_digit()
                    || (prev.is_uppercase() && next_is_lower);
                if boundary && !current.is_empty() {
                    parts.push(current.to_lowercase());
                    current.clear();
                }
            }
            current.push(c);
        }
        if !current.is_empty() {
            parts.push(current.to_lowercase());
        }
    }
    parts
}

fn push(out: &mut Vec<Token>, text: String) {
    if let Some(t) = Token::new(text) {
        out.push(t);
    }
}

fn emit_identifier(ident: &str, out: &mut Vec<Token>) {
    let whole = ident.to_lowercase();
    let parts = split_identifier(ident);
    push(out, whole.clone());
    if !(parts.len() == 1 && parts[0] == whole) {
        for p in parts {
            push(out, p);
        }
    }
}

/// Handles one side of a `name=value` pair or a bare segment without `=`:
/// a dotted path is emitted whole, then each identifier in it.
fn emit_path(text: &str, out: &mut Vec<Token>) {
    let idents: Vec<&str> = text.split('.').filter(|p| !p.is_empty()).collect();
    if idents.len() > 1 {
        push(out, idents.join(".").to_lowercase());
    }
    for ident in idents {
        emit_identifier(ident, out);
    }
}

fn emit_segment(segment: &str, out: &mut Vec<Token>) {
    let trimmed = segment.trim_matches('.');
    if let Some((name, value)) = trimmed.split_once('=') {
        let name = name.trim_matches('.');
        let value = value.trim_matches('.');
        let simple = !value.contains('=')
            && name.chars().any(is_word_char)
            && value.chars().any(is_word_char);
        if simple {
            push(out, format!("{name}={value}").to_lowercase());
            emit_path(name, out);
            emit_path(value, out);
        } else {
            for part in trimmed.split('=') {
                emit_path(part, out);
            }
        }
    } else {
        emit_path(trimmed, out);
    }
}

/// Tokenizes source text in order of appearance, keeping duplicates.
pub fn tokenize_code(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (is_segment_char(c), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                emit_segment(&text[s..i], &mut out);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        emit_segment(&text[s..], &mut out);
    }
    out
}
