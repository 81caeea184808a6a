//! Minimal HTML handling for Stack Overflow post bodies.

use std::sync::LazyLock;

use regex::Regex;

/// Inline `<code>` spans shorter than this (in chars) are not treated as code.
pub const MIN_INLINE_CODE_CHARS: usize = 10;

static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<[^>]*>").unwrap());
static CODE_OPEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)<code(?:\s[^>]*)?>").unwrap());
static CODE_CLOSE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)</code\s*>").unwrap());
static BLOCK_TAG: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)</?(?:p|pre|br|li|ul|ol|div|blockquote|h[1-6]|hr|tr|table)(?:\s[^>]*)?/?>")
        .unwrap()
});
static PRE_TAG_AT_END: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)<pre(?:\s[^>]*)?>\s*$").unwrap());

fn decode(text: &str) -> String {
    html_escape::decode_html_entities(text).into_owned()
}

/// Returns code from `<pre><code>` blocks and from inline `<code>` spans of at
/// least [`MIN_INLINE_CODE_CHARS`] characters, in document order.
pub fn extract_code_blocks(body_html: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut cursor = 0;
    while let Some(open) = CODE_OPEN.find_at(body_html, cursor) {
        let Some(close) = CODE_CLOSE.find_at(body_html, open.end()) else {
            break;
        };
        let in_pre = PRE_TAG_AT_END.is_match(&body_html[..open.start()]);
        let inner = TAG.replace_all(&body_html[open.end()..close.start()], "");
        let code = decode(&inner).trim().to_string();
        let keep = if in_pre {
            !code.is_empty()
        } else {
            code.chars().count() >= MIN_INLINE_CODE_CHARS
        };
        if keep {
            blocks.push(code);
        }
        cursor = close.end();
    }
    blocks
}

/// Converts an HTML body to plain text. Block-level tags become line breaks,
/// runs of spaces collapse, and blank lines are dropped.
pub fn strip_html(body_html: &str) -> String {
    let with_breaks = BLOCK_TAG.replace_all(body_html, "\n");
    let untagged = TAG.replace_all(&with_breaks, "");
    let decoded = decode(&untagged);
    decoded
        .lines()
        .map(|line| line.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|line| !line.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}
