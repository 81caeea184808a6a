use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("response contains no complete fenced code block")]
pub struct NoCodeBlock;

fn fence_len(line: &str) -> usize {
    line.chars().take_while(|&c| c == '`').count()
}

/// Returns the contents of the last complete fenced code block. The opening
/// fence may carry a language tag; the closing fence must be at least as long
/// as the opening one and carry nothing else.
pub fn extract_revised_code(raw_response: &str) -> Result<String, NoCodeBlock> {
    let mut last = None;
    let mut open: Option<(usize, Vec<&str>)> = None;
    for line in raw_response.lines() {
        let trimmed = line.trim();
        match open.as_mut() {
            None => {
                let n = fence_len(trimmed);
                if n >= 3 && !trimmed[n..].contains('`') {
                    open = Some((n, Vec::new()));
                }
            }
            Some((n, body)) => {
                let m = fence_len(trimmed);
                if m >= *n && m == trimmed.len() {
                    last = Some(body.join("\n"));
                    open = None;
                } else {
                    body.push(line);
                }
            }
        }
    }
    last.ok_or(NoCodeBlock)
}

fn normalize(code: &str) -> String {
    let unified = code.replace("\r\n", "\n").replace('\r', "\n");
    let lines: Vec<&str> = unified.lines().map(str::trim_end).collect();
    let keep = lines.iter().rposition(|l| !l.is_empty()).map_or(0, |i| i + 1);
    lines[..keep].join("\n")
}

/// Equality after normalizing line endings, trailing whitespace on each line
/// and trailing blank lines.
pub fn is_unchanged(original: &str, revised: &str) -> bool {
    normalize(original) == normalize(revised)
}
