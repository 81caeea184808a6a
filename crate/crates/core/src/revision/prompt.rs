use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RevisionError;
use crate::cwe::Cwe;
use crate::retrieval::RetrievalHit;

pub const DEFAULT_BUDGET: usize = 8000;
pub const MAX_EXCERPT_CHARS: usize = 1500;
pub const MAX_COMMENT_CHARS: usize = 500;
pub const MAX_COMMENTS: usize = 5;

const TEMPLATE_SOURCE: &str = include_str!("../../data/revision_prompt_v1.toml");

#[derive(Debug, Clone, Deserialize)]
pub struct PromptTemplate {
    pub version: u32,
    pub system_instruction: String,
    pub context_heading: String,
    pub no_context: String,
    pub label_heading: String,
    pub label_note: String,
    pub label_note_unnamed: String,
    pub code_heading: String,
    pub output_heading: String,
    pub output_contract: String,
}

static TEMPLATE: LazyLock<PromptTemplate> = LazyLock::new(|| {
    let mut t: PromptTemplate = toml::from_str(TEMPLATE_SOURCE).expect("bundled prompt template parses");
    for field in [&mut t.system_instruction, &mut t.output_contract] {
        *field = field.trim().to_string();
    }
    t
});

pub fn template() -> &'static PromptTemplate {
    &TEMPLATE
}

/// Truncates to at most `max` chars, marking the cut with an ellipsis.
fn truncate_chars(text: &str, max: usize) -> String {
    if text.chars().count() <= max {
        return text.to_string();
    }
    let mut out: String = text.chars().take(max.saturating_sub(1)).collect();
    out.push('…');
    out
}

fn fence_for(code: &str) -> String {
    let mut longest = 0;
    let mut run = 0;
    for c in code.chars() {
        if c == '`' {
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }
    "`".repeat(longest.max(2) + 1)
}

pub fn render_context_section(hit: &RetrievalHit) -> String {
    let entry = &hit.entry;
    let mut out = format!(
        "### Discussion {}: {} (answer score {})\n{}",
        hit.rank,
        entry.url,
        entry.answer_score,
        truncate_chars(&entry.answer_excerpt, MAX_EXCERPT_CHARS)
    );
    if !entry.comments.is_empty() {
        out.push_str("\nComments:");
        for c in entry.comments.iter().take(MAX_COMMENTS) {
            out.push_str(&format!(
                "\n- [score {}] {}",
                c.score,
                truncate_chars(&c.text, MAX_COMMENT_CHARS)
            ));
        }
    }
    out
}

/// A fully assembled revision prompt. [`RevisionPrompt::render`] produces the
/// exact text sent to the provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionPrompt {
    pub system_instruction: String,
    pub context_sections: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_section: Option<String>,
    pub code_section: String,
    pub output_contract: String,
    pub char_budget: usize,
    /// The code under review, unfenced.
    pub code: String,
}

impl RevisionPrompt {
    pub fn render(&self) -> String {
        let t = template();
        let mut out = String::new();
        out.push_str(&self.system_instruction);
        out.push_str("\n\n");
        if let Some(label) = &self.label_section {
            out.push_str(&t.label_heading);
            out.push('\n');
            out.push_str(label);
        } else {
            out.push_str(&t.context_heading);
            out.push_str("\n\n");
            if self.context_sections.is_empty() {
                out.push_str(&t.no_context);
            } else {
                out.push_str(&self.context_sections.join("\n\n"));
            }
        }
        out.push_str("\n\n");
        out.push_str(&self.code_section);
        out.push_str("\n\n");
        out.push_str(&t.output_heading);
        out.push('\n');
        out.push_str(&self.output_contract);
        out.push('\n');
        out
    }

    pub fn char_len(&self) -> usize {
        self.render().chars().count()
    }

    /// Hex SHA-256 of the rendered text; keys recorded transcripts.
    pub fn hash(&self) -> String {
        prompt_hash(&self.render())
    }
}

pub fn prompt_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn code_section(code: &str) -> String {
    let fence = fence_for(code);
    format!("{}\n{fence}\n{code}\n{fence}", template().code_heading)
}

fn base_prompt(code: &str, budget: usize) -> RevisionPrompt {
    let t = template();
    RevisionPrompt {
        system_instruction: t.system_instruction.clone(),
        context_sections: Vec::new(),
        label_section: None,
        code_section: code_section(code),
        output_contract: t.output_contract.clone(),
        char_budget: budget,
        code: code.to_string(),
    }
}

fn check_budget(prompt: &RevisionPrompt) -> Result<(), RevisionError> {
    let needed = prompt.char_len();
    if needed > prompt.char_budget {
        return Err(RevisionError::BudgetTooSmall { budget: prompt.char_budget, needed });
    }
    Ok(())
}

/// Builds the advisory revision prompt. Hits are rendered in rank order; when
/// the result exceeds `budget` characters the lowest-ranked sections are
/// dropped first. With no hits (or none that fit) the prompt says so and
/// still asks for a revision.
pub fn build_revision_prompt(
    code: &str,
    hits: &[RetrievalHit],
    budget: usize,
) -> Result<RevisionPrompt, RevisionError> {
    let mut prompt = base_prompt(code, budget);
    check_budget(&prompt)?;
    let mut ranked: Vec<&RetrievalHit> = hits.iter().collect();
    ranked.sort_by_key(|h| h.rank);
    prompt.context_sections = ranked.into_iter().map(render_context_section).collect();
    while prompt.char_len() > budget {
        prompt.context_sections.pop();
    }
    Ok(prompt)
}

/// Prompt variant that names a weakness instead of supplying retrieved
/// discussions.
pub fn build_label_prompt(code: &str, cwe: &Cwe, budget: usize) -> Result<RevisionPrompt, RevisionError> {
    let t = template();
    let note = match cwe.name() {
        Some(name) => t.label_note.replace("{cwe}", cwe.as_str()).replace("{cwe_name}", name),
        None => t.label_note_unnamed.replace("{cwe}", cwe.as_str()),
    };
    let mut prompt = base_prompt(code, budget);
    prompt.label_section = Some(note);
    check_budget(&prompt)?;
    Ok(prompt)
}
