//! Inference-time revision: prompt assembly, provider call, response parsing.

mod extract;
mod prompt;
mod provider;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_revised_code, is_unchanged, NoCodeBlock};
pub use prompt::{
    build_label_prompt, build_revision_prompt, prompt_hash, render_context_section, template, PromptTemplate,
    RevisionPrompt, DEFAULT_BUDGET, MAX_COMMENTS, MAX_COMMENT_CHARS, MAX_EXCERPT_CHARS,
};
pub use provider::{
    rewrite_shell_calls, LiveProvider, MockBehavior, MockProvider, Provider, ProviderConfig, ProviderError,
    ProviderKind, TranscriptProvider, TranscriptRecord, API_KEY_ENV,
};

use crate::retrieval::RetrievalHit;

#[derive(Debug, Error)]
pub enum RevisionError {
    #[error("prompt budget {budget} is too small: mandatory sections need {needed} characters")]
    BudgetTooSmall { budget: usize, needed: usize },
    #[error("sample {sample_id}: {source}")]
    Provider {
        sample_id: String,
        #[source]
        source: ProviderError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionRecord {
    pub sample_id: String,
    pub original_code: String,
    pub retrieved_answer_ids: Vec<i64>,
    pub prompt_text: String,
    pub raw_response: String,
    pub revised_code: String,
    pub changed: bool,
    pub parse_ok: bool,
}

/// Sends an already-built prompt and interprets the answer. If the response
/// has no fenced block the original code is kept and `parse_ok` is false.
pub fn revise_with_prompt(
    provider: &dyn Provider,
    sample_id: &str,
    prompt: &RevisionPrompt,
    retrieved_answer_ids: Vec<i64>,
) -> Result<RevisionRecord, RevisionError> {
    let raw_response = provider.complete(prompt).map_err(|source| RevisionError::Provider {
        sample_id: sample_id.to_string(),
        source,
    })?;
    let original = &prompt.code;
    let (revised_code, parse_ok) = match extract_revised_code(&raw_response) {
        Ok(code) => (code, true),
        Err(NoCodeBlock) => (original.clone(), false),
    };
    let changed = parse_ok && !is_unchanged(original, &revised_code);
    Ok(RevisionRecord {
        sample_id: sample_id.to_string(),
        original_code: original.clone(),
        retrieved_answer_ids,
        prompt_text: prompt.render(),
        raw_response,
        revised_code,
        changed,
        parse_ok,
    })
}

/// Builds the advisory prompt from `hits` and asks `provider` for a revision.
pub fn revise(
    provider: &dyn Provider,
    sample_id: &str,
    code: &str,
    hits: &[RetrievalHit],
    budget: usize,
) -> Result<RevisionRecord, RevisionError> {
    let prompt = build_revision_prompt(code, hits, budget)?;
    let ids = hits.iter().map(|h| h.entry.answer_id).collect();
    revise_with_prompt(provider, sample_id, &prompt, ids)
}
