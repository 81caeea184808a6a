use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use super::dump::{PostType, RawComment, RawPost};
use super::html::{extract_code_blocks, strip_html};
use super::keywords::{is_security_relevant, KeywordSet};
use super::{DumpError, EntryComment, IngestStats, KbError, KnowledgeEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KbOptions {
    /// Minimum net votes for the answer or one of its comments to count as
    /// community endorsement.
    pub min_upvote: i64,
}

impl Default for KbOptions {
    fn default() -> Self {
        KbOptions { min_upvote: 1 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct KbBuild {
    pub entries: Vec<KnowledgeEntry>,
    pub stats: IngestStats,
}

/// The answer or at least one of its comments has at least one upvote.
pub fn passes_quality_gate(answer_score: i64, comment_scores: &[i64]) -> bool {
    passes_gate_with(answer_score, comment_scores, KbOptions::default().min_upvote)
}

fn passes_gate_with(answer_score: i64, comment_scores: &[i64], min_upvote: i64) -> bool {
    answer_score >= min_upvote || comment_scores.iter().any(|&s| s >= min_upvote)
}

/// Joins answers with their comment threads and keeps entries that mention a
/// security keyword, pass the endorsement gate and contain code.
///
/// Comments are grouped in a first pass; posts are then consumed as a stream.
/// Output is ordered by ascending answer id.
pub fn build_knowledge_base<P, C>(
    posts: P,
    comments: C,
    keywords: &KeywordSet,
    options: KbOptions,
) -> Result<KbBuild, KbError>
where
    P: IntoIterator<Item = Result<RawPost, DumpError>>,
    C: IntoIterator<Item = Result<RawComment, DumpError>>,
{
    let mut stats = IngestStats::default();

    let mut threads: HashMap<i64, Vec<RawComment>> = HashMap::new();
    for comment in comments {
        let comment = comment?;
        threads.entry(comment.post_id).or_default().push(comment);
    }
    for thread in threads.values_mut() {
        thread.sort_by_key(|c| c.id);
    }

    let mut seen_posts: HashSet<i64> = HashSet::new();
    let mut seen_answers: HashSet<i64> = HashSet::new();
    let mut question_tags: HashMap<i64, Vec<String>> = HashMap::new();
    let mut kept: BTreeMap<i64, KnowledgeEntry> = BTreeMap::new();

    for post in posts {
        let post = post?;
        seen_posts.insert(post.id);
        match post.post_type {
            PostType::Question => {
                if !post.tags.is_empty() {
                    question_tags.insert(post.id, post.tags);
                }
            }
            PostType::Answer => {
                if !seen_answers.insert(post.id) {
                    stats.duplicate_answers += 1;
                    log::warn!("duplicate answer id {}; keeping the later row", post.id);
                    kept.remove(&post.id);
                }
                let thread = threads.get(&post.id).map(Vec::as_slice).unwrap_or(&[]);
                if let Some(entry) = candidate_entry(&post, thread, keywords, options) {
                    kept.insert(post.id, entry);
                }
            }
        }
    }

    stats.orphan_comments = threads
        .iter()
        .filter(|(post_id, _)| !seen_posts.contains(post_id))
        .map(|(_, thread)| thread.len() as u64)
        .sum();

    let entries = kept
        .into_values()
        .map(|mut entry| {
            if let Some(tags) = question_tags.get(&entry.question_id) {
                entry.tags = tags.clone();
            }
            entry
        })
        .collect();
    Ok(KbBuild { entries, stats })
}

fn candidate_entry(
    answer: &RawPost,
    thread: &[RawComment],
    keywords: &KeywordSet,
    options: KbOptions,
) -> Option<KnowledgeEntry> {
    let comment_scores: Vec<i64> = thread.iter().map(|c| c.score).collect();
    if !passes_gate_with(answer.score, &comment_scores, options.min_upvote) {
        return None;
    }
    let code_blocks = extract_code_blocks(&answer.body);
    if code_blocks.is_empty() {
        return None;
    }
    let excerpt = strip_html(&answer.body);
    let comment_texts: Vec<&str> = thread.iter().map(|c| c.text.as_str()).collect();
    if !is_security_relevant(&excerpt, &comment_texts, keywords) {
        return None;
    }
    Some(KnowledgeEntry {
        answer_id: answer.id,
        question_id: answer.parent_id.unwrap_or_default(),
        answer_score: answer.score,
        answer_excerpt: excerpt,
        code_blocks,
        comments: thread
            .iter()
            .map(|c| EntryComment { text: c.text.clone(), score: c.score })
            .collect(),
        tags: Vec::new(),
        url: KnowledgeEntry::answer_url(answer.id),
    })
}

pub fn write_jsonl<W: Write>(entries: &[KnowledgeEntry], mut out: W) -> Result<(), KbError> {
    for entry in entries {
        serde_json::to_writer(&mut out, entry).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<KnowledgeEntry>, KbError> {
    let mut entries = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| KbError::BadEntry {
            line: idx + 1,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(entries)
}
