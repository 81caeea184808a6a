use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::tokenize::{tokenize_code, Token};
use super::RetrievalError;
use crate::kb::KnowledgeEntry;

/// Magic first line of a persisted index file.
pub const INDEX_MAGIC: &str = "SOSEC-IDX-v1";

/// Number of hits returned when the caller does not choose `k`.
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    fn validate(&self) -> Result<(), RetrievalError> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) || !(0.0..=1.0).contains(&self.b) {
            return Err(RetrievalError::BadParams { k1: self.k1, b: self.b });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: usize,
    pub tf: u32,
}

/// Inverted index with BM25 statistics over knowledge-base code blocks.
///
/// Document ids are positions in the entry list the index was built from.
/// The entries themselves travel with the index so that a loaded index can
/// return full answers and comment threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalIndex {
    params: Bm25Params,
    num_docs: usize,
    avg_doc_len: f64,
    doc_len: Vec<u32>,
    /// doc id -> answer id
    doc_meta: Vec<i64>,
    postings: BTreeMap<String, Vec<Posting>>,
    entries: Vec<KnowledgeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub rank: usize,
    pub score: f64,
    pub entry: KnowledgeEntry,
}

impl RetrievalIndex {
    pub fn build(entries: Vec<KnowledgeEntry>, params: Bm25Params) -> Result<Self, RetrievalError> {
        params.validate()?;
        if entries.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_len = Vec::with_capacity(entries.len());
        for (doc, entry) in entries.iter().enumerate() {
            let tokens = tokenize_code(&entry.document_text());
            doc_len.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t.as_str().to_string()).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting { doc, tf: count });
            }
        }
        let total: u64 = doc_len.iter().map(|&l| u64::from(l)).sum();
        let num_docs = entries.len();
        Ok(RetrievalIndex {
            params,
            num_docs,
            avg_doc_len: total as f64 / num_docs as f64,
            doc_len,
            doc_meta: entries.iter().map(|e| e.answer_id).collect(),
            postings,
            entries,
        })
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn doc_len(&self, doc: usize) -> Option<u32> {
        self.doc_len.get(doc).copied()
    }

    pub fn answer_id(&self, doc: usize) -> Option<i64> {
        self.doc_meta.get(doc).copied()
    }

    pub fn entry(&self, doc: usize) -> Option<&KnowledgeEntry> {
        self.entries.get(doc)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.num_docs as f64;
        let df = self.postings(term).len() as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    fn term_weight(&self, idf: f64, tf: u32, doc: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = f64::from(tf);
        let dl = f64::from(self.doc_len[doc]);
        idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / self.avg_doc_len))
    }

    fn unique_terms(query: &[Token]) -> BTreeSet<&str> {
        query.iter().map(Token::as_str).collect()
    }

    /// BM25 score of one document. Query terms are deduplicated.
    pub fn bm25_score(&self, query: &[Token], doc: usize) -> Result<f64, RetrievalError> {
        if doc >= self.num_docs {
            return Err(RetrievalError::UnknownDoc(doc));
        }
        let mut score = 0.0;
        for term in Self::unique_terms(query) {
            let postings = self.postings(term);
            if let Ok(pos) = postings.binary_search_by_key(&doc, |p| p.doc) {
                score += self.term_weight(self.idf(term), postings[pos].tf, doc);
            }
        }
        Ok(score)
    }

    /// Scores every document sharing at least one term with the query.
    /// Terms are visited in the same order as [`Self::bm25_score`], so both
    /// produce bit-identical sums.
    fn score_all(&self, query: &[Token]) -> Vec<f64> {
        let mut acc = vec![0.0; self.num_docs];
        for term in Self::unique_terms(query) {
            let idf = self.idf(term);
            for p in self.postings(term) {
                acc[p.doc] += self.term_weight(idf, p.tf, p.doc);
            }
        }
        acc
    }

    /// Top-`k` entries for a code snippet, by descending score with ties
    /// broken by ascending answer id. Documents scoring zero are omitted.
    pub fn retrieve(&self, code: &str, k: usize) -> Result<Vec<RetrievalHit>, RetrievalError> {
        self.retrieve_tokens(&tokenize_code(code), k)
    }

    pub fn retrieve_tokens(&self, query: &[Token], k: usize) -> Result<Vec<RetrievalHit>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        let scores = self.score_all(query);
        let mut ranked: Vec<(usize, f64)> = scores
            .into_iter()
            .enumerate()
            .filter(|&(_, s)| s > 0.0)
            .collect();
        ranked.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.doc_meta[a.0].cmp(&self.doc_meta[b.0]))
                .then_with(|| a.0.cmp(&b.0))
        });
        Ok(ranked
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (doc, score))| RetrievalHit {
                rank: i + 1,
                score,
                entry: self.entries[doc].clone(),
            })
            .collect())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), RetrievalError> {
        out.write_all(INDEX_MAGIC.as_bytes())?;
        out.write_all(b"\n")?;
        serde_json::to_writer(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, RetrievalError> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Parses a persisted index and re-checks its internal invariants.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RetrievalError> {
        let header_len = INDEX_MAGIC.len();
        if bytes.len() <= header_len
            || &bytes[..header_len] != INDEX_MAGIC.as_bytes()
            || bytes[header_len] != b'\n'
        {
            return Err(RetrievalError::BadMagic);
        }
        let mut index: RetrievalIndex = serde_json::from_slice(&bytes[header_len + 1..])?;
        index.check()?;
        // The stored mean only has to be close; recompute it so a reloaded index scores bit-identically.
        let total: u64 = index.doc_len.iter().map(|&l| u64::from(l)).sum();
        index.avg_doc_len = total as f64 / index.num_docs as f64;
        Ok(index)
    }

    fn check(&self) -> Result<(), RetrievalError> {
        self.params.validate()?;
        let corrupt = |what: &str| Err(RetrievalError::Corrupt(what.to_string()));
        if self.num_docs == 0 {
            return corrupt("index has no documents");
        }
        if self.doc_len.len() != self.num_docs
            || self.doc_meta.len() != self.num_docs
            || self.entries.len() != self.num_docs
        {
            return corrupt("per-document tables disagree with num_docs");
        }
        let total: u64 = self.doc_len.iter().map(|&l| u64::from(l)).sum();
        let mean = total as f64 / self.num_docs as f64;
        if (mean - self.avg_doc_len).abs() > 1e-9 * mean.max(1.0) {
            return corrupt("avg_doc_len is not the mean document length");
        }
        for (term, list) in &self.postings {
            if term.is_empty() || list.is_empty() {
                return corrupt("empty term or posting list");
            }
            if list.windows(2).any(|w| w[0].doc >= w[1].doc) {
                return corrupt("posting list not strictly ordered");
            }
            if list.iter().any(|p| p.doc >= self.num_docs || p.tf == 0) {
                return corrupt("posting references an unknown document");
            }
        }
        if self.entries.iter().zip(&self.doc_meta).any(|(e, &id)| e.answer_id != id) {
            return corrupt("doc_meta does not match entries");
        }
        Ok(())
    }
}
