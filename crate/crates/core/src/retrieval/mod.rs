//! BM25 retrieval of knowledge-base entries by code similarity.

mod index;
mod tokenize;

use thiserror::Error;

pub use index::{Bm25Params, Posting, RetrievalHit, RetrievalIndex, DEFAULT_K, INDEX_MAGIC};
pub use tokenize::{split_identifier, tokenize_code, Token};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot build an index over zero documents")]
    EmptyCorpus,
    #[error("invalid BM25 parameters k1={k1}, b={b}: need k1 > 0 and 0 <= b <= 1")]
    BadParams { k1: f64, b: f64 },
    #[error("document {0} is not in the index")]
    UnknownDoc(usize),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("not an index file: missing SOSEC-IDX-v1 header")]
    BadMagic,
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error("index encoding: {0}")]
    Json(#[from] serde_json::Error),
    #[error("index i/o: {0}")]
    Io(#[from] std::io::Error),
}
