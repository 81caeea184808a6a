//! Retrieval-augmented security revision of generated code.
//!
//! The pipeline has four stages, each in its own module:
//!
//! - [`kb`] builds a knowledge base of security-relevant Stack Overflow
//!   answers and their comment threads from a data dump;
//! - [`retrieval`] ranks those answers against a code snippet with BM25;
//! - [`revision`] turns the top hits into an advisory revision prompt and
//!   asks a model provider for a revised snippet;
//! - [`analysis`] and [`eval`] run static analyzers before and after revision
//!   and aggregate fix, introduction and no-change rates.

pub mod analysis;
pub mod cwe;
pub mod eval;
pub mod kb;
pub mod retrieval;
pub mod revision;

pub use cwe::Cwe;
