//! Topic modeling with large language models, end to end.
//!
//! The pipeline samples a token-budgeted, representative slice of a document
//! corpus, prompts a chat model to produce structured *topic cards* (summary,
//! ranked keywords, exact source titles), assigns every document to topics by
//! keyword matching, and scores the result: NPMI coherence, topic diversity,
//! topic/keyword entropies, assignment accuracy, and optional LLM-judge
//! ratings. A deterministic mock backend makes the whole thing runnable
//! offline and byte-reproducible.
//!
//! Modules mirror the pipeline stages:
//!
//! - [`corpus`] — JSONL ingestion, tokenization, vocabulary.
//! - [`sampler`] — budget-aware representative sampling.
//! - [`gateway`] — chat-completion client with retries plus the mock backend.
//! - [`cards`] — generation prompt, topic-card parsing and validation.
//! - [`assignment`] — keyword-match document assignment and accuracy.
//! - [`metrics`] — NPMI, diversity, entropies, report assembly.
//! - [`judge`] — LLM-as-judge scoring of topic cards.
//! - [`pipeline`] — run orchestration with resumable on-disk artifacts.

pub mod assignment;
pub mod cards;
pub mod corpus;
pub mod error;
pub mod gateway;
pub mod judge;
pub mod metrics;
pub mod pipeline;
pub mod sampler;

mod jsonx;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
