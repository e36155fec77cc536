//! Budget-aware representative sampling.
//!
//! Picks a subset of documents whose rendered text fits a model's context
//! window. Selection order is keyed by a seeded hash of each document id, so
//! the sample is a pure function of (corpus contents, plan) and never depends
//! on how the corpus file happens to be ordered.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, Document};
use crate::{Error, Result};

pub const DEFAULT_TOKEN_RATIO: f64 = 1.3;
pub const DEFAULT_OVERHEAD_TOKENS: usize = 1_500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    /// Seeded draw without replacement over the whole corpus.
    Uniform,
    /// Per-label quotas proportional to label frequencies, largest-remainder
    /// rounding, then a seeded uniform draw within each label.
    Stratified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub strategy: SamplingStrategy,
    pub seed: u64,
    /// Total context window in model tokens.
    pub budget_tokens: usize,
    /// Tokens reserved for the prompt template and response headroom.
    pub overhead_tokens: usize,
    /// Estimated model tokens per whitespace token.
    pub token_ratio: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            strategy: SamplingStrategy::Uniform,
            seed: 0,
            budget_tokens: 8_000,
            overhead_tokens: DEFAULT_OVERHEAD_TOKENS,
            token_ratio: DEFAULT_TOKEN_RATIO,
        }
    }
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        if self.budget_tokens <= self.overhead_tokens {
            return Err(Error::Config(format!(
                "budget_tokens ({}) must exceed overhead_tokens ({})",
                self.budget_tokens, self.overhead_tokens
            )));
        }
        if !self.token_ratio.is_finite() || self.token_ratio <= 0.0 {
            return Err(Error::Config(format!(
                "token_ratio must be positive, got {}",
                self.token_ratio
            )));
        }
        Ok(())
    }

    /// Tokens actually available for sampled text.
    pub fn text_budget(&self) -> usize {
        self.budget_tokens - self.overhead_tokens
    }
}

/// The rendered text block that goes into the generation prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBlock {
    pub doc_ids: Vec<String>,
    pub rendered_text: String,
    pub estimated_tokens: usize,
    pub plan: SamplingPlan,
}

impl SampleBlock {
    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("sample serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::ParseFailure {
            reason: format!("invalid sample file {}: {e}", path.display()),
            excerpt: String::new(),
        })
    }
}

/// Estimated model tokens for a text: `ceil(whitespace_tokens × token_ratio)`.
pub fn estimate_tokens(text: &str, token_ratio: f64) -> usize {
    debug_assert!(token_ratio > 0.0);
    let words = text.split_whitespace().count();
    (words as f64 * token_ratio).ceil() as usize
}

/// Stable per-document rank: first 8 bytes of SHA-256(seed ‖ id).
fn id_rank(seed: u64, id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn render_doc(doc: &Document) -> String {
    format!(
        "Title: {}\nText: {}\n\n",
        doc.title,
        doc.body.as_deref().unwrap_or("")
    )
}

/// Whitespace-token count of one rendered document block. Blocks are joined
/// by blank lines, so whole-sample counts are just the sum of these.
fn rendered_word_count(doc: &Document) -> usize {
    render_doc(doc).split_whitespace().count()
}

/// Largest-remainder (Hamilton) apportionment of `total` over label counts.
///
/// Labels are keyed in a `BTreeMap` so remainders tie-break by label name.
fn largest_remainder_quotas(label_counts: &BTreeMap<String, usize>, total: usize) -> BTreeMap<String, usize> {
    let population: usize = label_counts.values().sum();
    let mut quotas: BTreeMap<String, usize> = BTreeMap::new();
    let mut remainders: Vec<(String, f64)> = Vec::new();
    let mut assigned = 0usize;
    for (label, &count) in label_counts {
        let exact = total as f64 * count as f64 / population as f64;
        let floor = exact.floor() as usize;
        quotas.insert(label.clone(), floor);
        remainders.push((label.clone(), exact - floor as f64));
        assigned += floor;
    }
    let mut leftover = total - assigned;
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    for (label, _) in remainders {
        if leftover == 0 {
            break;
        }
        *quotas.get_mut(&label).unwrap() += 1;
        leftover -= 1;
    }
    quotas
}

/// Draw a deterministic sample that fits the plan's token budget.
///
/// Documents are considered in seeded-hash order and added greedily until the
/// next one would exceed `budget_tokens − overhead_tokens`; the stratified
/// strategy instead grows a total count whose per-label split always matches
/// largest-remainder quotas.
pub fn draw_sample(corpus: &Corpus, plan: &SamplingPlan) -> Result<SampleBlock> {
    plan.validate()?;
    if corpus.is_empty() {
        return Err(Error::InvalidInput("cannot sample from an empty corpus".into()));
    }
    let selected: Vec<&Document> = match plan.strategy {
        SamplingStrategy::Uniform => draw_uniform(corpus, plan)?,
        SamplingStrategy::Stratified => draw_stratified(corpus, plan)?,
    };
    let mut rendered_text = String::new();
    let mut doc_ids = Vec::with_capacity(selected.len());
    for doc in &selected {
        rendered_text.push_str(&render_doc(doc));
        doc_ids.push(doc.id.clone());
    }
    let estimated_tokens = estimate_tokens(&rendered_text, plan.token_ratio);
    debug_assert!(estimated_tokens <= plan.text_budget());
    Ok(SampleBlock {
        doc_ids,
        rendered_text,
        estimated_tokens,
        plan: plan.clone(),
    })
}

/// Documents ordered by seeded hash of id, ties broken by id.
fn hash_order<'c>(docs: impl Iterator<Item = &'c Document>, seed: u64) -> Vec<&'c Document> {
    let mut ranked: Vec<(u64, &Document)> = docs.map(|d| (id_rank(seed, &d.id), d)).collect();
    ranked.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    ranked.into_iter().map(|(_, d)| d).collect()
}

fn budget_error(plan: &SamplingPlan, first_doc_words: usize) -> Error {
    Error::BudgetTooSmall {
        needed: plan.overhead_tokens + (first_doc_words as f64 * plan.token_ratio).ceil() as usize,
        budget: plan.budget_tokens,
        overhead: plan.overhead_tokens,
    }
}

fn draw_uniform<'c>(corpus: &'c Corpus, plan: &SamplingPlan) -> Result<Vec<&'c Document>> {
    let ordered = hash_order(corpus.documents().iter(), plan.seed);
    let budget = plan.text_budget();
    let mut words = 0usize;
    let mut selected = Vec::new();
    for doc in ordered {
        let candidate = words + rendered_word_count(doc);
        if (candidate as f64 * plan.token_ratio).ceil() as usize > budget {
            break;
        }
        words = candidate;
        selected.push(doc);
    }
    if selected.is_empty() {
        let first = hash_order(corpus.documents().iter(), plan.seed)[0];
        return Err(budget_error(plan, rendered_word_count(first)));
    }
    Ok(selected)
}

fn draw_stratified<'c>(corpus: &'c Corpus, plan: &SamplingPlan) -> Result<Vec<&'c Document>> {
    let mut by_label: BTreeMap<String, Vec<&Document>> = BTreeMap::new();
    for doc in corpus.documents() {
        let label = doc.label.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "stratified sampling requires a label on every document; {:?} has none",
                doc.id
            ))
        })?;
        by_label.entry(label.clone()).or_default().push(doc);
    }
    for docs in by_label.values_mut() {
        *docs = hash_order(docs.iter().copied(), plan.seed);
    }
    let label_counts: BTreeMap<String, usize> =
        by_label.iter().map(|(l, d)| (l.clone(), d.len())).collect();
    // Per-label prefix sums of rendered word counts.
    let prefix_words: BTreeMap<&str, Vec<usize>> = by_label
        .iter()
        .map(|(label, docs)| {
            let mut sums = Vec::with_capacity(docs.len() + 1);
            sums.push(0usize);
            for doc in docs {
                sums.push(sums.last().unwrap() + rendered_word_count(doc));
            }
            (label.as_str(), sums)
        })
        .collect();
    let budget = plan.text_budget();
    let total_words_for = |n: usize| -> usize {
        let quotas = largest_remainder_quotas(&label_counts, n);
        quotas
            .iter()
            .map(|(label, &q)| prefix_words[label.as_str()][q])
            .sum()
    };
    let fits = |n: usize| -> bool {
        (total_words_for(n) as f64 * plan.token_ratio).ceil() as usize <= budget
    };
    if !fits(1) {
        return Err(budget_error(plan, total_words_for(1)));
    }
    // Grow the total until the next size would blow the budget.
    let mut n = 1usize;
    while n < corpus.len() && fits(n + 1) {
        n += 1;
    }
    let quotas = largest_remainder_quotas(&label_counts, n);
    let mut selected: Vec<&Document> = Vec::with_capacity(n);
    for (label, docs) in &by_label {
        selected.extend_from_slice(&docs[..quotas[label]]);
    }
    // Draw order: the same global hash order the uniform strategy uses.
    Ok(hash_order(selected.into_iter(), plan.seed))
}
