//! Topic-quality metrics: NPMI, diversity, entropies, and the run report.
//!
//! Co-occurrence is counted at the document level over atomic keyword units
//! (a multiword keyword is one unit — splitting it would score fragments the
//! model never asserted), always on the full corpus, never the sample.
//! All logs are natural; entropies are in nats.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cards::{TopicCard, TopicSet};
use crate::corpus::{tokenize, Corpus};
use crate::{Error, Result};

pub const DEFAULT_TOP_N: usize = 10;
pub const DEFAULT_TOP_K: usize = 10;
pub const DEFAULT_NPMI_EPS: f64 = 1e-12;

/// Document-frequency and joint-document-frequency table for keyword units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceTable {
    doc_count: usize,
    df: HashMap<String, usize>,
    co_df: HashMap<(String, String), usize>,
}

impl CooccurrenceTable {
    /// Documents in the underlying corpus (N).
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    /// Documents containing `unit`; 0 if it never occurs.
    pub fn df(&self, unit: &str) -> usize {
        self.df.get(unit).copied().unwrap_or(0)
    }

    /// Documents containing both units; order-independent.
    pub fn co_df(&self, a: &str, b: &str) -> usize {
        let key = pair_key(a, b);
        self.co_df.get(&key).copied().unwrap_or(0)
    }
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Count document-level (joint) frequencies of the given units over the full
/// corpus. A unit is present in a document when its token sequence occurs
/// contiguously, exactly like keyword matching.
pub fn build_cooccurrence(corpus: &Corpus, units: &[String]) -> CooccurrenceTable {
    let distinct: BTreeSet<&String> = units.iter().collect();
    let phrases: Vec<(&String, Vec<String>)> = distinct
        .into_iter()
        .map(|u| (u, tokenize(u)))
        .filter(|(_, p)| !p.is_empty())
        .collect();
    let mut df: HashMap<String, usize> = HashMap::new();
    let mut co_df: HashMap<(String, String), usize> = HashMap::new();
    for doc in corpus.documents() {
        let present: Vec<&String> = phrases
            .iter()
            .filter(|(_, phrase)| {
                phrase.len() <= doc.tokens.len()
                    && doc.tokens.windows(phrase.len()).any(|w| w == &phrase[..])
            })
            .map(|(unit, _)| *unit)
            .collect();
        for unit in &present {
            *df.entry((*unit).clone()).or_insert(0) += 1;
        }
        for i in 0..present.len() {
            for j in i + 1..present.len() {
                *co_df.entry(pair_key(present[i], present[j])).or_insert(0) += 1;
            }
        }
    }
    CooccurrenceTable {
        doc_count: corpus.len(),
        df,
        co_df,
    }
}

/// Normalized pointwise mutual information of a unit pair, in [−1, 1].
///
/// With P(x) = df(x)/N and P(a,b) = (co_df(a,b) + eps)/N:
/// NPMI = log(P(a,b) / (P(a)·P(b))) / (−log P(a,b)).
/// Returns `None` (pair skipped) when either unit has df = 0.
pub fn npmi_pair(table: &CooccurrenceTable, a: &str, b: &str, eps: f64) -> Option<f64> {
    let df_a = table.df(a);
    let df_b = table.df(b);
    if df_a == 0 || df_b == 0 {
        return None;
    }
    let n = table.doc_count() as f64;
    let p_a = df_a as f64 / n;
    let p_b = df_b as f64 / n;
    let p_ab = (table.co_df(a, b) as f64 + eps) / n;
    if p_ab <= 0.0 {
        // eps = 0 with no co-occurrence: the anti-association limit.
        return Some(-1.0);
    }
    let denominator = -p_ab.ln();
    if denominator <= 0.0 {
        // P(a,b) ≥ 1: both units are in every document.
        return Some(1.0);
    }
    let value = (p_ab / (p_a * p_b)).ln() / denominator;
    Some(value.clamp(-1.0, 1.0))
}

/// NPMI of one topic card plus its vocabulary coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicNpmi {
    /// Mean pairwise NPMI over in-vocabulary top keywords; `None` when fewer
    /// than two keywords occur in the corpus at all.
    pub value: Option<f64>,
    /// Fraction of the counted top keywords with df > 0.
    pub coverage: f64,
}

/// Average NPMI over all unordered pairs among the card's first
/// `min(top_n, |keywords|)` keywords that occur in the corpus.
pub fn topic_npmi(
    table: &CooccurrenceTable,
    card: &TopicCard,
    top_n: usize,
    eps: f64,
) -> TopicNpmi {
    debug_assert!(top_n >= 2);
    let mut window: Vec<&String> = Vec::new();
    let mut seen = HashSet::new();
    for kw in card.keywords.iter().take(top_n) {
        if seen.insert(kw.as_str()) {
            window.push(kw);
        }
    }
    if window.is_empty() {
        return TopicNpmi {
            value: None,
            coverage: 0.0,
        };
    }
    let in_vocab: Vec<&String> = window.iter().copied().filter(|kw| table.df(kw) > 0).collect();
    let coverage = in_vocab.len() as f64 / window.len() as f64;
    if in_vocab.len() < 2 {
        return TopicNpmi {
            value: None,
            coverage,
        };
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..in_vocab.len() {
        for j in i + 1..in_vocab.len() {
            if let Some(v) = npmi_pair(table, in_vocab[i], in_vocab[j], eps) {
                sum += v;
                pairs += 1;
            }
        }
    }
    TopicNpmi {
        value: Some(sum / pairs as f64),
        coverage,
    }
}

/// Set-level NPMI: per-topic values plus their mean over non-missing topics.
pub fn set_npmi(
    table: &CooccurrenceTable,
    set: &TopicSet,
    top_n: usize,
    eps: f64,
) -> (Option<f64>, Vec<TopicNpmi>) {
    let per_topic: Vec<TopicNpmi> = set
        .cards
        .iter()
        .map(|card| topic_npmi(table, card, top_n, eps))
        .collect();
    let computed: Vec<f64> = per_topic.iter().filter_map(|t| t.value).collect();
    let mean = if computed.is_empty() {
        None
    } else {
        Some(computed.iter().sum::<f64>() / computed.len() as f64)
    };
    (mean, per_topic)
}

/// Fraction of unique keywords among the top-k keywords pooled across topics
/// (case-folded exact strings). 1.0 means no repetition anywhere.
pub fn topic_diversity(set: &TopicSet, top_k: usize) -> f64 {
    debug_assert!(top_k >= 1);
    let mut total = 0usize;
    let mut distinct = HashSet::new();
    for card in &set.cards {
        for kw in card.keywords.iter().take(top_k) {
            total += 1;
            distinct.insert(kw.to_lowercase());
        }
    }
    if total == 0 {
        return 1.0;
    }
    distinct.len() as f64 / total as f64
}

/// Shannon entropy in nats: −Σ p·ln p with 0·ln 0 = 0.
///
/// Entries must be non-negative and sum to 1 within 1e-9.
pub fn entropy(probabilities: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for &p in probabilities {
        if p < 0.0 {
            return Err(Error::InvalidInput(format!(
                "probabilities must be non-negative, got {p}"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { sum });
    }
    Ok(probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum())
}

/// Aggregate judge means on the 1–5 scale, 3-decimal precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeBlock {
    pub coherence: f64,
    pub concise: f64,
    pub informative: f64,
    pub topics_scored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpmiBlock {
    pub mean: Option<f64>,
    pub per_topic: Vec<Option<f64>>,
    pub coverage: Vec<f64>,
}

/// Run metadata pinned into the report so a number can always be traced back
/// to the knobs that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub model: String,
    pub judge_model: Option<String>,
    pub topics: usize,
    pub documents: usize,
    pub sampled_documents: usize,
    pub seed: u64,
    pub threshold_m: usize,
    pub top_n: usize,
    pub top_k: usize,
    pub npmi_eps: f64,
    pub salience_scheme: String,
    /// Entropies use natural log.
    pub log_base: String,
    /// The judge sees keywords alongside the summary.
    pub judge_sees_keywords: bool,
    pub unassigned_documents: usize,
}

/// Everything one run produces, with missing metrics explicitly null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub npmi: NpmiBlock,
    pub diversity: f64,
    /// H of the context-conditioned topic distribution, in nats.
    pub topic_entropy: f64,
    /// Per-topic keyword-salience entropy, in nats; `None` for cards with no
    /// keywords.
    pub word_entropies: Vec<Option<f64>>,
    pub assignment_accuracy: Option<f64>,
    pub assignment_accuracy_per_topic: Vec<Option<f64>>,
    pub judge: Option<JudgeBlock>,
    pub meta: ReportMeta,
}

impl MetricsReport {
    /// Pretty JSON with struct-declaration key order — stable across runs.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_pretty()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::ParseFailure {
            reason: format!("invalid report file {}: {e}", path.display()),
            excerpt: String::new(),
        })
    }

    /// One CSV row in results-table column order:
    /// model, NPMI, diversity, coherence, concise, informative, accuracy.
    /// Missing metrics are empty cells.
    pub fn csv_row(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            v.map(|x| format!("{x:.4}")).unwrap_or_default()
        }
        let (coherence, concise, informative) = match &self.judge {
            Some(j) => (Some(j.coherence), Some(j.concise), Some(j.informative)),
            None => (None, None, None),
        };
        format!(
            "{},{},{:.4},{},{},{},{}",
            self.meta.model,
            cell(self.npmi.mean),
            self.diversity,
            cell(coherence),
            cell(concise),
            cell(informative),
            cell(self.assignment_accuracy),
        )
    }

    pub const CSV_HEADER: &'static str =
        "model,npmi,diversity,coherence,concise,informative,assignment_accuracy";
}

/// Assemble the report, checking the ranges every field promises.
#[allow(clippy::too_many_arguments)]
pub fn build_report(
    npmi: NpmiBlock,
    diversity: f64,
    topic_entropy: f64,
    word_entropies: Vec<Option<f64>>,
    assignment_accuracy: Option<f64>,
    assignment_accuracy_per_topic: Vec<Option<f64>>,
    judge: Option<JudgeBlock>,
    meta: ReportMeta,
) -> Result<MetricsReport> {
    if !(0.0..=1.0).contains(&diversity) {
        return Err(Error::InvalidInput(format!("diversity out of range: {diversity}")));
    }
    if let Some(acc) = assignment_accuracy {
        if !(0.0..=1.0).contains(&acc) {
            return Err(Error::InvalidInput(format!("accuracy out of range: {acc}")));
        }
    }
    if topic_entropy < 0.0 {
        return Err(Error::InvalidInput(format!("negative entropy: {topic_entropy}")));
    }
    Ok(MetricsReport {
        npmi,
        diversity,
        topic_entropy,
        word_entropies,
        assignment_accuracy,
        assignment_accuracy_per_topic,
        judge,
        meta,
    })
}
