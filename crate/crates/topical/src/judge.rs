//! LLM-as-judge scoring of topic cards.
//!
//! Each card is scored individually — one call per topic, so a single bad
//! response never poisons the batch — on coherence, conciseness, and
//! informativeness, integer 1–5 each. The judge sees the summary and the
//! keywords; the rubric below is versioned with the crate.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cards::TopicCard;
use crate::gateway::CompletionRequest;
use crate::jsonx;
use crate::metrics::JudgeBlock;
use crate::{sha256_hex, Error, Result};

pub const JUDGE_SYSTEM: &str =
    "You are a strict evaluation judge for topic-model outputs. Output pure JSON only.";

const RUBRIC: &str = "\
Rate the topic on three dimensions, each an integer from 1 (worst) to 5 (best):
- coherence: the summary and keywords describe one clear, internally consistent theme. 1 = mixed or contradictory; 5 = a single crisp theme.
- concise: the summary is brief and free of filler or redundancy. 1 = rambling; 5 = tight, no wasted words.
- informative: the topic conveys specific, useful information about the underlying documents. 1 = vague or generic; 5 = specific and substantive.

Respond with a JSON object only, no other text: {\"coherence\": int, \"concise\": int, \"informative\": int}";

/// One topic's judge ratings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeScore {
    pub topic: usize,
    pub coherence: u8,
    pub concise: u8,
    pub informative: u8,
    /// SHA-256 of the raw judge response this score was parsed from.
    pub raw_digest: String,
}

/// The three parsed dimension values, before they're tied to a topic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimensionScores {
    pub coherence: u8,
    pub concise: u8,
    pub informative: u8,
}

impl JudgeScore {
    pub fn new(topic: usize, scores: DimensionScores, raw_response: &str) -> Self {
        JudgeScore {
            topic,
            coherence: scores.coherence,
            concise: scores.concise,
            informative: scores.informative,
            raw_digest: sha256_hex(raw_response.as_bytes()),
        }
    }
}

/// Build the scoring request for one card: summary, keywords, rubric, and a
/// strict JSON-only output instruction.
pub fn build_judge_prompt(card: &TopicCard) -> Result<CompletionRequest> {
    if card.summary.trim().is_empty() {
        return Err(Error::InvalidInput(format!(
            "topic {} has an empty summary and cannot be judged",
            card.index
        )));
    }
    let user = format!(
        "You are scoring one topic produced by a topic model.\n\n\
         Topic summary: {}\n\
         Topic keywords: {}\n\n\
         {RUBRIC}",
        card.summary,
        card.keywords.join(", "),
    );
    Ok(CompletionRequest::new(JUDGE_SYSTEM, user))
}

/// Parse the judge's reply: the first JSON object with all three dimensions
/// as integers in [1, 5]. Missing keys, non-integers, and out-of-range
/// values are all errors.
pub fn parse_judge_scores(raw: &str) -> Result<DimensionScores> {
    let parse_failure = |reason: String| Error::ParseFailure {
        reason,
        excerpt: jsonx::excerpt(raw, 200),
    };
    let body = jsonx::strip_code_fences(raw);
    let object = jsonx::first_json_object(body)
        .or_else(|| jsonx::first_json_object(raw))
        .ok_or_else(|| parse_failure("no JSON object found in judge response".into()))?;
    let dimension = |key: &str| -> Result<u8> {
        let value = object
            .get(key)
            .ok_or_else(|| parse_failure(format!("judge response is missing key {key:?}")))?;
        let n = match value {
            Value::Number(n) => n
                .as_i64()
                .ok_or_else(|| parse_failure(format!("{key} must be an integer, got {value}")))?,
            other => {
                return Err(parse_failure(format!("{key} must be an integer, got {other}")));
            }
        };
        if !(1..=5).contains(&n) {
            return Err(parse_failure(format!("{key} must be in [1, 5], got {n}")));
        }
        Ok(n as u8)
    };
    Ok(DimensionScores {
        coherence: dimension("coherence")?,
        concise: dimension("concise")?,
        informative: dimension("informative")?,
    })
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Arithmetic means per dimension, reported to 3 decimals.
pub fn aggregate_scores(scores: &[JudgeScore]) -> Result<JudgeBlock> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("cannot aggregate zero judge scores".into()));
    }
    let n = scores.len() as f64;
    Ok(JudgeBlock {
        coherence: round3(scores.iter().map(|s| s.coherence as f64).sum::<f64>() / n),
        concise: round3(scores.iter().map(|s| s.concise as f64).sum::<f64>() / n),
        informative: round3(scores.iter().map(|s| s.informative as f64).sum::<f64>() / n),
        topics_scored: scores.len(),
    })
}

/// Persist judge scores as JSONL, one score per line, topic order.
pub fn save_scores(scores: &[JudgeScore], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    for score in scores {
        let line = serde_json::to_string(score).expect("score serializes");
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<Vec<JudgeScore>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut scores = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        scores.push(serde_json::from_str(&line).map_err(|e| Error::ParseFailure {
            reason: format!("invalid judge record in {}: {e}", path.display()),
            excerpt: jsonx::excerpt(&line, 200),
        })?);
    }
    Ok(scores)
}
