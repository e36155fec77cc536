//! Keyword-match document assignment and assignment accuracy.
//!
//! A document links to a topic when at least `m` of the topic's keywords
//! occur in it; a keyword occurs when its token sequence appears contiguously
//! in the document's token stream (so multiword phrases match as phrases,
//! and there is no stemming — "climates" never matches "climate").

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cards::TopicSet;
use crate::corpus::{tokenize, Corpus, Document};
use crate::{Error, Result};

/// One document→topic link with its supporting evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentLink {
    pub doc_id: String,
    pub topic: usize,
    pub matched_keywords: Vec<String>,
    pub hits: usize,
}

/// The full document→topics mapping for one topic set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    /// Sorted by (doc_id, topic) so output never depends on corpus order.
    pub links: Vec<AssignmentLink>,
    pub unassigned: Vec<String>,
    /// The m used to produce the links.
    pub threshold: usize,
}

impl Assignment {
    /// Topic indices linked to a document.
    pub fn topics_for(&self, doc_id: &str) -> Vec<usize> {
        self.links
            .iter()
            .filter(|l| l.doc_id == doc_id)
            .map(|l| l.topic)
            .collect()
    }
}

/// True iff the keyword's token sequence occurs contiguously in the
/// document's tokens. Empty keywords never match.
pub fn match_keyword(doc: &Document, keyword: &str) -> bool {
    let phrase = tokenize(keyword);
    contains_phrase(&doc.tokens, &phrase)
}

fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return false;
    }
    tokens.windows(phrase.len()).any(|w| w == phrase)
}

/// Map every document to the topics whose keywords it matches.
///
/// A (document, topic) pair links when the document contains at least `m`
/// distinct keywords of that topic; documents with no links at all are
/// collected in `unassigned`. The result is a pure function of the corpus
/// *contents* — document order never matters.
pub fn assign_documents(corpus: &Corpus, set: &TopicSet, m: usize) -> Result<Assignment> {
    if m == 0 {
        return Err(Error::InvalidInput("assignment threshold m must be at least 1".into()));
    }
    // Pre-tokenize each card's keywords once, deduplicated by token sequence.
    type CardPhrases = Vec<(String, Vec<String>)>;
    let card_phrases: Vec<(usize, CardPhrases)> = set
        .cards
        .iter()
        .map(|card| {
            let mut seen: HashSet<Vec<String>> = HashSet::new();
            let phrases = card
                .keywords
                .iter()
                .filter_map(|kw| {
                    let phrase = tokenize(kw);
                    if phrase.is_empty() || !seen.insert(phrase.clone()) {
                        None
                    } else {
                        Some((kw.clone(), phrase))
                    }
                })
                .collect();
            (card.index, phrases)
        })
        .collect();

    let mut links = Vec::new();
    let mut unassigned = Vec::new();
    for doc in corpus.documents() {
        let mut any_link = false;
        for (topic, phrases) in &card_phrases {
            let matched: Vec<String> = phrases
                .iter()
                .filter(|(_, phrase)| contains_phrase(&doc.tokens, phrase))
                .map(|(kw, _)| kw.clone())
                .collect();
            if matched.len() >= m {
                links.push(AssignmentLink {
                    doc_id: doc.id.clone(),
                    topic: *topic,
                    hits: matched.len(),
                    matched_keywords: matched,
                });
                any_link = true;
            }
        }
        if !any_link {
            unassigned.push(doc.id.clone());
        }
    }
    links.sort_by(|a, b| a.doc_id.cmp(&b.doc_id).then(a.topic.cmp(&b.topic)));
    unassigned.sort();
    Ok(Assignment {
        links,
        unassigned,
        threshold: m,
    })
}

/// Accuracy of the cards' claimed source titles against the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Correct claims / total claims; `None` when the set makes no claims.
    pub overall: Option<f64>,
    /// Per-card accuracy in card order; `None` for cards with no claims.
    pub per_topic: Vec<Option<f64>>,
    pub correct_claims: usize,
    pub total_claims: usize,
}

/// Score every (card, source title) claim.
///
/// A claim is correct iff the title resolves in the corpus (any document
/// with that exact title) and a resolved document contains at least one of
/// the card's keywords. Hallucinated titles count as incorrect — that is the
/// point of scoring claims rather than the keyword-derived assignment, which
/// would be correct by construction.
pub fn assignment_accuracy(set: &TopicSet, corpus: &Corpus) -> AccuracyReport {
    let mut correct_claims = 0usize;
    let mut total_claims = 0usize;
    let mut per_topic = Vec::with_capacity(set.k());
    for card in &set.cards {
        let phrases: Vec<Vec<String>> = card
            .keywords
            .iter()
            .map(|kw| tokenize(kw))
            .filter(|p| !p.is_empty())
            .collect();
        let mut card_correct = 0usize;
        for title in &card.source_titles {
            let resolved = corpus.resolve_title(title);
            let hit = resolved.iter().any(|id| {
                corpus
                    .document_by_id(id)
                    .map(|doc| phrases.iter().any(|p| contains_phrase(&doc.tokens, p)))
                    .unwrap_or(false)
            });
            if hit {
                card_correct += 1;
            }
        }
        let claims = card.source_titles.len();
        per_topic.push(if claims == 0 {
            None
        } else {
            Some(card_correct as f64 / claims as f64)
        });
        correct_claims += card_correct;
        total_claims += claims;
    }
    AccuracyReport {
        overall: if total_claims == 0 {
            None
        } else {
            Some(correct_claims as f64 / total_claims as f64)
        },
        per_topic,
        correct_claims,
        total_claims,
    }
}

/// Per-topic keyword evidence, the empirical topic–word profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicWordProfile {
    pub topic: usize,
    /// (doc id, keywords of this topic found in it), one entry per link.
    pub present_keywords: Vec<(String, Vec<String>)>,
}

impl TopicWordProfile {
    /// Normalized keyword-hit frequencies over the topic's assigned
    /// documents; empty when the topic has no links.
    pub fn word_distribution(&self) -> Vec<(String, f64)> {
        let mut counts: Vec<(String, usize)> = Vec::new();
        for (_, keywords) in &self.present_keywords {
            for kw in keywords {
                match counts.iter_mut().find(|(k, _)| k == kw) {
                    Some((_, c)) => *c += 1,
                    None => counts.push((kw.clone(), 1)),
                }
            }
        }
        let total: usize = counts.iter().map(|(_, c)| c).sum();
        counts
            .into_iter()
            .map(|(k, c)| (k, c as f64 / total as f64))
            .collect()
    }
}

/// Derive one profile per topic from an assignment, deterministically.
pub fn topic_word_profiles(assignment: &Assignment, set: &TopicSet) -> Vec<TopicWordProfile> {
    let mut by_topic: HashMap<usize, Vec<(String, Vec<String>)>> = HashMap::new();
    for link in &assignment.links {
        by_topic
            .entry(link.topic)
            .or_default()
            .push((link.doc_id.clone(), link.matched_keywords.clone()));
    }
    set.cards
        .iter()
        .map(|card| TopicWordProfile {
            topic: card.index,
            present_keywords: by_topic.remove(&card.index).unwrap_or_default(),
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct UnassignedRecord {
    unassigned: Vec<String>,
}

/// Persist as JSONL: one link per line, then a trailing record listing
/// unassigned document ids.
pub fn save_assignment(assignment: &Assignment, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    for link in &assignment.links {
        let line = serde_json::to_string(link).expect("link serializes");
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    let trailer = serde_json::to_string(&UnassignedRecord {
        unassigned: assignment.unassigned.clone(),
    })
    .expect("trailer serializes");
    writeln!(file, "{trailer}").map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_assignment(path: impl AsRef<Path>, threshold: usize) -> Result<Assignment> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut links = Vec::new();
    let mut unassigned = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(link) = serde_json::from_str::<AssignmentLink>(&line) {
            links.push(link);
        } else if let Ok(trailer) = serde_json::from_str::<UnassignedRecord>(&line) {
            unassigned = trailer.unassigned;
        } else {
            return Err(Error::ParseFailure {
                reason: format!("unrecognized assignment record in {}", path.display()),
                excerpt: crate::jsonx::excerpt(&line, 200),
            });
        }
    }
    Ok(Assignment {
        links,
        unassigned,
        threshold,
    })
}
