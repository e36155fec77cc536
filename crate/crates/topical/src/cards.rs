//! Topic cards: prompt construction, parsing, validation, and the
//! distributions derived from them.
//!
//! A topic card is the structured unit the generation model emits: a
//! one-sentence summary, keywords in salience order, and exact source titles
//! copied from the prompt. Parsing is deliberately tolerant (models fence
//! and wrap their JSON); validation is strict and reports every violation of
//! the prompt's stated constraints.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assignment::Assignment;
use crate::corpus::Corpus;
use crate::gateway::CompletionRequest;
use crate::jsonx;
use crate::sampler::SampleBlock;
use crate::{sha256_hex, Error, Result};

/// Instruction block of the generation prompt, sent ahead of the sampled
/// text. The constraints it states (topic minimum, keyword and title ranges,
/// no duplicate titles) are exactly what [`validate_topic_set`] enforces.
pub const GENERATION_PROMPT: &str = "Please conduct thematic analysis on the provided text data to generate independent topics that balance generalization and specificity. IMPORTANT: For \"Source Titles\", ONLY copy exact titles from input data (look for \"Title: [actual title]\" lines). Output pure JSON format: [{\"Topic 1\": {\"Summary\": \"One-sentence topic summary\",\"Keywords\": [\"keyword1\", \"keyword2\", \"keyword3\", \"keyword4\", \"keyword5\"],\"Source Titles\": [\"Exact title 1\", \"Exact title 2\", \"Exact title 3\"]}}]. Core requirements: minimum 3 topics, 5\u{2013}12 keywords per topic, 3\u{2013}8 exact source titles per topic, semantic coherence, minimized repetition, and no duplicated titles within the same topic.";

pub const GENERATION_SYSTEM: &str =
    "You are a careful thematic analyst. Output pure JSON only.";

pub const MIN_TOPICS: usize = 3;
pub const KEYWORDS_MIN: usize = 5;
pub const KEYWORDS_MAX: usize = 12;
pub const TITLES_MIN: usize = 3;
pub const TITLES_MAX: usize = 8;

/// One generated topic. `keywords` order is salience rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicCard {
    /// 1-based ordinal within its set.
    pub index: usize,
    pub summary: String,
    pub keywords: Vec<String>,
    pub source_titles: Vec<String>,
}

impl TopicCard {
    /// A card we can still score even if it violates the prompt's bounds:
    /// it has something to summarize and something to match on.
    pub fn usable(&self) -> bool {
        !self.summary.trim().is_empty() && !self.keywords.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub sample_id: String,
    /// SHA-256 of the raw model response the set was parsed from.
    pub raw_digest: String,
}

/// A validated-or-flagged collection of topic cards from one generation run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSet {
    pub cards: Vec<TopicCard>,
    pub provenance: Provenance,
}

impl TopicSet {
    /// Number of topics K.
    pub fn k(&self) -> usize {
        self.cards.len()
    }

    pub fn usable_cards(&self) -> usize {
        self.cards.iter().filter(|c| c.usable()).count()
    }

    /// Canonical topics file: pretty JSON with stable field order, so runs
    /// diff cleanly.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("topic set serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::ParseFailure {
            reason: format!("invalid topics file {}: {e}", path.display()),
            excerpt: String::new(),
        })
    }
}

/// Build the generation request: the verbatim instruction block followed by
/// the sample's rendered text.
pub fn build_generation_prompt(sample: &SampleBlock) -> Result<CompletionRequest> {
    if sample.is_empty() {
        return Err(Error::InvalidInput(
            "cannot build a generation prompt from an empty sample".into(),
        ));
    }
    let user = format!("{GENERATION_PROMPT}\n\n{}", sample.rendered_text);
    Ok(CompletionRequest::new(GENERATION_SYSTEM, user))
}

/// Parse a raw model response into a [`TopicSet`].
///
/// Tolerance tiers, applied in order: strip code fences; locate the first
/// balanced JSON array; accept both the single-key `{"Topic N": {...}}`
/// wrapping and plain card objects; match card keys case-insensitively.
/// Cards that violate per-card bounds are retained — set-level judgment
/// belongs to [`validate_topic_set`].
pub fn parse_topic_cards(raw: &str) -> Result<TopicSet> {
    let parse_failure = |reason: &str| Error::ParseFailure {
        reason: reason.to_string(),
        excerpt: jsonx::excerpt(raw, 200),
    };
    let body = jsonx::strip_code_fences(raw);
    let array = jsonx::first_json_array(body)
        .or_else(|| jsonx::first_json_array(raw))
        .ok_or_else(|| parse_failure("no balanced JSON array found"))?;
    let items = match array {
        Value::Array(items) => items,
        _ => unreachable!("first_json_array returns arrays"),
    };
    let mut cards = Vec::new();
    for item in &items {
        if let Some(card) = normalize_card(item, cards.len() + 1) {
            cards.push(card);
        }
    }
    if cards.is_empty() {
        return Err(parse_failure("JSON array contains no recognizable topic cards"));
    }
    Ok(TopicSet {
        cards,
        provenance: Provenance {
            model: String::new(),
            sample_id: String::new(),
            raw_digest: sha256_hex(raw.as_bytes()),
        },
    })
}

/// Key lookup that ignores case and separators: "Source Titles",
/// "source_titles", and "SourceTitles" all hit the same slot.
fn canonical_key(key: &str) -> String {
    key.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(|c| c.to_lowercase())
        .collect()
}

fn field<'v>(object: &'v serde_json::Map<String, Value>, wanted: &str) -> Option<&'v Value> {
    object
        .iter()
        .find(|(k, _)| canonical_key(k) == wanted)
        .map(|(_, v)| v)
}

fn string_list(value: Option<&Value>) -> Vec<String> {
    match value {
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(|v| match v {
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => Some(n.to_string()),
                _ => None,
            })
            .collect(),
        Some(Value::String(s)) => vec![s.clone()],
        _ => Vec::new(),
    }
}

fn normalize_card(item: &Value, ordinal: usize) -> Option<TopicCard> {
    let object = item.as_object()?;
    // Unwrap the paper-style single-key shape: {"Topic 1": { ...card... }}.
    let object = if object.len() == 1 {
        match object.values().next() {
            Some(Value::Object(inner)) => inner,
            _ => object,
        }
    } else {
        object
    };
    let summary = field(object, "summary").and_then(Value::as_str).unwrap_or("");
    let keywords = string_list(field(object, "keywords"));
    let source_titles = string_list(field(object, "sourcetitles"));
    let recognizable = field(object, "summary").is_some()
        || field(object, "keywords").is_some()
        || field(object, "sourcetitles").is_some();
    if !recognizable {
        return None;
    }
    Some(TopicCard {
        index: ordinal,
        summary: summary.to_string(),
        keywords,
        source_titles,
    })
}

/// One constraint violation found by [`validate_topic_set`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    TooFewTopics { found: usize },
    KeywordCount { topic: usize, count: usize },
    TitleCount { topic: usize, count: usize },
    DuplicateTitle { topic: usize, title: String },
    HallucinatedTitle { topic: usize, title: String },
    EmptySummary { topic: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Fraction of pooled keywords (case-folded) that are repeats of an
    /// earlier keyword; 0.0 means no cross-card repetition at all.
    pub keyword_repetition_rate: f64,
    pub usable_cards: usize,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

/// Check every constraint the generation prompt states. All findings are
/// report entries; nothing here is fatal.
pub fn validate_topic_set(set: &TopicSet, corpus: &Corpus) -> ValidationReport {
    let mut violations = Vec::new();
    if set.k() < MIN_TOPICS {
        violations.push(Violation::TooFewTopics { found: set.k() });
    }
    for card in &set.cards {
        if card.summary.trim().is_empty() {
            violations.push(Violation::EmptySummary { topic: card.index });
        }
        if !(KEYWORDS_MIN..=KEYWORDS_MAX).contains(&card.keywords.len()) {
            violations.push(Violation::KeywordCount {
                topic: card.index,
                count: card.keywords.len(),
            });
        }
        if !(TITLES_MIN..=TITLES_MAX).contains(&card.source_titles.len()) {
            violations.push(Violation::TitleCount {
                topic: card.index,
                count: card.source_titles.len(),
            });
        }
        let mut seen = HashSet::new();
        let mut reported_duplicates = HashSet::new();
        for title in &card.source_titles {
            if !seen.insert(title.as_str()) && reported_duplicates.insert(title.as_str()) {
                violations.push(Violation::DuplicateTitle {
                    topic: card.index,
                    title: title.clone(),
                });
            }
        }
        // One hallucination finding per distinct unverifiable title, in
        // card order so reports serialize deterministically.
        let mut hallucination_checked = HashSet::new();
        for title in &card.source_titles {
            if hallucination_checked.insert(title.as_str())
                && corpus.resolve_title(title).is_empty()
            {
                violations.push(Violation::HallucinatedTitle {
                    topic: card.index,
                    title: title.clone(),
                });
            }
        }
    }
    let mut pooled = 0usize;
    let mut distinct = HashSet::new();
    for card in &set.cards {
        for keyword in &card.keywords {
            pooled += 1;
            distinct.insert(keyword.to_lowercase());
        }
    }
    let keyword_repetition_rate = if pooled == 0 {
        0.0
    } else {
        1.0 - distinct.len() as f64 / pooled as f64
    };
    ValidationReport {
        violations,
        keyword_repetition_rate,
        usable_cards: set.usable_cards(),
    }
}

/// Salience weighting scheme for a card's keyword distribution P_k(w).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SalienceScheme {
    /// Rank r gets weight ∝ 1/r — uses the only salience signal a card
    /// carries, its keyword order.
    ReciprocalRank,
    Uniform,
}

/// A topic's normalized salience distribution over its own keywords.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordSalience {
    pub topic: usize,
    /// (keyword, probability) in the card's keyword order; sums to 1.
    pub weights: Vec<(String, f64)>,
}

impl KeywordSalience {
    pub fn probabilities(&self) -> Vec<f64> {
        self.weights.iter().map(|(_, p)| *p).collect()
    }
}

pub fn keyword_salience(card: &TopicCard, scheme: SalienceScheme) -> Result<KeywordSalience> {
    if card.keywords.is_empty() {
        return Err(Error::InvalidInput(format!(
            "topic {} has no keywords to weight",
            card.index
        )));
    }
    let raw: Vec<f64> = match scheme {
        SalienceScheme::ReciprocalRank => (1..=card.keywords.len())
            .map(|rank| 1.0 / rank as f64)
            .collect(),
        SalienceScheme::Uniform => vec![1.0; card.keywords.len()],
    };
    let total: f64 = raw.iter().sum();
    let weights = card
        .keywords
        .iter()
        .zip(raw)
        .map(|(keyword, w)| (keyword.clone(), w / total))
        .collect();
    Ok(KeywordSalience {
        topic: card.index,
        weights,
    })
}

/// Empirical context-conditioned topic distribution P(z_k | X).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextTopicDistribution {
    /// (topic index, probability) for every topic in the set; sums to 1.
    pub probabilities: Vec<(usize, f64)>,
}

impl ContextTopicDistribution {
    pub fn values(&self) -> Vec<f64> {
        self.probabilities.iter().map(|(_, p)| *p).collect()
    }
}

/// Derive P(z_k | X) from assignment counts with add-one smoothing, so every
/// topic keeps strictly positive support even with zero links.
pub fn context_topic_distribution(
    assignment: &Assignment,
    set: &TopicSet,
) -> ContextTopicDistribution {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for link in &assignment.links {
        *counts.entry(link.topic).or_insert(0) += 1;
    }
    let total_links = assignment.links.len();
    let denominator = (total_links + set.k()) as f64;
    let probabilities = set
        .cards
        .iter()
        .map(|card| {
            let count = counts.get(&card.index).copied().unwrap_or(0);
            (card.index, (count + 1) as f64 / denominator)
        })
        .collect();
    ContextTopicDistribution { probabilities }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::AssignmentLink;
    use crate::corpus::Document;
    use crate::sampler::{draw_sample, SamplingPlan};

    fn sample_block() -> SampleBlock {
        let docs = vec![
            Document::new("a", "Fed Raises Rates", Some("economy inflation".into()), None),
            Document::new("b", "Team Wins Final", Some("sports victory".into()), None),
        ];
        let corpus = Corpus::from_documents(docs).unwrap();
        draw_sample(&corpus, &SamplingPlan::default()).unwrap()
    }

    fn card(index: usize, summary: &str, keywords: &[&str], titles: &[&str]) -> TopicCard {
        TopicCard {
            index,
            summary: summary.into(),
            keywords: keywords.iter().map(|s| s.to_string()).collect(),
            source_titles: titles.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn generation_prompt_carries_the_instruction_block_verbatim() {
        let request = build_generation_prompt(&sample_block()).unwrap();
        assert!(request
            .user
            .contains("IMPORTANT: For \"Source Titles\", ONLY copy exact titles"));
        assert!(request.user.contains("minimum 3 topics, 5\u{2013}12 keywords per topic"));
        assert_eq!(request.system, GENERATION_SYSTEM);
    }

    #[test]
    fn generation_prompt_embeds_every_title_line() {
        let sample = sample_block();
        let request = build_generation_prompt(&sample).unwrap();
        for line in sample.rendered_text.lines().filter(|l| l.starts_with("Title: ")) {
            assert!(request.user.contains(line));
        }
        assert!(request.user.ends_with(&sample.rendered_text));
    }

    #[test]
    fn empty_sample_violates_the_prompt_precondition() {
        let empty = SampleBlock {
            doc_ids: vec![],
            rendered_text: String::new(),
            estimated_tokens: 0,
            plan: SamplingPlan::default(),
        };
        assert!(build_generation_prompt(&empty).is_err());
    }

    const PAPER_SHAPE: &str = r#"[
        {"Topic 1": {"Summary": "Central banks tighten policy.",
                     "Keywords": ["rates", "inflation", "fed", "policy", "banks"],
                     "Source Titles": ["Fed Raises Rates", "ECB Holds Steady", "Banks Brace"]}},
        {"Topic 2": {"Summary": "Championship season wraps up.",
                     "Keywords": ["finals", "teams", "victory", "season", "fans"],
                     "Source Titles": ["Team Wins Final", "Fans Celebrate", "Season Review"]}},
        {"Topic 3": {"Summary": "Studios bet on sequels.",
                     "Keywords": ["film", "studio", "sequel", "box office", "audience"],
                     "Source Titles": ["Sequel Tops Charts", "Studio Earnings Up", "Audience Returns"]}}
    ]"#;

    #[test]
    fn paper_shape_parses_to_three_cards() {
        let set = parse_topic_cards(PAPER_SHAPE).unwrap();
        assert_eq!(set.k(), 3);
        assert_eq!(set.cards[0].summary, "Central banks tighten policy.");
        assert_eq!(set.cards[0].keywords.len(), 5);
        assert_eq!(set.cards[1].index, 2);
        assert_eq!(set.cards[2].source_titles[0], "Sequel Tops Charts");
    }

    #[test]
    fn fenced_and_prose_wrapped_output_parses_identically() {
        let plain = parse_topic_cards(PAPER_SHAPE).unwrap();
        let fenced = format!("Here are the topics you asked for!\n```json\n{PAPER_SHAPE}\n```\nLet me know.");
        let parsed = parse_topic_cards(&fenced).unwrap();
        assert_eq!(parsed.cards, plain.cards);
    }

    #[test]
    fn refusal_text_is_a_parse_failure() {
        let err = parse_topic_cards("I cannot help with that.").unwrap_err();
        assert!(matches!(err, Error::ParseFailure { .. }));
    }

    #[test]
    fn truncated_output_is_a_parse_failure_not_a_crash() {
        let cut = &PAPER_SHAPE[..PAPER_SHAPE.len() / 2];
        assert!(matches!(parse_topic_cards(cut), Err(Error::ParseFailure { .. })));
    }

    #[test]
    fn key_case_variants_are_tolerated() {
        let lower = r#"[{"summary": "s1", "keywords": ["a","b","c","d","e"], "source_titles": ["T1","T2","T3"]}]"#;
        let set = parse_topic_cards(lower).unwrap();
        assert_eq!(set.cards[0].summary, "s1");
        assert_eq!(set.cards[0].keywords.len(), 5);
        assert_eq!(set.cards[0].source_titles.len(), 3);
    }

    #[test]
    fn parse_is_idempotent_on_serialized_output() {
        let first = parse_topic_cards(PAPER_SHAPE).unwrap();
        let serialized = serde_json::to_string_pretty(&first).unwrap();
        let second = parse_topic_cards(&serialized).unwrap();
        assert_eq!(first.cards, second.cards);
    }

    #[test]
    fn canonical_file_round_trips() {
        let set = parse_topic_cards(PAPER_SHAPE).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        set.save(f.path()).unwrap();
        assert_eq!(TopicSet::load(f.path()).unwrap(), set);
    }

    fn test_corpus() -> Corpus {
        let titles = [
            "Fed Raises Rates",
            "ECB Holds Steady",
            "Banks Brace",
            "Team Wins Final",
            "Fans Celebrate",
            "Season Review",
        ];
        let docs = titles
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{i}"), *t, None, None))
            .collect();
        Corpus::from_documents(docs).unwrap()
    }

    fn valid_set() -> TopicSet {
        TopicSet {
            cards: vec![
                card(1, "Monetary policy.", &["rates", "inflation", "fed", "policy", "banks"],
                     &["Fed Raises Rates", "ECB Holds Steady", "Banks Brace"]),
                card(2, "Sports finals.", &["finals", "teams", "victory", "season", "fans"],
                     &["Team Wins Final", "Fans Celebrate", "Season Review"]),
                card(3, "Something else.", &["alpha", "beta", "gamma", "delta", "epsilon"],
                     &["Fed Raises Rates", "Team Wins Final", "Season Review"]),
            ],
            provenance: Provenance::default(),
        }
    }

    #[test]
    fn clean_set_yields_no_violations() {
        let report = validate_topic_set(&valid_set(), &test_corpus());
        assert!(report.is_clean(), "unexpected violations: {:?}", report.violations);
        assert_eq!(report.usable_cards, 3);
        assert_eq!(report.keyword_repetition_rate, 0.0);
    }

    #[test]
    fn thirteen_keywords_is_exactly_one_keyword_violation() {
        let mut set = valid_set();
        set.cards[0].keywords = (0..13).map(|i| format!("k{i}")).collect();
        let report = validate_topic_set(&set, &test_corpus());
        assert_eq!(
            report.violations,
            vec![Violation::KeywordCount { topic: 1, count: 13 }]
        );
    }

    #[test]
    fn hallucinated_title_violation_names_the_title() {
        let mut set = valid_set();
        set.cards[1].source_titles[2] = "Totally Invented Headline".into();
        let report = validate_topic_set(&set, &test_corpus());
        assert_eq!(
            report.violations,
            vec![Violation::HallucinatedTitle {
                topic: 2,
                title: "Totally Invented Headline".into()
            }]
        );
    }

    #[test]
    fn reciprocal_rank_salience_matches_hand_normalization() {
        // Weights ∝ (1, 1/2, 1/3) normalize to (6/11, 3/11, 2/11).
        let c = card(1, "s", &["a", "b", "c"], &[]);
        let salience = keyword_salience(&c, SalienceScheme::ReciprocalRank).unwrap();
        let expected = [6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0];
        for ((_, got), want) in salience.weights.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn uniform_salience_splits_evenly() {
        let c = card(1, "s", &["a", "b", "c", "d"], &[]);
        let salience = keyword_salience(&c, SalienceScheme::Uniform).unwrap();
        for (_, p) in &salience.weights {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn single_keyword_is_a_point_mass_under_either_scheme() {
        let c = card(1, "s", &["only"], &[]);
        for scheme in [SalienceScheme::ReciprocalRank, SalienceScheme::Uniform] {
            let salience = keyword_salience(&c, scheme).unwrap();
            assert_eq!(salience.weights, vec![("only".to_string(), 1.0)]);
        }
    }

    fn assignment_with_links(counts: &[(usize, usize)]) -> Assignment {
        let mut links = Vec::new();
        for &(topic, n) in counts {
            for i in 0..n {
                links.push(AssignmentLink {
                    doc_id: format!("t{topic}d{i}"),
                    topic,
                    matched_keywords: vec!["kw".into()],
                    hits: 1,
                });
            }
        }
        Assignment {
            links,
            unassigned: vec![],
            threshold: 1,
        }
    }

    #[test]
    fn balanced_links_give_a_uniform_topic_distribution() {
        let set = TopicSet {
            cards: vec![card(1, "s", &["a"], &[]), card(2, "s", &["b"], &[])],
            provenance: Provenance::default(),
        };
        let dist = context_topic_distribution(&assignment_with_links(&[(1, 10), (2, 10)]), &set);
        assert_eq!(dist.values(), vec![0.5, 0.5]);
    }

    #[test]
    fn zero_links_still_cover_every_topic_via_smoothing() {
        let set = TopicSet {
            cards: vec![card(1, "s", &["a"], &[]), card(2, "s", &["b"], &[])],
            provenance: Provenance::default(),
        };
        let dist = context_topic_distribution(&assignment_with_links(&[]), &set);
        assert_eq!(dist.values(), vec![0.5, 0.5]);
    }

    #[test]
    fn smoothed_distribution_matches_hand_count() {
        // Links (8, 1, 0) over K = 3 smooth to (9/12, 2/12, 1/12).
        let set = TopicSet {
            cards: vec![
                card(1, "s", &["a"], &[]),
                card(2, "s", &["b"], &[]),
                card(3, "s", &["c"], &[]),
            ],
            provenance: Provenance::default(),
        };
        let dist = context_topic_distribution(&assignment_with_links(&[(1, 8), (2, 1)]), &set);
        let expected = [9.0 / 12.0, 2.0 / 12.0, 1.0 / 12.0];
        for (got, want) in dist.values().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
