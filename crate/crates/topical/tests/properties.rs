//! Property tests for the contracts each module promises.

use std::collections::HashSet;

use proptest::prelude::*;

use topical::assignment::{assign_documents, assignment_accuracy, Assignment};
use topical::cards::{
    context_topic_distribution, keyword_salience, parse_topic_cards, Provenance, SalienceScheme,
    TopicCard, TopicSet,
};
use topical::corpus::{tokenize, Corpus, Document};
use topical::metrics::{build_cooccurrence, entropy, npmi_pair, topic_diversity};
use topical::sampler::{draw_sample, estimate_tokens, SamplingPlan, SamplingStrategy};

const WORDS: &[&str] = &[
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet",
    "kilo", "lima", "mike", "november", "oscar", "papa",
];

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(WORDS).prop_map(str::to_string)
}

fn document(id: usize) -> impl Strategy<Value = Document> {
    (
        prop::collection::vec(word(), 1..6),
        prop::collection::vec(word(), 0..20),
        prop::sample::select(&["news", "sport", "arts"]),
    )
        .prop_map(move |(title, body, label)| {
            Document::new(
                format!("doc{id}"),
                title.join(" "),
                if body.is_empty() { None } else { Some(body.join(" ")) },
                Some(label.to_string()),
            )
        })
}

fn corpus(max_docs: usize) -> impl Strategy<Value = Corpus> {
    prop::collection::vec(prop::num::u8::ANY, 1..max_docs).prop_flat_map(|seeds| {
        let strategies: Vec<_> = seeds
            .iter()
            .enumerate()
            .map(|(i, _)| document(i))
            .collect();
        strategies.prop_map(|docs| Corpus::from_documents(docs).expect("valid corpus"))
    })
}

fn topic_card(index: usize) -> impl Strategy<Value = TopicCard> {
    (
        prop::collection::vec(word(), 1..13),
        prop::collection::vec(word(), 0..5),
    )
        .prop_map(move |(keywords, titles)| TopicCard {
            index,
            summary: format!("synthetic topic {index}"),
            keywords,
            source_titles: titles.iter().map(|t| format!("Title {t}")).collect(),
        })
}

fn topic_set() -> impl Strategy<Value = TopicSet> {
    prop::collection::vec(prop::num::u8::ANY, 1..7).prop_flat_map(|seeds| {
        let strategies: Vec<_> = seeds
            .iter()
            .enumerate()
            .map(|(i, _)| topic_card(i + 1))
            .collect();
        strategies.prop_map(|cards| TopicSet {
            cards,
            provenance: Provenance::default(),
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    // --- sampler ---

    #[test]
    fn sample_estimate_never_exceeds_the_text_budget(
        corpus in corpus(30),
        budget in 120usize..4_000,
        seed in any::<u64>(),
    ) {
        let plan = SamplingPlan {
            strategy: SamplingStrategy::Uniform,
            seed,
            budget_tokens: budget,
            overhead_tokens: 100,
            token_ratio: 1.3,
        };
        if let Ok(sample) = draw_sample(&corpus, &plan) {
            prop_assert!(sample.estimated_tokens <= plan.text_budget());
            prop_assert_eq!(
                sample.estimated_tokens,
                estimate_tokens(&sample.rendered_text, plan.token_ratio)
            );
        }
    }

    #[test]
    fn uniform_sampling_is_exchangeable_over_corpus_order(
        corpus in corpus(25),
        seed in any::<u64>(),
    ) {
        let plan = SamplingPlan {
            strategy: SamplingStrategy::Uniform,
            seed,
            budget_tokens: 600,
            overhead_tokens: 100,
            token_ratio: 1.3,
        };
        let mut reversed_docs = corpus.documents().to_vec();
        reversed_docs.reverse();
        let reversed = Corpus::from_documents(reversed_docs).unwrap();
        match (draw_sample(&corpus, &plan), draw_sample(&reversed, &plan)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.doc_ids, b.doc_ids);
                prop_assert_eq!(a.rendered_text, b.rendered_text);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "asymmetric outcome: {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn stratified_selection_count_is_consistent(
        corpus in corpus(40),
        seed in any::<u64>(),
    ) {
        let plan = SamplingPlan {
            strategy: SamplingStrategy::Stratified,
            seed,
            budget_tokens: 2_000,
            overhead_tokens: 100,
            token_ratio: 1.0,
        };
        if let Ok(sample) = draw_sample(&corpus, &plan) {
            // Quotas sum to the selected total and ids are unique.
            let unique: HashSet<&String> = sample.doc_ids.iter().collect();
            prop_assert_eq!(unique.len(), sample.doc_ids.len());
            prop_assert!(sample.doc_ids.len() <= corpus.len());
        }
    }

    // --- metrics ---

    #[test]
    fn npmi_stays_in_range_and_is_one_only_at_perfect_association(
        corpus in corpus(30),
    ) {
        let units: Vec<String> = WORDS.iter().take(8).map(|s| s.to_string()).collect();
        let table = build_cooccurrence(&corpus, &units);
        for (i, a) in units.iter().enumerate() {
            for b in &units[i + 1..] {
                let Some(value) = npmi_pair(&table, a, b, 1e-12) else { continue };
                prop_assert!((-1.0..=1.0).contains(&value), "npmi {value}");
                let n = table.doc_count();
                let perfect = table.df(a) == table.df(b)
                    && table.df(a) == table.co_df(a, b)
                    && table.df(a) < n;
                if perfect {
                    prop_assert_eq!(value, 1.0);
                }
                if value == 1.0 && table.df(a) < n && table.df(b) < n {
                    prop_assert!(perfect, "npmi=1 without P(ab)=P(a)=P(b)");
                }
            }
        }
    }

    #[test]
    fn diversity_is_one_iff_no_keyword_repeats(set in topic_set(), top_k in 1usize..12) {
        let diversity = topic_diversity(&set, top_k);
        prop_assert!(diversity > 0.0 && diversity <= 1.0);
        let mut pooled = Vec::new();
        for card in &set.cards {
            pooled.extend(card.keywords.iter().take(top_k).map(|k| k.to_lowercase()));
        }
        let distinct: HashSet<&String> = pooled.iter().collect();
        prop_assert_eq!(diversity == 1.0, distinct.len() == pooled.len());
    }

    #[test]
    fn entropy_is_bounded_by_log_support(weights in prop::collection::vec(0.01f64..10.0, 1..20)) {
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let h = entropy(&probs).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (probs.len() as f64).ln() + 1e-12, "H = {h} over {}", probs.len());
    }

    // --- cards ---

    #[test]
    fn salience_distributions_are_normalized_and_positive(card in topic_card(1)) {
        for scheme in [SalienceScheme::ReciprocalRank, SalienceScheme::Uniform] {
            let salience = keyword_salience(&card, scheme).unwrap();
            let sum: f64 = salience.probabilities().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(salience.probabilities().iter().all(|&p| p > 0.0));
            prop_assert_eq!(salience.weights.len(), card.keywords.len());
        }
    }

    #[test]
    fn parse_is_idempotent_on_its_own_serialization(set in topic_set()) {
        let serialized = serde_json::to_string_pretty(&set).unwrap();
        let reparsed = parse_topic_cards(&serialized).unwrap();
        prop_assert_eq!(&reparsed.cards, &set.cards);
        // And a second round trip is a fixed point.
        let again = parse_topic_cards(&serde_json::to_string(&reparsed).unwrap()).unwrap();
        prop_assert_eq!(&again.cards, &set.cards);
    }

    #[test]
    fn context_distribution_always_covers_every_topic(
        set in topic_set(),
        corpus in corpus(20),
    ) {
        let assignment = assign_documents(&corpus, &set, 1).unwrap();
        let dist = context_topic_distribution(&assignment, &set);
        let values = dist.values();
        prop_assert_eq!(values.len(), set.k());
        prop_assert!(values.iter().all(|&p| p > 0.0));
        let sum: f64 = values.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(entropy(&values).unwrap() <= (set.k() as f64).ln() + 1e-12);
    }

    // --- assignment ---

    #[test]
    fn raising_the_threshold_only_removes_links(
        corpus in corpus(25),
        set in topic_set(),
        m in 1usize..4,
    ) {
        let lower = assign_documents(&corpus, &set, m).unwrap();
        let higher = assign_documents(&corpus, &set, m + 1).unwrap();
        let key = |a: &Assignment| -> HashSet<(String, usize)> {
            a.links.iter().map(|l| (l.doc_id.clone(), l.topic)).collect()
        };
        prop_assert!(key(&higher).is_subset(&key(&lower)));
    }

    #[test]
    fn assignment_ignores_corpus_order(corpus in corpus(25), set in topic_set()) {
        let mut reversed_docs = corpus.documents().to_vec();
        reversed_docs.reverse();
        let reversed = Corpus::from_documents(reversed_docs).unwrap();
        prop_assert_eq!(
            assign_documents(&corpus, &set, 1).unwrap(),
            assign_documents(&reversed, &set, 1).unwrap()
        );
    }

    #[test]
    fn accuracy_is_invariant_to_card_and_title_permutations(
        corpus in corpus(25),
        set in topic_set(),
    ) {
        let baseline = assignment_accuracy(&set, &corpus);
        let mut permuted = set.clone();
        permuted.cards.reverse();
        for card in &mut permuted.cards {
            card.source_titles.reverse();
        }
        let shuffled = assignment_accuracy(&permuted, &corpus);
        prop_assert_eq!(baseline.overall, shuffled.overall);
        prop_assert_eq!(baseline.total_claims, shuffled.total_claims);
    }

    // --- corpus ---

    #[test]
    fn tokenizer_is_deterministic_and_lowercase(text in "\\PC{0,80}") {
        let first = tokenize(&text);
        prop_assert_eq!(&first, &tokenize(&text));
        for token in &first {
            prop_assert!(!token.is_empty());
            prop_assert_eq!(token.clone(), token.to_lowercase());
        }
    }

    #[test]
    fn document_tokens_survive_retokenization(
        title in "[a-zA-Z ]{1,30}",
        body in prop::option::of("[a-zA-Z0-9 .,]{0,120}"),
    ) {
        prop_assume!(!title.trim().is_empty());
        let doc = Document::new("d", title.clone(), body.clone(), None);
        let joined = match &body {
            Some(b) => format!("{title} {b}"),
            None => title.clone(),
        };
        prop_assert_eq!(doc.tokens, tokenize(&joined));
    }
}
