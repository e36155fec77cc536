//! Corpus ingestion, tokenization, and vocabulary statistics.
//!
//! A corpus is a JSONL file of short text units (`{"id", "title", "text"?,
//! "label"?}`). Every downstream consumer — sampling, keyword matching,
//! co-occurrence counting — works on the token streams produced by the one
//! tokenizer in this module, so metrics stay reproducible from a single rule.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lowercase word tokens split on Unicode non-alphanumeric boundaries.
///
/// No stemming, no stop-word removal: the token stream must be recoverable
/// from this single rule alone.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|s| s.to_lowercase())
        .collect()
}

/// One text unit: a title plus an optional short body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub body: Option<String>,
    /// Category tag used only for stratified sampling.
    pub label: Option<String>,
    /// Tokens of title + body; invariant: equals `tokenize(title ⧺ " " ⧺ body)`.
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        body: Option<String>,
        label: Option<String>,
    ) -> Self {
        let title = title.into();
        let tokens = derive_tokens(&title, body.as_deref());
        Document {
            id: id.into(),
            title,
            body,
            label,
            tokens,
        }
    }

    /// Word-token length of the unit (title + body).
    pub fn word_count(&self) -> usize {
        self.tokens.len()
    }
}

fn derive_tokens(title: &str, body: Option<&str>) -> Vec<String> {
    match body {
        Some(b) => tokenize(&format!("{title} {b}")),
        None => tokenize(title),
    }
}

/// Truncate a document to at most `max_words` tokens.
///
/// The title is never touched; only the body is cut, at a token boundary, so
/// that re-tokenizing title + body still reproduces `tokens` exactly. Returns
/// the (possibly unchanged) document and whether truncation happened; callers
/// record the flag in run logs.
pub fn enforce_unit_length(doc: &Document, max_words: usize) -> (Document, bool) {
    debug_assert!(max_words >= 1);
    if doc.tokens.len() <= max_words {
        return (doc.clone(), false);
    }
    let title_tokens = tokenize(&doc.title);
    if title_tokens.len() >= max_words {
        // The title alone fills (or overflows) the limit; the body goes.
        if doc.body.is_none() {
            return (doc.clone(), false);
        }
        let truncated = Document::new(&doc.id, &doc.title, None, doc.label.clone());
        return (truncated, true);
    }
    let keep = max_words - title_tokens.len();
    let body = doc.body.as_deref().unwrap_or("");
    let cut_body = truncate_to_tokens(body, keep);
    let truncated = Document::new(&doc.id, &doc.title, Some(cut_body), doc.label.clone());
    debug_assert_eq!(truncated.tokens.len(), max_words);
    (truncated, true)
}

/// Cut `text` right after its `keep`-th token run, dropping the remainder.
fn truncate_to_tokens(text: &str, keep: usize) -> String {
    if keep == 0 {
        return String::new();
    }
    let mut runs = 0usize;
    let mut in_run = false;
    let mut end = 0usize;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if !in_run {
                in_run = true;
                runs += 1;
            }
            end = i + c.len_utf8();
        } else if in_run {
            in_run = false;
            if runs == keep {
                break;
            }
        }
    }
    text[..end].to_string()
}

/// Distinct tokens of a corpus with per-token document frequencies.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
    doc_frequency: Vec<usize>,
}

impl Vocabulary {
    fn build(documents: &[Document]) -> Self {
        let mut words = Vec::new();
        let mut index = HashMap::new();
        let mut doc_frequency = Vec::new();
        for doc in documents {
            let mut seen = std::collections::HashSet::new();
            for token in &doc.tokens {
                if !seen.insert(token.as_str()) {
                    continue;
                }
                match index.get(token.as_str()) {
                    Some(&i) => doc_frequency[i] += 1,
                    None => {
                        index.insert(token.clone(), words.len());
                        words.push(token.clone());
                        doc_frequency.push(1);
                    }
                }
            }
        }
        Vocabulary {
            words,
            index,
            doc_frequency,
        }
    }

    /// Vocabulary size V.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Distinct tokens in first-occurrence order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Number of documents containing `word`, if the word is in vocabulary.
    pub fn doc_frequency(&self, word: &str) -> Option<usize> {
        self.index.get(word).map(|&i| self.doc_frequency[i])
    }
}

/// An immutable document collection with derived lookup structures.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    vocabulary: Vocabulary,
    title_index: HashMap<String, Vec<String>>,
    id_index: HashMap<String, usize>,
}

impl Corpus {
    /// Build a corpus from documents, enforcing all invariants.
    pub fn from_documents(documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::InvalidInput("corpus must contain at least one document".into()));
        }
        let mut id_index = HashMap::with_capacity(documents.len());
        let mut title_index: HashMap<String, Vec<String>> = HashMap::new();
        for (i, doc) in documents.iter().enumerate() {
            if doc.id.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "document at position {i} has an empty id"
                )));
            }
            if doc.title.trim().is_empty() {
                return Err(Error::InvalidInput(format!(
                    "document {:?} has an empty title",
                    doc.id
                )));
            }
            if id_index.insert(doc.id.clone(), i).is_some() {
                return Err(Error::DuplicateDocumentId { id: doc.id.clone() });
            }
            title_index
                .entry(doc.title.clone())
                .or_default()
                .push(doc.id.clone());
        }
        let vocabulary = Vocabulary::build(&documents);
        Ok(Corpus {
            documents,
            vocabulary,
            title_index,
            id_index,
        })
    }

    /// Number of documents N.
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Documents in input order.
    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn document_by_id(&self, id: &str) -> Option<&Document> {
        self.id_index.get(id).map(|&i| &self.documents[i])
    }

    /// Ids of all documents whose title matches `title` exactly.
    ///
    /// Duplicate titles are allowed in real corpora, so this is one-to-many;
    /// an empty slice means the title does not occur.
    pub fn resolve_title(&self, title: &str) -> &[String] {
        self.title_index
            .get(title)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Number of distinct titles in the index.
    pub fn title_count(&self) -> usize {
        self.title_index.len()
    }
}

/// On-disk JSONL record. Unknown keys are ignored.
#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    id: String,
    title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

/// Load a JSONL corpus: one `{"id", "title", "text"?, "label"?}` object per
/// line. Blank lines are skipped; anything else malformed is an error naming
/// the 1-based line number.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut documents = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(&line).map_err(|e| Error::CorpusLine {
            path: path.to_path_buf(),
            line: lineno,
            reason: e.to_string(),
        })?;
        if record.id.is_empty() {
            return Err(Error::CorpusLine {
                path: path.to_path_buf(),
                line: lineno,
                reason: "empty \"id\"".into(),
            });
        }
        if record.title.trim().is_empty() {
            return Err(Error::CorpusLine {
                path: path.to_path_buf(),
                line: lineno,
                reason: "empty \"title\"".into(),
            });
        }
        if record.title.contains('\n') || record.title.contains('\r') {
            return Err(Error::CorpusLine {
                path: path.to_path_buf(),
                line: lineno,
                reason: "title contains a line break".into(),
            });
        }
        documents.push(Document::new(record.id, record.title, record.text, record.label));
    }
    if documents.is_empty() {
        return Err(Error::EmptyCorpus {
            path: path.to_path_buf(),
        });
    }
    Corpus::from_documents(documents)
}

/// Write documents back out as JSONL with the same record schema that
/// [`load_corpus`] reads, one document per line, input order preserved.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    for doc in corpus.documents() {
        let record = RawRecord {
            id: doc.id.clone(),
            title: doc.title.clone(),
            text: doc.body.clone(),
            label: doc.label.clone(),
        };
        let line = serde_json::to_string(&record).expect("record serializes");
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
