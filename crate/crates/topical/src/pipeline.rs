//! End-to-end run orchestration with resumable on-disk artifacts.
//!
//! A run directory accumulates plain JSON/JSONL/text artifacts, one per
//! stage: `sample.json`, `raw_generation.txt`, `topics.json`,
//! `validation.json`, `assignment.jsonl`, `judge_raw.jsonl`, `judge.jsonl`,
//! `report.json`, and a `manifest.json` holding the resolved config and
//! artifact digests. A stage is skipped when its output already exists, so
//! deleting an artifact re-runs exactly that stage. Raw model output is
//! always written before any parsing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assignment::{
    assign_documents, assignment_accuracy, load_assignment, save_assignment, Assignment,
};
use crate::cards::{
    build_generation_prompt, context_topic_distribution, keyword_salience, parse_topic_cards,
    validate_topic_set, SalienceScheme, TopicSet,
};
use crate::corpus::{enforce_unit_length, load_corpus, Corpus};
use crate::gateway::{Backend, Gateway, HttpBackend, MockBackend};
use crate::judge::{
    aggregate_scores, build_judge_prompt, load_scores, parse_judge_scores, save_scores, JudgeScore,
};
use crate::metrics::{
    build_cooccurrence, build_report, entropy, set_npmi, topic_diversity, MetricsReport,
    NpmiBlock, ReportMeta, DEFAULT_NPMI_EPS, DEFAULT_TOP_K, DEFAULT_TOP_N,
};
use crate::sampler::{draw_sample, SampleBlock, SamplingPlan};
use crate::{sha256_hex, Error, Result};

/// Which transport serves a model role.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    /// OpenAI-compatible HTTPS endpoint from the model config.
    #[default]
    Live,
    /// Deterministic scripted backend for offline runs.
    Mock { script: PathBuf },
}

/// One model role (generation or judge): endpoint config plus backend choice.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelRole {
    #[serde(flatten)]
    pub model: crate::gateway::ModelConfig,
    #[serde(default)]
    pub backend: BackendChoice,
}

impl ModelRole {
    fn gateway(&self) -> Result<Gateway> {
        let backend: Box<dyn Backend> = match &self.backend {
            BackendChoice::Live => {
                self.model.validate_live()?;
                Box::new(HttpBackend::new())
            }
            BackendChoice::Mock { script } => Box::new(MockBackend::from_script_file(script)?),
        };
        Gateway::new(self.model.clone(), backend)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricKnobs {
    pub top_n: usize,
    pub top_k: usize,
    pub npmi_eps: f64,
    pub salience: SalienceScheme,
}

impl Default for MetricKnobs {
    fn default() -> Self {
        MetricKnobs {
            top_n: DEFAULT_TOP_N,
            top_k: DEFAULT_TOP_K,
            npmi_eps: DEFAULT_NPMI_EPS,
            salience: SalienceScheme::ReciprocalRank,
        }
    }
}

fn default_threshold_m() -> usize {
    1
}

/// Full configuration for one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub out_dir: PathBuf,
    /// Optional unit-length cap applied at load; truncations are logged.
    #[serde(default)]
    pub max_unit_words: Option<usize>,
    #[serde(default)]
    pub sampling: SamplingPlan,
    #[serde(default)]
    pub generation: ModelRole,
    #[serde(default)]
    pub judge: Option<ModelRole>,
    /// Minimum distinct keyword hits for a document→topic link.
    #[serde(default = "default_threshold_m")]
    pub threshold_m: usize,
    #[serde(default)]
    pub metrics: MetricKnobs,
    /// Also write `report.csv` next to `report.json`.
    #[serde(default)]
    pub emit_csv: bool,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
    }

    /// Structural validation; runs before any network activity.
    pub fn validate(&self) -> Result<()> {
        if !self.corpus.exists() {
            return Err(Error::Config(format!(
                "corpus path does not exist: {}",
                self.corpus.display()
            )));
        }
        if self.threshold_m == 0 {
            return Err(Error::Config("threshold_m must be at least 1".into()));
        }
        if self.metrics.top_n < 2 {
            return Err(Error::Config("top_n must be at least 2".into()));
        }
        if self.metrics.top_k < 1 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        if self.metrics.npmi_eps < 0.0 {
            return Err(Error::Config("npmi_eps must be non-negative".into()));
        }
        self.sampling.validate()?;
        self.generation.model.validate()?;
        if let BackendChoice::Mock { script } = &self.generation.backend {
            if !script.exists() {
                return Err(Error::Config(format!(
                    "generation mock script does not exist: {}",
                    script.display()
                )));
            }
        }
        if let Some(judge) = &self.judge {
            judge.model.validate()?;
            if let BackendChoice::Mock { script } = &judge.backend {
                if !script.exists() {
                    return Err(Error::Config(format!(
                        "judge mock script does not exist: {}",
                        script.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

/// Artifact locations within one run directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        RunPaths { dir: dir.into() }
    }

    pub fn sample(&self) -> PathBuf {
        self.dir.join("sample.json")
    }
    pub fn raw_generation(&self) -> PathBuf {
        self.dir.join("raw_generation.txt")
    }
    pub fn topics(&self) -> PathBuf {
        self.dir.join("topics.json")
    }
    pub fn validation(&self) -> PathBuf {
        self.dir.join("validation.json")
    }
    pub fn assignment(&self) -> PathBuf {
        self.dir.join("assignment.jsonl")
    }
    pub fn judge_raw(&self) -> PathBuf {
        self.dir.join("judge_raw.jsonl")
    }
    pub fn judge(&self) -> PathBuf {
        self.dir.join("judge.jsonl")
    }
    pub fn report(&self) -> PathBuf {
        self.dir.join("report.json")
    }
    pub fn report_csv(&self) -> PathBuf {
        self.dir.join("report.csv")
    }
    pub fn manifest(&self) -> PathBuf {
        self.dir.join("manifest.json")
    }
}

/// What one pipeline invocation did, stage by stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    /// (stage name, whether it executed this invocation).
    pub stages: Vec<(&'static str, bool)>,
}

/// Load the corpus with the optional unit-length cap applied.
pub fn load_run_corpus(config: &RunConfig) -> Result<Corpus> {
    let corpus = load_corpus(&config.corpus)?;
    let Some(max_words) = config.max_unit_words else {
        return Ok(corpus);
    };
    let mut truncated_count = 0usize;
    let documents = corpus
        .documents()
        .iter()
        .map(|doc| {
            let (doc, truncated) = enforce_unit_length(doc, max_words);
            if truncated {
                truncated_count += 1;
            }
            doc
        })
        .collect();
    if truncated_count > 0 {
        log::info!(
            "truncated {truncated_count} of {} documents to {max_words} words",
            corpus.len()
        );
    }
    Corpus::from_documents(documents)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn require(path: PathBuf, stage: &'static str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact { path, stage })
    }
}

// --- ensure_* helpers: load the artifact if present, produce it otherwise.

fn ensure_sample(
    config: &RunConfig,
    paths: &RunPaths,
    corpus: &Corpus,
) -> Result<(SampleBlock, bool)> {
    if paths.sample().exists() {
        return Ok((SampleBlock::load(paths.sample())?, false));
    }
    let sample = draw_sample(corpus, &config.sampling)?;
    sample.save(paths.sample())?;
    log::info!(
        "sampled {} documents (~{} tokens)",
        sample.doc_ids.len(),
        sample.estimated_tokens
    );
    Ok((sample, true))
}

fn ensure_generation(
    config: &RunConfig,
    paths: &RunPaths,
    sample: &SampleBlock,
) -> Result<(String, bool)> {
    if paths.raw_generation().exists() {
        return Ok((read_text(&paths.raw_generation())?, false));
    }
    let gateway = config.generation.gateway()?;
    let request = build_generation_prompt(sample)?;
    let response = gateway.complete(&request)?;
    // Raw output lands on disk before anything tries to parse it.
    write_text(&paths.raw_generation(), &response.text)?;
    if response.truncated() {
        log::warn!("generation hit the output-token limit; parse may fail");
    }
    Ok((response.text, true))
}

fn ensure_topics(
    config: &RunConfig,
    paths: &RunPaths,
    corpus: &Corpus,
    raw: &str,
    sample: &SampleBlock,
) -> Result<(TopicSet, bool)> {
    if paths.topics().exists() {
        return Ok((TopicSet::load(paths.topics())?, false));
    }
    let mut set = parse_topic_cards(raw)?;
    set.provenance.model = config.generation.model.model_name.clone();
    set.provenance.sample_id = sha256_hex(sample.rendered_text.as_bytes())[..16].to_string();
    let validation = validate_topic_set(&set, corpus);
    set.save(paths.topics())?;
    validation.save(paths.validation())?;
    if !validation.is_clean() {
        log::warn!("topic set has {} constraint violations", validation.violations.len());
    }
    if set.usable_cards() < crate::cards::MIN_TOPICS {
        return Err(Error::TooFewUsableCards {
            usable: set.usable_cards(),
            parsed: set.k(),
        });
    }
    Ok((set, true))
}

fn ensure_assignment(
    config: &RunConfig,
    paths: &RunPaths,
    corpus: &Corpus,
    set: &TopicSet,
) -> Result<(Assignment, bool)> {
    if paths.assignment().exists() {
        return Ok((load_assignment(paths.assignment(), config.threshold_m)?, false));
    }
    let assignment = assign_documents(corpus, set, config.threshold_m)?;
    save_assignment(&assignment, paths.assignment())?;
    log::info!(
        "{} links, {} unassigned documents",
        assignment.links.len(),
        assignment.unassigned.len()
    );
    Ok((assignment, true))
}

fn ensure_judge(
    config: &RunConfig,
    paths: &RunPaths,
    set: &TopicSet,
) -> Result<(Option<Vec<JudgeScore>>, bool)> {
    let Some(role) = &config.judge else {
        return Ok((None, false));
    };
    if paths.judge().exists() {
        return Ok((Some(load_scores(paths.judge())?), false));
    }
    let gateway = role.gateway()?;
    let judgeable: Vec<&crate::cards::TopicCard> =
        set.cards.iter().filter(|c| c.usable()).collect();
    let requests = judgeable
        .iter()
        .map(|card| build_judge_prompt(card))
        .collect::<Result<Vec<_>>>()?;
    let responses = gateway.complete_many(&requests);

    // Persist every raw response before parsing any of them.
    #[derive(Serialize)]
    struct RawLine<'a> {
        topic: usize,
        raw: &'a str,
    }
    let mut raw_lines = String::new();
    let mut texts: Vec<(usize, String)> = Vec::with_capacity(responses.len());
    for (card, response) in judgeable.iter().zip(responses) {
        let response = response?;
        raw_lines.push_str(
            &serde_json::to_string(&RawLine {
                topic: card.index,
                raw: &response.text,
            })
            .expect("raw line serializes"),
        );
        raw_lines.push('\n');
        texts.push((card.index, response.text));
    }
    write_text(&paths.judge_raw(), &raw_lines)?;

    let mut scores = Vec::with_capacity(texts.len());
    for (topic, raw) in &texts {
        let dims = parse_judge_scores(raw)?;
        scores.push(JudgeScore::new(*topic, dims, raw));
    }
    save_scores(&scores, paths.judge())?;
    Ok((Some(scores), true))
}

fn ensure_report(
    config: &RunConfig,
    paths: &RunPaths,
    corpus: &Corpus,
    set: &TopicSet,
    assignment: &Assignment,
    sample: &SampleBlock,
) -> Result<(MetricsReport, bool)> {
    if paths.report().exists() {
        return Ok((MetricsReport::load(paths.report())?, false));
    }
    let knobs = &config.metrics;
    let units: Vec<String> = set
        .cards
        .iter()
        .flat_map(|c| c.keywords.iter().cloned())
        .collect();
    let table = build_cooccurrence(corpus, &units);
    let (npmi_mean, per_topic) = set_npmi(&table, set, knobs.top_n, knobs.npmi_eps);
    let npmi = NpmiBlock {
        mean: npmi_mean,
        per_topic: per_topic.iter().map(|t| t.value).collect(),
        coverage: per_topic.iter().map(|t| t.coverage).collect(),
    };
    let diversity = topic_diversity(set, knobs.top_k);
    let topic_distribution = context_topic_distribution(assignment, set);
    let topic_entropy = entropy(&topic_distribution.values())?;
    let word_entropies = set
        .cards
        .iter()
        .map(|card| {
            if card.keywords.is_empty() {
                Ok(None)
            } else {
                let salience = keyword_salience(card, knobs.salience)?;
                entropy(&salience.probabilities()).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let accuracy = assignment_accuracy(set, corpus);
    let judge_block = if paths.judge().exists() {
        let scores = load_scores(paths.judge())?;
        if scores.is_empty() {
            None
        } else {
            Some(aggregate_scores(&scores)?)
        }
    } else {
        None
    };
    let meta = ReportMeta {
        model: config.generation.model.model_name.clone(),
        judge_model: config.judge.as_ref().map(|j| j.model.model_name.clone()),
        topics: set.k(),
        documents: corpus.len(),
        sampled_documents: sample.doc_ids.len(),
        seed: config.sampling.seed,
        threshold_m: config.threshold_m,
        top_n: knobs.top_n,
        top_k: knobs.top_k,
        npmi_eps: knobs.npmi_eps,
        salience_scheme: match knobs.salience {
            SalienceScheme::ReciprocalRank => "reciprocal_rank".into(),
            SalienceScheme::Uniform => "uniform".into(),
        },
        log_base: "e".into(),
        judge_sees_keywords: true,
        unassigned_documents: assignment.unassigned.len(),
    };
    let report = build_report(
        npmi,
        diversity,
        topic_entropy,
        word_entropies,
        accuracy.overall,
        accuracy.per_topic,
        judge_block,
        meta,
    )?;
    report.save(paths.report())?;
    if config.emit_csv {
        write_text(
            &paths.report_csv(),
            &format!("{}\n{}\n", MetricsReport::CSV_HEADER, report.csv_row()),
        )?;
    }
    Ok((report, true))
}

#[derive(Serialize)]
struct Manifest<'c> {
    tool_version: &'static str,
    config_digest: String,
    seed: u64,
    config: &'c RunConfig,
    artifacts: BTreeMap<String, String>,
}

fn write_manifest(config: &RunConfig, paths: &RunPaths) -> Result<()> {
    let mut artifacts = BTreeMap::new();
    for path in [
        paths.sample(),
        paths.raw_generation(),
        paths.topics(),
        paths.validation(),
        paths.assignment(),
        paths.judge_raw(),
        paths.judge(),
        paths.report(),
        paths.report_csv(),
    ] {
        if path.exists() {
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            artifacts.insert(name, sha256_hex(&bytes));
        }
    }
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        config_digest: config.digest(),
        seed: config.sampling.seed,
        config,
        artifacts,
    };
    write_text(
        &paths.manifest(),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
}

/// Execute the full pipeline: sample → generate → parse/validate → assign →
/// metrics → judge. Stages with existing outputs are skipped; a judge stage
/// that actually runs refreshes `report.json` so the report always carries
/// the judge means. Any stage error halts the run and leaves earlier
/// artifacts intact.
pub fn run_pipeline(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let paths = RunPaths::new(&config.out_dir);
    std::fs::create_dir_all(&paths.dir).map_err(|e| Error::io(&paths.dir, e))?;
    let corpus = load_run_corpus(config)?;

    let (sample, ran_sample) = ensure_sample(config, &paths, &corpus)?;
    let (raw, ran_generate) = ensure_generation(config, &paths, &sample)?;
    let (set, ran_parse) = ensure_topics(config, &paths, &corpus, &raw, &sample)?;
    let (assignment, ran_assign) = ensure_assignment(config, &paths, &corpus, &set)?;
    let (_, ran_metrics) = ensure_report(config, &paths, &corpus, &set, &assignment, &sample)?;
    let (_, ran_judge) = ensure_judge(config, &paths, &set)?;
    if ran_judge {
        // Fold the fresh judge scores into the report.
        std::fs::remove_file(paths.report()).map_err(|e| Error::io(paths.report(), e))?;
        ensure_report(config, &paths, &corpus, &set, &assignment, &sample)?;
    }
    write_manifest(config, &paths)?;

    Ok(RunSummary {
        out_dir: paths.dir.clone(),
        stages: vec![
            ("sample", ran_sample),
            ("generate", ran_generate),
            ("parse", ran_parse),
            ("assign", ran_assign),
            ("metrics", ran_metrics || ran_judge),
            ("judge", ran_judge),
        ],
    })
}

// --- single-stage entry points for the CLI; prerequisites must exist.

pub fn stage_sample(config: &RunConfig) -> Result<(&'static str, bool)> {
    config.validate()?;
    let paths = RunPaths::new(&config.out_dir);
    std::fs::create_dir_all(&paths.dir).map_err(|e| Error::io(&paths.dir, e))?;
    let corpus = load_run_corpus(config)?;
    let (_, ran) = ensure_sample(config, &paths, &corpus)?;
    Ok(("sample", ran))
}

pub fn stage_generate(config: &RunConfig) -> Result<(&'static str, bool)> {
    config.validate()?;
    let paths = RunPaths::new(&config.out_dir);
    require(paths.sample(), "sample")?;
    let corpus = load_run_corpus(config)?;
    let sample = SampleBlock::load(paths.sample())?;
    let (raw, ran_generate) = ensure_generation(config, &paths, &sample)?;
    let (_, ran_parse) = ensure_topics(config, &paths, &corpus, &raw, &sample)?;
    Ok(("generate", ran_generate || ran_parse))
}

pub fn stage_assign(config: &RunConfig) -> Result<(&'static str, bool)> {
    config.validate()?;
    let paths = RunPaths::new(&config.out_dir);
    require(paths.topics(), "generate")?;
    let corpus = load_run_corpus(config)?;
    let set = TopicSet::load(paths.topics())?;
    let (_, ran) = ensure_assignment(config, &paths, &corpus, &set)?;
    Ok(("assign", ran))
}

pub fn stage_metrics(config: &RunConfig) -> Result<(&'static str, bool)> {
    config.validate()?;
    let paths = RunPaths::new(&config.out_dir);
    require(paths.topics(), "generate")?;
    require(paths.assignment(), "assign")?;
    require(paths.sample(), "sample")?;
    let corpus = load_run_corpus(config)?;
    let set = TopicSet::load(paths.topics())?;
    let assignment = load_assignment(paths.assignment(), config.threshold_m)?;
    let sample = SampleBlock::load(paths.sample())?;
    let (_, ran) = ensure_report(config, &paths, &corpus, &set, &assignment, &sample)?;
    Ok(("metrics", ran))
}

pub fn stage_judge(config: &RunConfig) -> Result<(&'static str, bool)> {
    config.validate()?;
    if config.judge.is_none() {
        return Err(Error::Config("no judge model configured".into()));
    }
    let paths = RunPaths::new(&config.out_dir);
    require(paths.topics(), "generate")?;
    let set = TopicSet::load(paths.topics())?;
    let (_, ran) = ensure_judge(config, &paths, &set)?;
    if ran && paths.report().exists() {
        let corpus = load_run_corpus(config)?;
        let assignment = load_assignment(paths.assignment(), config.threshold_m)?;
        let sample = SampleBlock::load(paths.sample())?;
        std::fs::remove_file(paths.report()).map_err(|e| Error::io(paths.report(), e))?;
        ensure_report(config, &paths, &corpus, &set, &assignment, &sample)?;
    }
    Ok(("judge", ran))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{CannedResponse, MockScript, ModelConfig};
    use std::io::Write as _;

    fn fixture_corpus(dir: &Path, docs: usize) -> PathBuf {
        let path = dir.join("corpus.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        let themes = [
            ("economy", "inflation rates policy market growth"),
            ("sports", "season finals team victory fans"),
            ("science", "research telescope discovery orbit data"),
        ];
        for i in 0..docs {
            let (label, words) = themes[i % themes.len()];
            writeln!(
                f,
                r#"{{"id":"d{i}","title":"{label} story {i}","text":"{words} item {i}","label":"{label}"}}"#
            )
            .unwrap();
        }
        path
    }

    fn topics_json() -> String {
        serde_json::json!([
            {"Topic 1": {"Summary": "Economic policy news.",
                         "Keywords": ["inflation", "rates", "policy", "market", "growth"],
                         "Source Titles": ["economy story 0", "economy story 3", "economy story 6"]}},
            {"Topic 2": {"Summary": "Sports season coverage.",
                         "Keywords": ["season", "finals", "team", "victory", "fans"],
                         "Source Titles": ["sports story 1", "sports story 4", "sports story 7"]}},
            {"Topic 3": {"Summary": "Space science updates.",
                         "Keywords": ["research", "telescope", "discovery", "orbit", "data"],
                         "Source Titles": ["science story 2", "science story 5", "science story 8"]}}
        ])
        .to_string()
    }

    fn mock_config(dir: &Path, with_judge: bool) -> RunConfig {
        let corpus = fixture_corpus(dir, 30);
        let gen_script = dir.join("gen_script.json");
        MockScript::with_default(topics_json()).save(&gen_script).unwrap();
        let judge_script = dir.join("judge_script.json");
        MockScript::with_default(r#"{"coherence": 4, "concise": 3, "informative": 5}"#)
            .save(&judge_script)
            .unwrap();
        RunConfig {
            corpus,
            out_dir: dir.join("run"),
            max_unit_words: Some(50),
            sampling: SamplingPlan {
                seed: 3,
                budget_tokens: 100_000,
                ..SamplingPlan::default()
            },
            generation: ModelRole {
                model: ModelConfig {
                    model_name: "mock-gen".into(),
                    ..ModelConfig::default()
                },
                backend: BackendChoice::Mock { script: gen_script },
            },
            judge: with_judge.then(|| ModelRole {
                model: ModelConfig {
                    model_name: "mock-judge".into(),
                    ..ModelConfig::default()
                },
                backend: BackendChoice::Mock { script: judge_script },
            }),
            threshold_m: 1,
            metrics: MetricKnobs::default(),
            emit_csv: true,
        }
    }

    #[test]
    fn full_mock_run_produces_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let config = mock_config(dir.path(), true);
        let summary = run_pipeline(&config).unwrap();
        let paths = RunPaths::new(&config.out_dir);
        for p in [
            paths.sample(),
            paths.raw_generation(),
            paths.topics(),
            paths.validation(),
            paths.assignment(),
            paths.judge_raw(),
            paths.judge(),
            paths.report(),
            paths.report_csv(),
            paths.manifest(),
        ] {
            assert!(p.exists(), "missing artifact {}", p.display());
        }
        assert!(summary.stages.iter().all(|(_, ran)| *ran));
        let report = MetricsReport::load(paths.report()).unwrap();
        assert!(report.npmi.mean.is_some());
        assert_eq!(report.diversity, 1.0);
        assert!(report.judge.is_some());
        let judge = report.judge.unwrap();
        assert_eq!((judge.coherence, judge.concise, judge.informative), (4.0, 3.0, 5.0));
        assert_eq!(report.assignment_accuracy, Some(1.0));
    }

    #[test]
    fn second_invocation_skips_every_stage_and_keeps_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let config = mock_config(dir.path(), true);
        run_pipeline(&config).unwrap();
        let paths = RunPaths::new(&config.out_dir);
        let before = std::fs::read(paths.report()).unwrap();
        let manifest_before = std::fs::read(paths.manifest()).unwrap();
        let summary = run_pipeline(&config).unwrap();
        assert!(summary.stages.iter().all(|(_, ran)| !*ran), "{:?}", summary.stages);
        assert_eq!(std::fs::read(paths.report()).unwrap(), before);
        assert_eq!(std::fs::read(paths.manifest()).unwrap(), manifest_before);
    }

    #[test]
    fn deleting_the_report_reruns_only_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let config = mock_config(dir.path(), true);
        run_pipeline(&config).unwrap();
        let paths = RunPaths::new(&config.out_dir);
        let before = std::fs::read(paths.report()).unwrap();
        std::fs::remove_file(paths.report()).unwrap();
        let summary = run_pipeline(&config).unwrap();
        let ran: Vec<&str> = summary
            .stages
            .iter()
            .filter(|(_, ran)| *ran)
            .map(|(name, _)| *name)
            .collect();
        assert_eq!(ran, vec!["metrics"]);
        // Rebuilt from the persisted judge scores, so bytes are identical.
        assert_eq!(std::fs::read(paths.report()).unwrap(), before);
    }

    #[test]
    fn missing_corpus_fails_before_any_backend_work() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = mock_config(dir.path(), false);
        config.corpus = dir.path().join("nope.jsonl");
        let err = run_pipeline(&config).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn refusal_generation_is_a_parse_failure_with_raw_preserved() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = mock_config(dir.path(), false);
        let script = dir.path().join("refusal.json");
        MockScript::with_default("I cannot help with that.").save(&script).unwrap();
        config.generation.backend = BackendChoice::Mock { script };
        let err = run_pipeline(&config).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let paths = RunPaths::new(&config.out_dir);
        assert!(paths.raw_generation().exists());
        assert!(paths.sample().exists());
        assert!(!paths.topics().exists());
    }

    #[test]
    fn too_few_usable_cards_is_validation_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = mock_config(dir.path(), false);
        let script = dir.path().join("two_cards.json");
        let two = serde_json::json!([
            {"Summary": "One.", "Keywords": ["inflation", "rates", "policy", "market", "growth"],
             "Source Titles": ["economy story 0", "economy story 3", "economy story 6"]},
            {"Summary": "Two.", "Keywords": ["season", "finals", "team", "victory", "fans"],
             "Source Titles": ["sports story 1", "sports story 4", "sports story 7"]}
        ])
        .to_string();
        MockScript::with_default(two).save(&script).unwrap();
        config.generation.backend = BackendChoice::Mock { script };
        let err = run_pipeline(&config).unwrap_err();
        assert_eq!(err.exit_code(), 5);
        // The flagged artifacts stay on disk for the audit trail.
        let paths = RunPaths::new(&config.out_dir);
        assert!(paths.topics().exists());
        assert!(paths.validation().exists());
    }

    #[test]
    fn backend_failure_maps_to_the_network_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = mock_config(dir.path(), false);
        let script = dir.path().join("always_500.json");
        MockScript {
            default: Some(CannedResponse::error(500)),
            responses: Default::default(),
        }
        .save(&script)
        .unwrap();
        config.generation.backend = BackendChoice::Mock { script };
        config.generation.model.retry_limit = 1;
        config.generation.model.backoff_base_ms = 0;
        let err = run_pipeline(&config).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn stage_functions_demand_their_prerequisites() {
        let dir = tempfile::tempdir().unwrap();
        let config = mock_config(dir.path(), false);
        let err = stage_generate(&config).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact { stage: "sample", .. }));
        let err = stage_assign(&config).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact { stage: "generate", .. }));
    }

    #[test]
    fn stages_compose_into_the_same_run_directory() {
        let dir = tempfile::tempdir().unwrap();
        let full_config = mock_config(dir.path(), true);
        let staged_dir = dir.path().join("staged");
        let mut staged_config = full_config.clone();
        staged_config.out_dir = staged_dir;

        run_pipeline(&full_config).unwrap();
        stage_sample(&staged_config).unwrap();
        stage_generate(&staged_config).unwrap();
        stage_assign(&staged_config).unwrap();
        stage_metrics(&staged_config).unwrap();
        stage_judge(&staged_config).unwrap();

        let full = RunPaths::new(&full_config.out_dir);
        let staged = RunPaths::new(&staged_config.out_dir);
        assert_eq!(
            std::fs::read(full.report()).unwrap(),
            std::fs::read(staged.report()).unwrap()
        );
    }

    #[test]
    fn manifest_embeds_the_resolved_config() {
        let dir = tempfile::tempdir().unwrap();
        let config = mock_config(dir.path(), false);
        run_pipeline(&config).unwrap();
        let paths = RunPaths::new(&config.out_dir);
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(paths.manifest()).unwrap()).unwrap();
        let embedded: RunConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
        assert_eq!(embedded, config);
        assert_eq!(manifest["config_digest"], config.digest().as_str());
        assert!(manifest["artifacts"]["report.json"].is_string());
    }
}
