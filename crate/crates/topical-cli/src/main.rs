//! `topical` — run the topic-card pipeline and its evaluation stages.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use topical::pipeline::{
    self, BackendChoice, RunConfig, RunPaths, RunSummary,
};

/// Print without panicking when stdout is a closed pipe (`topical run | head`).
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "topical",
    version,
    about = "LLM topic modeling: budgeted sampling, topic-card generation, keyword assignment, evaluation",
    after_help = "Artifacts land in the run directory (sample.json, raw_generation.txt, topics.json,\n\
                  validation.json, assignment.jsonl, judge.jsonl, report.json, manifest.json).\n\
                  A stage is skipped when its output exists; delete an artifact to re-run its stage.\n\
                  Exit codes: 0 ok, 2 config error, 3 parse failure, 4 network failure,\n\
                  5 fewer than 3 usable topic cards."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every stage: sample, generate, parse, assign, metrics, judge.
    Run(SharedArgs),
    /// Draw the budgeted sample and write sample.json.
    Sample(SharedArgs),
    /// Call the generation model, then parse and validate topic cards.
    Generate(SharedArgs),
    /// Assign corpus documents to topics by keyword matching.
    Assign(SharedArgs),
    /// Compute metrics and assemble report.json.
    Eval(SharedArgs),
    /// Score topic cards with the judge model.
    Judge(SharedArgs),
}

#[derive(Args)]
struct SharedArgs {
    /// JSON config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus JSONL path.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Run (output) directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Context-window budget in model tokens.
    #[arg(long)]
    budget_tokens: Option<usize>,
    /// Generation model name.
    #[arg(long)]
    model: Option<String>,
    /// Generation endpoint URL (selects the live backend).
    #[arg(long, conflicts_with = "mock_script")]
    endpoint: Option<String>,
    /// Environment variable holding the generation API key.
    #[arg(long)]
    api_key_env: Option<String>,
    /// Mock script for the generation model (selects the mock backend).
    #[arg(long)]
    mock_script: Option<PathBuf>,
    /// Minimum distinct keyword hits for a document→topic link.
    #[arg(long)]
    threshold_m: Option<usize>,
    /// Top keywords per topic used for NPMI.
    #[arg(long)]
    top_n: Option<usize>,
    /// Top keywords per topic used for diversity.
    #[arg(long)]
    top_k: Option<usize>,
    /// Also write report.csv.
    #[arg(long)]
    csv: bool,
}

impl SharedArgs {
    fn into_config(self) -> Result<RunConfig, topical::Error> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let corpus = self.corpus.clone().ok_or_else(|| {
                    topical::Error::Config("no corpus given (use --corpus or --config)".into())
                })?;
                let out_dir = self.out.clone().ok_or_else(|| {
                    topical::Error::Config("no run directory given (use --out or --config)".into())
                })?;
                RunConfig {
                    corpus,
                    out_dir,
                    max_unit_words: None,
                    sampling: Default::default(),
                    generation: Default::default(),
                    judge: None,
                    threshold_m: 1,
                    metrics: Default::default(),
                    emit_csv: false,
                }
            }
        };
        if let Some(corpus) = self.corpus {
            config.corpus = corpus;
        }
        if let Some(out) = self.out {
            config.out_dir = out;
        }
        if let Some(seed) = self.seed {
            config.sampling.seed = seed;
        }
        if let Some(budget) = self.budget_tokens {
            config.sampling.budget_tokens = budget;
        }
        if let Some(model) = self.model {
            config.generation.model.model_name = model;
        }
        if let Some(endpoint) = self.endpoint {
            config.generation.model.endpoint_url = endpoint;
            config.generation.backend = BackendChoice::Live;
        }
        if let Some(var) = self.api_key_env {
            config.generation.model.api_key_env = var;
        }
        if let Some(script) = self.mock_script {
            config.generation.backend = BackendChoice::Mock { script };
        }
        if let Some(m) = self.threshold_m {
            config.threshold_m = m;
        }
        if let Some(top_n) = self.top_n {
            config.metrics.top_n = top_n;
        }
        if let Some(top_k) = self.top_k {
            config.metrics.top_k = top_k;
        }
        if self.csv {
            config.emit_csv = true;
        }
        Ok(config)
    }
}

fn print_stage(name: &str, ran: bool) {
    outln!("{name}: {}", if ran { "ran" } else { "skipped (output exists)" });
}

fn print_summary(summary: &RunSummary) {
    for (name, ran) in &summary.stages {
        print_stage(name, *ran);
    }
    outln!("run directory: {}", summary.out_dir.display());
}

fn print_report_headline(config: &RunConfig) {
    let paths = RunPaths::new(&config.out_dir);
    let Ok(report) = topical::metrics::MetricsReport::load(paths.report()) else {
        return;
    };
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "missing".into());
    outln!("npmi: {}", fmt(report.npmi.mean));
    outln!("diversity: {:.4}", report.diversity);
    outln!("topic entropy (nats): {:.4}", report.topic_entropy);
    outln!("assignment accuracy: {}", fmt(report.assignment_accuracy));
    match &report.judge {
        Some(j) => outln!(
            "judge means: coherence {:.3}, concise {:.3}, informative {:.3}",
            j.coherence, j.concise, j.informative
        ),
        None => outln!("judge means: missing"),
    }
}

fn dispatch(command: Command) -> Result<(), topical::Error> {
    match command {
        Command::Run(args) => {
            let config = args.into_config()?;
            let summary = pipeline::run_pipeline(&config)?;
            print_summary(&summary);
            print_report_headline(&config);
            Ok(())
        }
        Command::Sample(args) => {
            let config = args.into_config()?;
            let (name, ran) = pipeline::stage_sample(&config)?;
            print_stage(name, ran);
            Ok(())
        }
        Command::Generate(args) => {
            let config = args.into_config()?;
            let (name, ran) = pipeline::stage_generate(&config)?;
            print_stage(name, ran);
            Ok(())
        }
        Command::Assign(args) => {
            let config = args.into_config()?;
            let (name, ran) = pipeline::stage_assign(&config)?;
            print_stage(name, ran);
            Ok(())
        }
        Command::Eval(args) => {
            let config = args.into_config()?;
            let (name, ran) = pipeline::stage_metrics(&config)?;
            print_stage(name, ran);
            print_report_headline(&config);
            Ok(())
        }
        Command::Judge(args) => {
            let config = args.into_config()?;
            let (name, ran) = pipeline::stage_judge(&config)?;
            print_stage(name, ran);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
