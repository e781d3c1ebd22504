//! `taxlink`: command-line driver for the normalization pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use taxlink::eval::{self, EvalReport};
use taxlink::pipeline::{self, CorpusFormat, PipelineError};
use taxlink::{NameClass, NonAsciiMode, PipelineConfig, Rank, ScorerKind};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BELOW_FLOOR: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "taxlink",
    version,
    about = "Link species mentions to NCBI Taxonomy identifiers"
)]
struct Cli {
    /// TOML file with pipeline settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse names.dmp/nodes.dmp into per-rank dictionaries.
    BuildDict,
    /// Index every dictionary entry with BM25.
    BuildIndex,
    /// Split the corpus, deduplicate mentions and retrieve candidates.
    Generate,
    /// Turn candidates into query/candidate pair files.
    MakePairs,
    /// Score the test pairs and pick one identifier per mention.
    Rerank,
    /// Score predictions and write the reports.
    Evaluate,
    /// Every stage in order.
    RunAll,
    /// Retrieve candidates for free text from a built index.
    Query {
        /// Mention text; several words are joined with spaces.
        #[arg(required = true)]
        text: Vec<String>,
    },
    /// Mean and standard deviation of accuracy across report.jsonl files.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true, value_name = "DIR")]
    work_dir: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    names: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    nodes: Option<PathBuf>,
    /// Comma-separated ranks, e.g. `species,genus`.
    #[arg(long, global = true, value_delimiter = ',')]
    ranks: Option<Vec<String>>,
    /// Comma-separated name classes admitted into dictionaries.
    #[arg(long, global = true, value_delimiter = ',')]
    name_classes: Option<Vec<String>>,
    #[arg(long, global = true, value_name = "PATH")]
    corpus: Option<PathBuf>,
    /// Label used in reports; defaults to the corpus file stem.
    #[arg(long, global = true)]
    corpus_name: Option<String>,
    /// `standoff-tsv` or `brat-ann`.
    #[arg(long, global = true)]
    format: Option<CorpusFormat>,
    #[arg(long, global = true, value_name = "FILE")]
    acronyms: Option<PathBuf>,
    /// `transliterate` or `drop`.
    #[arg(long, global = true)]
    non_ascii: Option<NonAsciiMode>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    k1: Option<f64>,
    #[arg(long, global = true)]
    k2: Option<f64>,
    #[arg(long, global = true)]
    b: Option<f64>,
    /// `passthrough`, `oracle-stub` or `external`.
    #[arg(long, global = true)]
    scorer: Option<ScorerKind>,
    /// Directory for the pair files.
    #[arg(long, global = true, value_name = "DIR")]
    pairs_out: Option<PathBuf>,
    /// Score file for the external scorer.
    #[arg(long, global = true, value_name = "FILE")]
    scores_in: Option<PathBuf>,
    /// Text report path; the JSONL report goes next to it.
    #[arg(long, global = true, value_name = "FILE")]
    report_out: Option<PathBuf>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// Drop train/dev queries whose candidates are all negatives.
    #[arg(long, global = true)]
    positive_queries_only: bool,
    /// Exit with status 3 when accuracy ends up below this value.
    #[arg(long, global = true)]
    min_accuracy: Option<f64>,
}

impl Overrides {
    fn apply(self, c: &mut PipelineConfig) {
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.$field = v; } )* };
        }
        macro_rules! set_opt {
            ($($field:ident),*) => { $( if self.$field.is_some() { c.$field = self.$field; } )* };
        }
        set!(work_dir, format, non_ascii, seed, k, scorer, batch_size);
        set_opt!(
            names,
            nodes,
            corpus,
            corpus_name,
            acronyms,
            pairs_out,
            scores_in,
            report_out,
            min_accuracy
        );
        if let Some(ranks) = self.ranks {
            c.ranks = ranks.iter().map(|r| Rank::from(r.trim())).collect();
        }
        if let Some(classes) = self.name_classes {
            c.name_classes = classes.iter().map(|n| NameClass::from(n.trim())).collect();
        }
        if let Some(v) = self.k1 {
            c.bm25.k1 = v;
        }
        if let Some(v) = self.k2 {
            c.bm25.k2 = v;
        }
        if let Some(v) = self.b {
            c.bm25.b = v;
        }
        if self.positive_queries_only {
            c.include_all_negative = false;
        }
    }
}

fn load_config(path: Option<&Path>, overrides: Overrides) -> Result<PipelineConfig> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    overrides.apply(&mut config);
    config.validate()?;
    Ok(config)
}

/// Marks errors in the configuration itself, as opposed to failures while running.
#[derive(Debug)]
struct Usage;

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("invalid configuration")
    }
}

fn print_report(config: &PipelineConfig, report: &EvalReport) {
    println!(
        "{} {}: accuracy {:.4} ({}/{}), recall@{} {:.4} ({}/{})",
        report.corpus,
        report.system,
        report.accuracy,
        report.correct_at_1,
        report.generatable_mentions,
        report.k,
        report.recall_at_k,
        report.generatable_mentions,
        report.total_mentions
    );
    println!("report: {}", config.report_path().display());
}

enum Outcome {
    Done,
    BelowFloor(f64, f64),
}

fn check_floor(config: &PipelineConfig, report: &EvalReport) -> Outcome {
    match config.min_accuracy {
        Some(floor) if report.accuracy < floor => Outcome::BelowFloor(report.accuracy, floor),
        _ => Outcome::Done,
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    if let Command::Compare { reports } = &cli.command {
        let loaded = reports
            .iter()
            .map(|p| pipeline::read_report_jsonl(p))
            .collect::<Result<Vec<_>, _>>()?;
        println!("{:<24}  {:>4}  {:>8}  {:>8}", "system", "runs", "mean", "sd");
        for s in eval::compare_runs(&loaded)? {
            println!(
                "{:<24}  {:>4}  {:>8.4}  {:>8.4}",
                s.system, s.runs, s.mean_accuracy, s.sd_accuracy
            );
        }
        return Ok(Outcome::Done);
    }

    let config = load_config(cli.config.as_deref(), cli.overrides).context(Usage)?;
    match cli.command {
        Command::BuildDict => {
            let dicts = pipeline::build_dict(&config)?;
            for d in &dicts.dictionaries {
                println!("{:<10} {}", d.rank, d.len());
            }
        }
        Command::BuildIndex => {
            let index = pipeline::build_index(&config)?;
            println!("{} documents, {} terms", index.num_docs(), index.num_terms());
        }
        Command::Generate => {
            for (subset, queries) in pipeline::generate(&config)? {
                let generatable = queries.iter().filter(|q| q.is_generatable()).count();
                println!(
                    "{:<5} {} queries, {} generatable",
                    subset.as_str(),
                    queries.len(),
                    generatable
                );
            }
        }
        Command::MakePairs => {
            for (subset, set) in pipeline::make_pairs(&config)? {
                println!(
                    "{:<5} {} pairs, {} ungeneratable",
                    subset.as_str(),
                    set.pairs.len(),
                    set.ungeneratable.len()
                );
            }
        }
        Command::Rerank => {
            let predictions = pipeline::rerank(&config)?;
            println!("{} predictions", predictions.len());
        }
        Command::Evaluate => {
            let report = pipeline::evaluate(&config)?;
            print_report(&config, &report);
            return Ok(check_floor(&config, &report));
        }
        Command::RunAll => {
            let report = pipeline::run_all(&config)?;
            print_report(&config, &report);
            return Ok(check_floor(&config, &report));
        }
        Command::Query { text } => {
            let dicts = pipeline::load_dictionaries(&config)?;
            let list = pipeline::query(&config, &text.join(" "))?;
            println!("query: {}", list.query);
            for (i, c) in list.candidates.iter().enumerate() {
                let concept = dicts.concept(c.tax_id).map(|e| e.concept_text.as_str()).unwrap_or("");
                println!("{:>3}  {:>10}  {:>9.4}  {}", i + 1, c.tax_id, c.score, concept);
            }
        }
        Command::Compare { .. } => unreachable!(),
    }
    Ok(Outcome::Done)
}

fn is_usage_error(err: &anyhow::Error) -> bool {
    err.downcast_ref::<Usage>().is_some()
        || err
            .chain()
            .any(|e| matches!(e.downcast_ref::<PipelineError>(), Some(PipelineError::Config(_))))
}

/// The error chain on one line, skipping causes whose text is already shown.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = err.to_string();
    for cause in err.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::BelowFloor(acc, floor)) => {
            eprintln!("error: accuracy {acc:.4} is below --min-accuracy {floor}");
            ExitCode::from(EXIT_BELOW_FLOOR)
        }
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(if is_usage_error(&err) { EXIT_USAGE } else { EXIT_FAILURE })
        }
    }
}
