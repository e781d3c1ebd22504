//! End-to-end orchestration over a work directory.
//!
//! Every stage reads its inputs from the work directory (or from configured
//! paths), writes its artifacts back, and records digests of both in
//! `manifest.json`. Running the stages one by one produces the same files as
//! [`run_all`].
//!
//! Work directory layout:
//!
//! ```text
//! dict/ranks.txt, dict/<rank>.tsv   build-dict
//! index.bm25                         build-index
//! split.tsv                          generate
//! candidates.{train,dev,test}.jsonl  generate
//! pairs.{train,dev,test}.jsonl       make-pairs (directory overridable)
//! ungeneratable.{train,dev,test}.tsv make-pairs
//! predictions.tsv                    rerank
//! report.txt, report.jsonl           evaluate (path overridable)
//! manifest.json                      every stage
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bm25::{Bm25Params, CandidateList, IndexError, InvertedIndex};
use crate::corpus::{
    dedup_subset, document_ids, load_annotations, split_documents, AnnotationFormat, CorpusError, MentionAnnotation,
    SplitRatios, Subset,
};
use crate::eval::{self, EvalError, EvalReport, RunLabel};
use crate::normalize::{AcronymError, AcronymMap, NonAsciiMode, Normalizer};
use crate::pairs::{self, PairError, QueryCandidates};
use crate::rerank::{
    self, ExternalScorer, OracleStubScorer, PassthroughScorer, Prediction, RerankError, Scorer, ScorerKind,
};
use crate::taxdump::{self, DictionaryConfig, DictionarySet, TaxdumpError};
use crate::taxon::{NameClass, Rank};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DICT_DIR: &str = "dict";
pub const INDEX_FILE: &str = "index.bm25";
pub const SPLIT_FILE: &str = "split.tsv";
pub const PREDICTIONS_FILE: &str = "predictions.tsv";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Taxdump {
        path: PathBuf,
        #[source]
        source: TaxdumpError,
    },
    #[error("{path}: {source}")]
    Corpus {
        path: PathBuf,
        #[source]
        source: CorpusError,
    },
    #[error("{path}: {source}")]
    Acronyms {
        path: PathBuf,
        #[source]
        source: AcronymError,
    },
    #[error("{path}: {source}")]
    Pairs {
        path: PathBuf,
        #[source]
        source: PairError,
    },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    #[default]
    StandoffTsv,
    /// A directory of brat `.ann` files; the document id is the file stem.
    BratAnn,
}

impl std::str::FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "standoff-tsv" => Ok(Self::StandoffTsv),
            "brat-ann" => Ok(Self::BratAnn),
            other => Err(format!("unknown corpus format `{other}`")),
        }
    }
}

/// Everything a run depends on. Serialized verbatim into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub work_dir: PathBuf,
    pub names: Option<PathBuf>,
    pub nodes: Option<PathBuf>,
    pub ranks: Vec<Rank>,
    /// Restricts dictionary names to these classes; empty admits all.
    pub name_classes: Vec<NameClass>,
    pub corpus: Option<PathBuf>,
    pub corpus_name: Option<String>,
    pub format: CorpusFormat,
    pub acronyms: Option<PathBuf>,
    pub non_ascii: NonAsciiMode,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub k: usize,
    pub bm25: Bm25Params,
    pub scorer: ScorerKind,
    pub scores_in: Option<PathBuf>,
    /// Keep train/dev queries whose candidates are all negatives.
    pub include_all_negative: bool,
    pub batch_size: usize,
    pub pairs_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
    pub min_accuracy: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            work_dir: PathBuf::from("work"),
            names: None,
            nodes: None,
            ranks: Rank::default_set(),
            name_classes: Vec::new(),
            corpus: None,
            corpus_name: None,
            format: CorpusFormat::default(),
            acronyms: None,
            non_ascii: NonAsciiMode::default(),
            seed: 0,
            ratios: SplitRatios::default(),
            k: 10,
            bm25: Bm25Params::default(),
            scorer: ScorerKind::Passthrough,
            scores_in: None,
            include_all_negative: true,
            batch_size: rerank::DEFAULT_BATCH_SIZE,
            pairs_out: None,
            report_out: None,
            min_accuracy: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(PipelineError::Config("k must be at least 1".into()));
        }
        if self.ranks.is_empty() {
            return Err(PipelineError::Config("at least one rank is required".into()));
        }
        self.bm25.validate()?;
        if let Some(floor) = self.min_accuracy {
            if !(0.0..=1.0).contains(&floor) {
                return Err(PipelineError::Config(format!("min_accuracy {floor} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.work_dir.join(name)
    }

    fn pairs_dir(&self) -> PathBuf {
        self.pairs_out.clone().unwrap_or_else(|| self.work_dir.clone())
    }

    pub fn candidates_path(&self, subset: Subset) -> PathBuf {
        self.path(&format!("candidates.{subset}.jsonl"))
    }

    pub fn pairs_path(&self, subset: Subset) -> PathBuf {
        self.pairs_dir().join(format!("pairs.{subset}.jsonl"))
    }

    pub fn ungeneratable_path(&self, subset: Subset) -> PathBuf {
        self.path(&format!("ungeneratable.{subset}.tsv"))
    }

    pub fn predictions_path(&self) -> PathBuf {
        self.path(PREDICTIONS_FILE)
    }

    /// Text report path; the JSONL report sits next to it with a `.jsonl`
    /// extension.
    pub fn report_path(&self) -> PathBuf {
        self.report_out.clone().unwrap_or_else(|| self.path("report.txt"))
    }

    pub fn report_jsonl_path(&self) -> PathBuf {
        self.report_path().with_extension("jsonl")
    }

    fn required<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| PipelineError::Config(format!("missing required input --{flag}")))
    }

    fn corpus_label(&self) -> String {
        self.corpus_name.clone().unwrap_or_else(|| {
            self.corpus
                .as_deref()
                .and_then(Path::file_stem)
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "corpus".into())
        })
    }

    fn system_label(&self) -> String {
        match self.scorer {
            ScorerKind::Passthrough => "bm25".into(),
            other => format!("bm25+{other}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub started: String,
    pub finished: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// What was run, with which configuration, and what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: PipelineConfig,
    pub acronym_map_sha256: Option<String>,
    pub dictionary_sha256: Option<String>,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    fn new(config: &PipelineConfig) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            acronym_map_sha256: None,
            dictionary_sha256: None,
            stages: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::File {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    fn record(&mut self, stage: StageRecord) {
        self.stages.retain(|s| s.stage != stage.stage);
        self.stages.push(stage);
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::File {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(file_err(path))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(file_err(parent))?;
    }
    let mut out = BufWriter::new(File::create(path).map_err(file_err(path))?);
    f(&mut out).and_then(|_| out.flush()).map_err(file_err(path))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut reader = open(path)?;
    let mut hasher = Sha256::new();
    loop {
        let buf = reader.fill_buf().map_err(file_err(path))?;
        if buf.is_empty() {
            break;
        }
        hasher.update(buf);
        let n = buf.len();
        reader.consume(n);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn digests<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(file_err(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file())
                .collect();
            files.sort();
            for f in files {
                out.insert(f.display().to_string(), sha256_file(&f)?);
            }
        } else if p.is_file() {
            out.insert(p.display().to_string(), sha256_file(p)?);
        }
    }
    Ok(out)
}

/// Runs one stage and records it in the manifest.
fn staged<T>(
    config: &PipelineConfig,
    stage: &str,
    inputs: &[&Path],
    outputs: &[&Path],
    body: impl FnOnce(&mut RunManifest) -> Result<T>,
) -> Result<T> {
    let manifest_path = config.path(MANIFEST_FILE);
    let mut manifest = match RunManifest::load(&manifest_path) {
        Ok(m) => m,
        Err(_) => RunManifest::new(config),
    };
    manifest.config = config.clone();
    let started = now();
    let input_digests = digests(inputs.iter().copied())?;
    let value = body(&mut manifest)?;
    manifest.record(StageRecord {
        stage: stage.to_string(),
        started,
        finished: now(),
        inputs: input_digests,
        outputs: digests(outputs.iter().copied())?,
    });
    let text = serde_json::to_string_pretty(&manifest)?;
    write_file(&manifest_path, |w| writeln!(w, "{text}"))?;
    Ok(value)
}

/// The mention normalizer: acronym map (if configured) plus transliteration mode.
pub fn normalizer(config: &PipelineConfig) -> Result<Normalizer> {
    let acronyms = match &config.acronyms {
        Some(path) => {
            AcronymMap::from_reader(open(path)?, config.non_ascii).map_err(|source| PipelineError::Acronyms {
                path: path.clone(),
                source,
            })?
        }
        None => AcronymMap::new(),
    };
    Ok(Normalizer::new(acronyms, config.non_ascii))
}

fn dictionary_digest(dicts: &DictionarySet) -> String {
    let mut hasher = Sha256::new();
    for d in &dicts.dictionaries {
        hasher.update(format!("# {}\n", d.rank).as_bytes());
        for e in d.entries.values() {
            hasher.update(format!("{}\t{}\n", e.tax_id, e.concept_text).as_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

/// Parses the dump and writes one dictionary file per rank.
pub fn build_dict(config: &PipelineConfig) -> Result<DictionarySet> {
    config.validate()?;
    let names_path = config.required(&config.names, "names")?;
    let nodes_path = config.required(&config.nodes, "nodes")?;
    let dict_dir = config.path(DICT_DIR);
    staged(
        config,
        "build-dict",
        &[names_path, nodes_path],
        &[&dict_dir],
        |manifest| {
            let tax_err = |path: &Path| {
                let path = path.to_path_buf();
                move |source| PipelineError::Taxdump { path, source }
            };
            let names = taxdump::parse_names(open(names_path)?).map_err(tax_err(names_path))?;
            let nodes = taxdump::parse_nodes(open(nodes_path)?).map_err(tax_err(nodes_path))?;
            let dict_config = DictionaryConfig {
                ranks: config.ranks.clone(),
                name_classes: (!config.name_classes.is_empty())
                    .then(|| config.name_classes.iter().cloned().collect::<BTreeSet<_>>()),
            };
            // dictionary text never goes through acronym expansion
            let plain = Normalizer::plain(config.non_ascii);
            let dicts =
                taxdump::build_dictionaries(&names, &nodes, &plain, &dict_config).map_err(tax_err(names_path))?;
            if dict_dir.exists() {
                std::fs::remove_dir_all(&dict_dir).map_err(file_err(&dict_dir))?;
            }
            dicts.save(&dict_dir).map_err(file_err(&dict_dir))?;
            manifest.dictionary_sha256 = Some(dictionary_digest(&dicts));
            log::info!("built {} dictionary entries", dicts.total_entries());
            Ok(dicts)
        },
    )
}

pub fn load_dictionaries(config: &PipelineConfig) -> Result<DictionarySet> {
    let dir = config.path(DICT_DIR);
    DictionarySet::load(&dir).map_err(|source| PipelineError::Taxdump { path: dir, source })
}

/// Indexes every dictionary entry, ascending by tax_id.
pub fn build_index(config: &PipelineConfig) -> Result<InvertedIndex> {
    config.validate()?;
    let dict_dir = config.path(DICT_DIR);
    let index_path = config.path(INDEX_FILE);
    staged(config, "build-index", &[&dict_dir], &[&index_path], |_| {
        let dicts = load_dictionaries(config)?;
        let index = InvertedIndex::build(&dicts.all_entries())?;
        write_file(&index_path, |w| index.write_to(w))?;
        Ok(index)
    })
}

pub fn load_index(config: &PipelineConfig) -> Result<InvertedIndex> {
    let path = config.path(INDEX_FILE);
    Ok(InvertedIndex::read_from(open(&path)?)?)
}

/// Normalizes `text` as a corpus mention and retrieves `config.k` candidates
/// from the built index. Writes nothing.
pub fn query(config: &PipelineConfig, text: &str) -> Result<CandidateList> {
    config.validate()?;
    let normalized = normalizer(config)?.normalize(text);
    let index = load_index(config)?;
    Ok(index.top_k(&config.bm25, &crate::normalize::tokenize(&normalized), config.k))
}

pub fn load_corpus(config: &PipelineConfig) -> Result<Vec<MentionAnnotation>> {
    let path = config.required(&config.corpus, "corpus")?;
    let corpus_err = |p: &Path| {
        let path = p.to_path_buf();
        move |source| PipelineError::Corpus { path, source }
    };
    match config.format {
        CorpusFormat::StandoffTsv => {
            load_annotations(open(path)?, &AnnotationFormat::StandoffTsv).map_err(corpus_err(path))
        }
        CorpusFormat::BratAnn => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(file_err(path))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "ann"))
                .collect();
            files.sort();
            let mut all = Vec::new();
            for file in files {
                let doc_id = file
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let format = AnnotationFormat::BratAnn { doc_id };
                all.extend(load_annotations(open(&file)?, &format).map_err(corpus_err(&file))?);
            }
            Ok(all)
        }
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    write_file(path, |w| {
        for item in items {
            serde_json::to_writer(&mut *w, item)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn read_candidates(path: &Path) -> Result<Vec<QueryCandidates>> {
    pairs::read_jsonl(open(path)?).map_err(|source| PipelineError::Pairs {
        path: path.to_path_buf(),
        source,
    })
}

/// Splits the corpus, deduplicates each subset and retrieves candidates.
pub fn generate(config: &PipelineConfig) -> Result<BTreeMap<Subset, Vec<QueryCandidates>>> {
    config.validate()?;
    let corpus = config.required(&config.corpus, "corpus")?;
    let index_path = config.path(INDEX_FILE);
    let mut inputs = vec![corpus, index_path.as_path()];
    if let Some(a) = &config.acronyms {
        inputs.push(a);
    }
    let split_path = config.path(SPLIT_FILE);
    let cand_paths: Vec<PathBuf> = Subset::ALL.iter().map(|s| config.candidates_path(*s)).collect();
    let mut outputs = vec![split_path.as_path()];
    outputs.extend(cand_paths.iter().map(PathBuf::as_path));

    staged(config, "generate", &inputs, &outputs, |manifest| {
        let normalizer = normalizer(config)?;
        manifest.acronym_map_sha256 = config
            .acronyms
            .as_ref()
            .map(|_| hex::encode(Sha256::digest(normalizer.acronyms().to_tsv().as_bytes())));
        let index = load_index(config)?;
        let mentions = load_corpus(config)?;
        let doc_ids = document_ids(&mentions);
        let split = split_documents(&doc_ids, config.seed, config.ratios).map_err(|source| PipelineError::Corpus {
            path: corpus.to_path_buf(),
            source,
        })?;
        write_file(&split_path, |w| split.write_membership(&doc_ids, w))?;

        let mut out = BTreeMap::new();
        for subset in Subset::ALL {
            let unique = dedup_subset(&mentions, &split, subset, &normalizer);
            let queries = pairs::generate_candidates(&unique, &index, &config.bm25, config.k);
            write_jsonl(&config.candidates_path(subset), &queries)?;
            log::info!("{subset}: {} unique mentions", queries.len());
            out.insert(subset, queries);
        }
        Ok(out)
    })
}

/// Exports the pair files for the external scorer. Train and dev pairs carry
/// labels; test pairs do not.
pub fn make_pairs(config: &PipelineConfig) -> Result<BTreeMap<Subset, pairs::PairSet>> {
    config.validate()?;
    let dict_dir = config.path(DICT_DIR);
    let cand_paths: Vec<PathBuf> = Subset::ALL.iter().map(|s| config.candidates_path(*s)).collect();
    let mut inputs = vec![dict_dir.as_path()];
    inputs.extend(cand_paths.iter().map(PathBuf::as_path));
    let out_paths: Vec<PathBuf> = Subset::ALL
        .iter()
        .flat_map(|s| [config.pairs_path(*s), config.ungeneratable_path(*s)])
        .collect();
    let outputs: Vec<&Path> = out_paths.iter().map(PathBuf::as_path).collect();

    staged(config, "make-pairs", &inputs, &outputs, |_| {
        let dicts = load_dictionaries(config)?;
        let mut out = BTreeMap::new();
        for subset in Subset::ALL {
            let path = config.candidates_path(subset);
            let queries = read_candidates(&path)?;
            let mut set = pairs::pairs_from_candidates(&queries, &dicts)
                .map_err(|source| PipelineError::Pairs { path, source })?;
            let labeled = subset != Subset::Test;
            if labeled && !config.include_all_negative {
                let positive: BTreeSet<&str> = set
                    .pairs
                    .iter()
                    .filter(|p| p.label == 1)
                    .map(|p| p.query_id.as_str())
                    .collect();
                let keep: Vec<_> = set
                    .pairs
                    .iter()
                    .filter(|p| positive.contains(p.query_id.as_str()))
                    .cloned()
                    .collect();
                set.pairs = keep;
            }
            write_file(&config.pairs_path(subset), |w| {
                pairs::export_pairs(&set.pairs, w, labeled)
            })?;
            write_file(&config.ungeneratable_path(subset), |w| {
                for u in &set.ungeneratable {
                    let reason = serde_json::to_value(u.reason)?;
                    writeln!(
                        w,
                        "{}\t{}\t{}\t{}",
                        u.query_id,
                        u.query,
                        u.gold_id,
                        reason.as_str().unwrap_or("")
                    )?;
                }
                Ok(())
            })?;
            out.insert(subset, set);
        }
        Ok(out)
    })
}

fn scorer(config: &PipelineConfig) -> Result<Box<dyn Scorer>> {
    Ok(match config.scorer {
        ScorerKind::Passthrough => Box::new(PassthroughScorer),
        ScorerKind::OracleStub => Box::new(OracleStubScorer),
        ScorerKind::External => {
            let path = config.required(&config.scores_in, "scores-in")?;
            Box::new(
                ExternalScorer::from_reader(open(path)?).map_err(|source| PipelineError::Pairs {
                    path: path.to_path_buf(),
                    source,
                })?,
            )
        }
    })
}

/// Scores the test pairs and writes one prediction per query.
pub fn rerank(config: &PipelineConfig) -> Result<Vec<Prediction>> {
    config.validate()?;
    let dict_dir = config.path(DICT_DIR);
    let cand_path = config.candidates_path(Subset::Test);
    let mut inputs = vec![dict_dir.as_path(), cand_path.as_path()];
    if let Some(s) = &config.scores_in {
        inputs.push(s);
    }
    let pred_path = config.predictions_path();
    staged(config, "rerank", &inputs, &[&pred_path], |_| {
        let dicts = load_dictionaries(config)?;
        let queries = read_candidates(&cand_path)?;
        let set = pairs::pairs_from_candidates(&queries, &dicts).map_err(|source| PipelineError::Pairs {
            path: cand_path.clone(),
            source,
        })?;
        let scorer = scorer(config)?;
        let predictions = rerank::rerank_all(&set.pairs, scorer.as_ref(), config.batch_size)?;
        write_file(&pred_path, |w| rerank::write_predictions(&predictions, w))?;
        Ok(predictions)
    })
}

/// Scores predictions against the test candidates and writes both reports.
pub fn evaluate(config: &PipelineConfig) -> Result<EvalReport> {
    config.validate()?;
    let dict_dir = config.path(DICT_DIR);
    let cand_path = config.candidates_path(Subset::Test);
    let pred_path = config.predictions_path();
    let (text_path, jsonl_path) = (config.report_path(), config.report_jsonl_path());
    staged(
        config,
        "evaluate",
        &[&dict_dir, &cand_path, &pred_path],
        &[&text_path, &jsonl_path],
        |_| {
            let dicts = load_dictionaries(config)?;
            let queries = read_candidates(&cand_path)?;
            let predictions = rerank::read_predictions(open(&pred_path)?)?;
            let label = RunLabel {
                corpus: config.corpus_label(),
                system: config.system_label(),
                k: config.k,
            };
            let report = eval::evaluate(&predictions, &queries, &label)?;
            let mismatches = eval::lexical_mismatches(&report, &dicts);
            write_file(&text_path, |w| {
                w.write_all(eval::render_text(&report, &mismatches).as_bytes())
            })?;
            write_file(&jsonl_path, |w| eval::write_jsonl(&report, &mismatches, w))?;
            Ok(report)
        },
    )
}

/// Every stage in order, starting from a fresh manifest.
pub fn run_all(config: &PipelineConfig) -> Result<EvalReport> {
    config.validate()?;
    let manifest_path = config.path(MANIFEST_FILE);
    if manifest_path.exists() {
        std::fs::remove_file(&manifest_path).map_err(file_err(&manifest_path))?;
    }
    build_dict(config)?;
    build_index(config)?;
    generate(config)?;
    make_pairs(config)?;
    rerank(config)?;
    evaluate(config)
}

/// Reads the JSON summary line of a report written by [`evaluate`] back into
/// an [`EvalReport`] (per-mention outcomes included).
pub fn read_report_jsonl(path: &Path) -> Result<EvalReport> {
    #[derive(Deserialize)]
    #[serde(tag = "type", rename_all = "lowercase")]
    enum Line {
        Summary {
            corpus: String,
            system: String,
            k: usize,
            total_mentions: usize,
            generatable_mentions: usize,
            correct_at_1: usize,
            accuracy: f64,
            recall_at_k: f64,
        },
        Mention(eval::MentionOutcome),
        Mismatch(serde::de::IgnoredAny),
    }
    let mut report: Option<EvalReport> = None;
    for line in open(path)?.lines() {
        let line = line.map_err(file_err(path))?;
        match serde_json::from_str::<Line>(&line)? {
            Line::Summary {
                corpus,
                system,
                k,
                total_mentions,
                generatable_mentions,
                correct_at_1,
                accuracy,
                recall_at_k,
            } => {
                report = Some(EvalReport {
                    corpus,
                    system,
                    k,
                    total_mentions,
                    generatable_mentions,
                    correct_at_1,
                    accuracy,
                    recall_at_k,
                    per_mention: Vec::new(),
                })
            }
            Line::Mention(m) => {
                if let Some(r) = report.as_mut() {
                    r.per_mention.push(m);
                }
            }
            Line::Mismatch(_) => {}
        }
    }
    report.ok_or_else(|| PipelineError::Config(format!("{} has no summary line", path.display())))
}
