mod common;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use common::fixture_config;
use taxlink::pairs::{self, ScoreRecord};
use taxlink::pipeline::{self, RunManifest};
use taxlink::rerank;
use taxlink::{PipelineConfig, ScorerKind, Subset};

const OUTPUTS: &[&str] = &["predictions.tsv", "report.txt", "report.jsonl"];

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn run_all_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline::run_all(&fixture_config(a.path())).unwrap();
    pipeline::run_all(&fixture_config(b.path())).unwrap();
    for name in OUTPUTS
        .iter()
        .chain(&["split.tsv", "index.bm25", "pairs.train.jsonl", "candidates.test.jsonl"])
    {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
}

#[test]
fn stages_compose_to_run_all() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let whole = pipeline::run_all(&fixture_config(a.path())).unwrap();
    let config = fixture_config(b.path());
    pipeline::build_dict(&config).unwrap();
    pipeline::build_index(&config).unwrap();
    pipeline::generate(&config).unwrap();
    pipeline::make_pairs(&config).unwrap();
    pipeline::rerank(&config).unwrap();
    let staged = pipeline::evaluate(&config).unwrap();
    assert_eq!(whole, staged);
    for name in OUTPUTS {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
}

#[test]
fn manifest_records_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path());
    pipeline::run_all(&config).unwrap();
    let manifest = RunManifest::load(&dir.path().join("manifest.json")).unwrap();
    let stages: Vec<&str> = manifest.stages.iter().map(|s| s.stage.as_str()).collect();
    assert_eq!(
        stages,
        [
            "build-dict",
            "build-index",
            "generate",
            "make-pairs",
            "rerank",
            "evaluate"
        ]
    );
    assert_eq!(manifest.config, config);
    assert!(manifest.acronym_map_sha256.is_some());
    assert!(manifest.dictionary_sha256.is_some());
    let rerank = &manifest.stages[4];
    let pred = dir.path().join("predictions.tsv");
    assert_eq!(
        rerank.outputs[&pred.display().to_string()],
        pipeline::sha256_file(&pred).unwrap()
    );
}

#[test]
fn passthrough_picks_bm25_rank_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path());
    pipeline::run_all(&config).unwrap();
    let queries = pipeline::read_candidates(&config.candidates_path(Subset::Test)).unwrap();
    let preds = rerank::read_predictions(BufReader::new(File::open(config.predictions_path()).unwrap())).unwrap();
    let by_query: BTreeMap<&str, _> = preds.iter().map(|p| (p.query_id.as_str(), p.tax_id)).collect();
    let mut checked = 0;
    for q in &queries {
        match q.candidates.first() {
            Some(top) => {
                assert_eq!(by_query[q.query_id.as_str()], top.tax_id, "{}", q.query);
                checked += 1;
            }
            None => assert!(!by_query.contains_key(q.query_id.as_str())),
        }
    }
    assert!(checked > 0);
}

#[test]
fn oracle_stub_is_perfect_on_generatable_mentions() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig {
        scorer: ScorerKind::OracleStub,
        ..fixture_config(dir.path())
    };
    let report = pipeline::run_all(&config).unwrap();
    assert!(report.generatable_mentions > 0);
    assert_eq!(report.accuracy, 1.0);
    assert_eq!(report.system, "bm25+oracle-stub");
}

#[test]
fn external_scores_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let base = fixture_config(dir.path());
    pipeline::run_all(&PipelineConfig {
        scorer: ScorerKind::OracleStub,
        ..base.clone()
    })
    .unwrap();
    let oracle_preds = std::fs::read(base.predictions_path()).unwrap();

    // test pairs carry no label; recover it from the gold id in the candidates
    let queries = pipeline::read_candidates(&base.candidates_path(Subset::Test)).unwrap();
    let gold: BTreeMap<&str, _> = queries.iter().map(|q| (q.query_id.as_str(), q.gold_id)).collect();
    let records = pairs::read_pair_records(BufReader::new(File::open(base.pairs_path(Subset::Test)).unwrap())).unwrap();
    assert!(records.iter().all(|r| r.label.is_none()));
    let scores: Vec<ScoreRecord> = records
        .iter()
        .map(|r| ScoreRecord {
            query_id: r.query_id.clone(),
            candidate_id: r.candidate_id,
            score: if gold[r.query_id.as_str()] == r.candidate_id {
                0.9
            } else {
                0.1
            },
        })
        .collect();
    let scores_path = dir.path().join("scores.jsonl");
    pairs::write_scores(&scores, File::create(&scores_path).unwrap()).unwrap();

    let external = PipelineConfig {
        scorer: ScorerKind::External,
        scores_in: Some(scores_path),
        ..base.clone()
    };
    pipeline::rerank(&external).unwrap();
    let report = pipeline::evaluate(&external).unwrap();
    assert_eq!(report.accuracy, 1.0);
    assert_eq!(report.system, "bm25+external");
    // scores differ from the stub's, so only the chosen ids are compared
    let ids = |bytes: &[u8]| -> Vec<(String, String)> {
        String::from_utf8_lossy(bytes)
            .lines()
            .map(|l| {
                let f: Vec<&str> = l.split('\t').collect();
                (f[0].to_string(), f[1].to_string())
            })
            .collect()
    };
    assert_eq!(
        ids(&oracle_preds),
        ids(&std::fs::read(base.predictions_path()).unwrap())
    );
}

#[test]
fn train_and_dev_pairs_are_labeled() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path());
    pipeline::run_all(&config).unwrap();
    for subset in [Subset::Train, Subset::Dev] {
        let records = pairs::read_pair_records(BufReader::new(File::open(config.pairs_path(subset)).unwrap())).unwrap();
        assert!(records.iter().all(|r| matches!(r.label, Some(0 | 1))), "{subset:?}");
    }
}

#[test]
fn report_jsonl_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path());
    let report = pipeline::run_all(&config).unwrap();
    assert_eq!(
        pipeline::read_report_jsonl(&config.report_jsonl_path()).unwrap(),
        report
    );
    assert_eq!(report.corpus, "mini_corpus");
}

#[test]
fn missing_inputs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig {
        names: None,
        ..fixture_config(dir.path())
    };
    let err = pipeline::build_dict(&config).unwrap_err();
    assert!(err.to_string().contains("names"), "{err}");
}

#[test]
fn bad_scores_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let base = fixture_config(dir.path());
    pipeline::run_all(&base).unwrap();
    let scores_path = dir.path().join("scores.jsonl");
    std::fs::write(
        &scores_path,
        "{\"query_id\":\"x\",\"candidate_id\":9606,\"score\":1.5}\n",
    )
    .unwrap();
    let config = PipelineConfig {
        scorer: ScorerKind::External,
        scores_in: Some(scores_path),
        ..base
    };
    assert!(pipeline::rerank(&config).is_err());
}
