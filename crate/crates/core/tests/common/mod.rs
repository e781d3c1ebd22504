#![allow(dead_code)]

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use taxlink::bm25::Candidate;
use taxlink::taxon::tax;
use taxlink::{Bm25Params, ConceptEntry, PipelineConfig};

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn fixture_config(work_dir: &Path) -> PipelineConfig {
    PipelineConfig {
        work_dir: work_dir.to_path_buf(),
        names: Some(fixture("mini_taxdump/names.dmp")),
        nodes: Some(fixture("mini_taxdump/nodes.dmp")),
        corpus: Some(fixture("mini_corpus.tsv")),
        acronyms: Some(fixture("acronyms.tsv")),
        seed: 7,
        // a bigger test slice keeps the fixture run interesting
        ratios: taxlink::SplitRatios {
            train: 0.5,
            dev: 0.1,
            test: 0.4,
        },
        ..PipelineConfig::default()
    }
}

/// Scores every document from scratch straight off the formula.
pub fn brute_force(entries: &[ConceptEntry], query: &[String], p: &Bm25Params, k: usize) -> Vec<Candidate> {
    let n_docs = entries.len() as f64;
    let avgdl = entries.iter().map(|e| e.tokens.len()).sum::<usize>() as f64 / n_docs;
    let mut unique: Vec<&String> = Vec::new();
    for t in query {
        if !unique.contains(&t) {
            unique.push(t);
        }
    }
    let mut out = Vec::new();
    for e in entries {
        let dl = e.tokens.len() as f64;
        let mut s = 0.0;
        for t in &unique {
            let f = e.tokens.iter().filter(|x| x == t).count() as f64;
            if f == 0.0 {
                continue;
            }
            let n = entries.iter().filter(|d| d.tokens.contains(t)).count() as f64;
            let qf = query.iter().filter(|x| x == t).count() as f64;
            let idf = (1.0 + (n_docs - n + 0.5) / (n + 0.5)).ln();
            let big_k = p.k1 * ((1.0 - p.b) + p.b * dl / avgdl);
            s += idf * ((p.k1 + 1.0) * f) / (big_k + f) * ((p.k2 + 1.0) * qf) / (p.k2 + qf);
        }
        if s > 0.0 {
            out.push(Candidate {
                tax_id: e.tax_id,
                score: s,
            });
        }
    }
    out.sort_by(|a, b| match b.score.partial_cmp(&a.score).unwrap() {
        Ordering::Equal => a.tax_id.cmp(&b.tax_id),
        o => o,
    });
    out.truncate(k);
    out
}

const VOCAB: &[&str] = &[
    "aspergillus",
    "nidulans",
    "homo",
    "sapiens",
    "mus",
    "musculus",
    "coli",
    "escherichia",
    "var",
    "rat",
    "human",
    "mouse",
    "sp",
    "strain",
    "k12",
];

/// A random index of 1..=max_docs entries with distinct ascending ids plus a
/// query, both drawn from a small vocabulary so that terms collide often.
pub fn random_instance(rng: &mut ChaCha8Rng, max_docs: usize) -> (Vec<ConceptEntry>, Vec<String>) {
    let n = rng.gen_range(1..=max_docs);
    let vocab = rng.gen_range(2..=VOCAB.len());
    let mut id = 0u32;
    let entries = (0..n)
        .map(|_| {
            id += rng.gen_range(1..50);
            let len = rng.gen_range(1..=8);
            let words: Vec<&str> = (0..len).map(|_| VOCAB[rng.gen_range(0..vocab)]).collect();
            ConceptEntry::new(tax(id), words.join(" "))
        })
        .collect();
    let qlen = rng.gen_range(1..=4);
    // one slot in ten is a term no document uses
    let query = (0..qlen)
        .map(|_| {
            if rng.gen_ratio(1, 10) {
                "zzz".to_string()
            } else {
                VOCAB[rng.gen_range(0..vocab)].to_string()
            }
        })
        .collect();
    (entries, query)
}

pub fn random_params(rng: &mut ChaCha8Rng) -> Bm25Params {
    if rng.gen_bool(0.5) {
        Bm25Params::default()
    } else {
        Bm25Params {
            k1: rng.gen_range(0.0..3.0),
            k2: rng.gen_range(0.0..200.0),
            b: rng.gen_range(0.0..=1.0),
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `Err` describing the first disagreement between two ranked lists.
pub fn compare_ranked(got: &[Candidate], want: &[Candidate], tol: f64) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!("{} candidates, expected {}", got.len(), want.len()));
    }
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        if g.tax_id != w.tax_id {
            return Err(format!("position {i}: tax_id {} expected {}", g.tax_id, w.tax_id));
        }
        if (g.score - w.score).abs() > tol {
            return Err(format!("position {i}: score {} expected {}", g.score, w.score));
        }
    }
    Ok(())
}
