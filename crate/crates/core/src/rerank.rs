//! Scoring of candidate pairs and per-query argmax selection.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pairs::{PairError, ScoreRecord, ScoredPair};
use crate::taxon::TaxId;

/// Upper bound on pairs handed to a scorer in one call. A query group is
/// never split, so a batch can exceed this when one group alone does.
pub const DEFAULT_BATCH_SIZE: usize = 256;

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("no score for ({query_id}, {candidate_id})")]
    MissingScore { query_id: String, candidate_id: TaxId },
    #[error("scorer returned {got} scores for {expected} pairs")]
    WrongLength { expected: usize, got: usize },
    #[error("score {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error(transparent)]
    Pairs(#[from] PairError),
}

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("scorer `{scorer}` failed on batch {batch} (first query {first_query})")]
    Scorer {
        scorer: String,
        batch: usize,
        first_query: String,
        #[source]
        source: ScorerError,
    },
    #[error("query {0} has no candidates")]
    NoCandidates(String),
    #[error("pair ({query_id}, {candidate_id}) has not been scored")]
    Unscored { query_id: String, candidate_id: TaxId },
    #[error("I/O error")]
    Io(#[from] std::io::Error),
    #[error("predictions line {line}: {reason}")]
    Format { line: usize, reason: String },
}

/// Assigns a score in `[0, 1]` to every pair of a batch, in input order.
pub trait Scorer {
    fn name(&self) -> &str;

    fn score_batch(&self, batch: &[ScoredPair]) -> Result<Vec<f64>, ScorerError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    Passthrough,
    OracleStub,
    External,
}

impl std::str::FromStr for ScorerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "passthrough" => Ok(Self::Passthrough),
            "oracle-stub" => Ok(Self::OracleStub),
            "external" => Ok(Self::External),
            other => Err(format!("unknown scorer `{other}`")),
        }
    }
}

impl std::fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Passthrough => "passthrough",
            Self::OracleStub => "oracle-stub",
            Self::External => "external",
        })
    }
}

/// BM25 scores min-max scaled to `[0, 1]` within each query. A query whose
/// candidates all share one BM25 score gets 1.0 everywhere.
#[derive(Debug, Default, Clone, Copy)]
pub struct PassthroughScorer;

impl Scorer for PassthroughScorer {
    fn name(&self) -> &str {
        "passthrough"
    }

    fn score_batch(&self, batch: &[ScoredPair]) -> Result<Vec<f64>, ScorerError> {
        let mut range: HashMap<&str, (f64, f64)> = HashMap::new();
        for p in batch {
            let r = range.entry(&p.query_id).or_insert((p.bm25_score, p.bm25_score));
            r.0 = r.0.min(p.bm25_score);
            r.1 = r.1.max(p.bm25_score);
        }
        Ok(batch
            .iter()
            .map(|p| {
                let (lo, hi) = range[p.query_id.as_str()];
                if hi > lo {
                    (p.bm25_score - lo) / (hi - lo)
                } else {
                    1.0
                }
            })
            .collect())
    }
}

/// Scores 1 for the gold candidate and 0 otherwise. Only meaningful on
/// labeled data.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleStubScorer;

impl Scorer for OracleStubScorer {
    fn name(&self) -> &str {
        "oracle-stub"
    }

    fn score_batch(&self, batch: &[ScoredPair]) -> Result<Vec<f64>, ScorerError> {
        Ok(batch.iter().map(|p| f64::from(p.label)).collect())
    }
}

/// Scores produced elsewhere and read back from a score file.
#[derive(Debug, Clone, Default)]
pub struct ExternalScorer {
    scores: HashMap<(String, TaxId), f64>,
}

impl ExternalScorer {
    pub fn from_records(records: &[ScoreRecord]) -> Result<Self, PairError> {
        let mut scores = HashMap::with_capacity(records.len());
        for r in records {
            if !(0.0..=1.0).contains(&r.score) {
                return Err(PairError::ScoreOutOfRange {
                    query_id: r.query_id.clone(),
                    candidate_id: r.candidate_id,
                    score: r.score,
                });
            }
            if scores.insert((r.query_id.clone(), r.candidate_id), r.score).is_some() {
                return Err(PairError::DuplicateScore {
                    query_id: r.query_id.clone(),
                    candidate_id: r.candidate_id,
                });
            }
        }
        Ok(Self { scores })
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, PairError> {
        Self::from_records(&crate::pairs::read_scores(reader)?)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl Scorer for ExternalScorer {
    fn name(&self) -> &str {
        "external"
    }

    fn score_batch(&self, batch: &[ScoredPair]) -> Result<Vec<f64>, ScorerError> {
        batch
            .iter()
            .map(|p| {
                self.scores
                    .get(&(p.query_id.clone(), p.cand_id))
                    .copied()
                    .ok_or_else(|| ScorerError::MissingScore {
                        query_id: p.query_id.clone(),
                        candidate_id: p.cand_id,
                    })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub tax_id: TaxId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub query_id: String,
    pub tax_id: TaxId,
    pub score: f64,
}

/// Picks the highest-scoring candidate of one query. Ties go to the better
/// BM25 rank, then to the smaller tax_id.
pub fn select(pairs: &[&ScoredPair]) -> Result<Selection, RerankError> {
    let mut best: Option<(&ScoredPair, f64)> = None;
    for &p in pairs {
        let score = p.score.ok_or_else(|| RerankError::Unscored {
            query_id: p.query_id.clone(),
            candidate_id: p.cand_id,
        })?;
        let better = match best {
            None => true,
            Some((b, bs)) => score > bs || (score == bs && (p.bm25_rank, p.cand_id) < (b.bm25_rank, b.cand_id)),
        };
        if better {
            best = Some((p, score));
        }
    }
    best.map(|(p, score)| Selection {
        tax_id: p.cand_id,
        score,
    })
    .ok_or_else(|| RerankError::NoCandidates(pairs.first().map(|p| p.query_id.clone()).unwrap_or_default()))
}

/// Groups pairs by query_id in first-appearance order.
pub fn group_by_query(pairs: &[ScoredPair]) -> Vec<(&str, Vec<&ScoredPair>)> {
    let mut order: Vec<(&str, Vec<&ScoredPair>)> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for p in pairs {
        let idx = *slot.entry(&p.query_id).or_insert_with(|| {
            order.push((&p.query_id, Vec::new()));
            order.len() - 1
        });
        order[idx].1.push(p);
    }
    order
}

/// Scores `pairs` with `scorer` in whole-query batches and returns a
/// score-annotated copy in input order.
pub fn score_pairs(
    pairs: &[ScoredPair],
    scorer: &dyn Scorer,
    batch_size: usize,
) -> Result<Vec<ScoredPair>, RerankError> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for (i, p) in pairs.iter().enumerate() {
        let g = *slot.entry(&p.query_id).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }

    let mut scores: Vec<Option<f64>> = vec![None; pairs.len()];
    let mut batches: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for group in groups {
        if !current.is_empty() && current.len() + group.len() > batch_size.max(1) {
            batches.push(std::mem::take(&mut current));
        }
        current.extend(group);
    }
    if !current.is_empty() {
        batches.push(current);
    }

    for (batch_no, members) in batches.iter().enumerate() {
        let batch: Vec<ScoredPair> = members
            .iter()
            .map(|&i| ScoredPair {
                score: None,
                ..pairs[i].clone()
            })
            .collect();
        let wrap = |source| RerankError::Scorer {
            scorer: scorer.name().to_string(),
            batch: batch_no,
            first_query: batch[0].query_id.clone(),
            source,
        };
        let out = scorer.score_batch(&batch).map_err(wrap)?;
        if out.len() != batch.len() {
            return Err(wrap(ScorerError::WrongLength {
                expected: batch.len(),
                got: out.len(),
            }));
        }
        if let Some(bad) = out.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(wrap(ScorerError::OutOfRange(*bad)));
        }
        for (&i, s) in members.iter().zip(out) {
            scores[i] = Some(s);
        }
    }

    Ok(pairs
        .iter()
        .zip(scores)
        .map(|(p, score)| ScoredPair { score, ..p.clone() })
        .collect())
}

/// Scores every pair and selects one candidate per query.
pub fn rerank_all(
    pairs: &[ScoredPair],
    scorer: &dyn Scorer,
    batch_size: usize,
) -> Result<Vec<Prediction>, RerankError> {
    let scored = score_pairs(pairs, scorer, batch_size)?;
    select_all(&scored)
}

/// Selects one candidate per query from already-scored pairs.
pub fn select_all(scored: &[ScoredPair]) -> Result<Vec<Prediction>, RerankError> {
    group_by_query(scored)
        .into_iter()
        .map(|(qid, group)| {
            let sel = select(&group)?;
            Ok(Prediction {
                query_id: qid.to_string(),
                tax_id: sel.tax_id,
                score: sel.score,
            })
        })
        .collect()
}

/// `query_id<TAB>predicted_tax_id<TAB>score` per line.
pub fn write_predictions<W: Write>(predictions: &[Prediction], mut out: W) -> std::io::Result<()> {
    for p in predictions {
        writeln!(out, "{}\t{}\t{}", p.query_id, p.tax_id, p.score)?;
    }
    out.flush()
}

pub fn read_predictions<R: BufRead>(reader: R) -> Result<Vec<Prediction>, RerankError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let err = |reason: &str| RerankError::Format {
            line: idx + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [qid, id, score] = fields[..] else {
            return Err(err("expected `query_id<TAB>predicted_tax_id<TAB>score`"));
        };
        out.push(Prediction {
            query_id: qid.to_string(),
            tax_id: id.parse().map_err(|_| err("bad tax_id"))?,
            score: score.parse().map_err(|_| err("bad score"))?,
        });
    }
    Ok(out)
}
