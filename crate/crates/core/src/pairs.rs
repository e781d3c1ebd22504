//! Query/candidate sentence pairs and the JSONL exchange format used to hand
//! them to an external scorer.
//!
//! Pair files carry one JSON object per line with keys `query_id`, `query`,
//! `candidate_id`, `candidate` and, in labeled mode, `label`. Score files
//! carry `query_id`, `candidate_id` and `score`.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bm25::{Bm25Params, Candidate, InvertedIndex};
use crate::corpus::UniqueMention;
use crate::normalize::tokenize;
use crate::taxdump::DictionarySet;
use crate::taxon::TaxId;

#[derive(Debug, Error)]
pub enum PairError {
    #[error("I/O error")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("candidate {0} is retrievable but missing from the dictionaries")]
    UnknownCandidate(TaxId),
    #[error("score {score} for ({query_id}, {candidate_id}) is outside [0, 1]")]
    ScoreOutOfRange {
        query_id: String,
        candidate_id: TaxId,
        score: f64,
    },
    #[error("score for ({query_id}, {candidate_id}) does not match any exported pair")]
    UnmatchedScore { query_id: String, candidate_id: TaxId },
    #[error("duplicate score for ({query_id}, {candidate_id})")]
    DuplicateScore { query_id: String, candidate_id: TaxId },
    #[error("no score for ({query_id}, {candidate_id})")]
    MissingScore { query_id: String, candidate_id: TaxId },
}

/// Stable identifier for a unique mention: the first 16 hex digits of
/// SHA-256 over `surface<TAB>gold_id`.
pub fn query_id(surface: &str, gold: TaxId) -> String {
    let mut hasher = Sha256::new();
    hasher.update(surface.as_bytes());
    hasher.update(b"\t");
    hasher.update(gold.to_string().as_bytes());
    hex::encode(&hasher.finalize()[..8])
}

/// Generator output for one unique mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryCandidates {
    pub query_id: String,
    pub query: String,
    pub gold_id: TaxId,
    pub candidates: Vec<Candidate>,
}

impl QueryCandidates {
    /// At least one retrieved candidate is the gold identifier.
    pub fn is_generatable(&self) -> bool {
        self.candidates.iter().any(|c| c.tax_id == self.gold_id)
    }
}

pub fn generate_candidates(
    mentions: &[UniqueMention],
    index: &InvertedIndex,
    params: &Bm25Params,
    k: usize,
) -> Vec<QueryCandidates> {
    mentions
        .iter()
        .map(|m| QueryCandidates {
            query_id: query_id(&m.surface, m.gold_tax_id),
            query: m.surface.clone(),
            gold_id: m.gold_tax_id,
            candidates: index.top_k(params, &tokenize(&m.surface), k).candidates,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub query_id: String,
    pub query_text: String,
    pub query_gold_id: TaxId,
    pub cand_id: TaxId,
    pub cand_text: String,
    pub label: u8,
    /// 1-based position in the BM25 list.
    pub bm25_rank: usize,
    pub bm25_score: f64,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UngeneratableReason {
    /// BM25 returned nothing.
    NoCandidates,
    /// The gold taxon is in none of the configured dictionaries.
    GoldNotInDictionary,
    /// Candidates exist but none is the gold taxon.
    GoldNotRetrieved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UngeneratableQuery {
    pub query_id: String,
    pub query: String,
    pub gold_id: TaxId,
    pub reason: UngeneratableReason,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairSet {
    pub pairs: Vec<ScoredPair>,
    pub ungeneratable: Vec<UngeneratableQuery>,
}

pub fn pairs_from_candidates(queries: &[QueryCandidates], dictionaries: &DictionarySet) -> Result<PairSet, PairError> {
    let mut set = PairSet::default();
    for q in queries {
        let reason = if q.candidates.is_empty() {
            Some(UngeneratableReason::NoCandidates)
        } else if !dictionaries.contains(q.gold_id) {
            Some(UngeneratableReason::GoldNotInDictionary)
        } else if !q.is_generatable() {
            Some(UngeneratableReason::GoldNotRetrieved)
        } else {
            None
        };
        if let Some(reason) = reason {
            log::info!("ungeneratable query {:?} (gold {}): {:?}", q.query, q.gold_id, reason);
            set.ungeneratable.push(UngeneratableQuery {
                query_id: q.query_id.clone(),
                query: q.query.clone(),
                gold_id: q.gold_id,
                reason,
            });
        }
        for (i, c) in q.candidates.iter().enumerate() {
            let concept = dictionaries
                .concept(c.tax_id)
                .ok_or(PairError::UnknownCandidate(c.tax_id))?;
            set.pairs.push(ScoredPair {
                query_id: q.query_id.clone(),
                query_text: q.query.clone(),
                query_gold_id: q.gold_id,
                cand_id: c.tax_id,
                cand_text: concept.concept_text.clone(),
                label: u8::from(c.tax_id == q.gold_id),
                bm25_rank: i + 1,
                bm25_score: c.score,
                score: None,
            });
        }
    }
    Ok(set)
}

/// Retrieves `k` candidates per mention and turns them into labeled pairs.
pub fn make_pairs(
    mentions: &[UniqueMention],
    dictionaries: &DictionarySet,
    index: &InvertedIndex,
    params: &Bm25Params,
    k: usize,
) -> Result<PairSet, PairError> {
    pairs_from_candidates(&generate_candidates(mentions, index, params, k), dictionaries)
}

/// One line of a pair file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub query_id: String,
    pub query: String,
    pub candidate_id: TaxId,
    pub candidate: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

/// One line of a score file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRecord {
    pub query_id: String,
    pub candidate_id: TaxId,
    pub score: f64,
}

impl From<(&ScoredPair, bool)> for PairRecord {
    fn from((p, labeled): (&ScoredPair, bool)) -> Self {
        PairRecord {
            query_id: p.query_id.clone(),
            query: p.query_text.clone(),
            candidate_id: p.cand_id,
            candidate: p.cand_text.clone(),
            label: labeled.then_some(p.label),
        }
    }
}

fn write_jsonl<W: Write, T: Serialize>(mut out: W, items: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl<R: BufRead, T: for<'de> Deserialize<'de>>(reader: R) -> Result<Vec<T>, PairError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| PairError::Json { line: idx + 1, source })?);
    }
    Ok(out)
}

pub fn export_pairs<W: Write>(pairs: &[ScoredPair], out: W, labeled: bool) -> std::io::Result<()> {
    write_jsonl(out, pairs.iter().map(|p| PairRecord::from((p, labeled))))
}

pub fn read_pair_records<R: BufRead>(reader: R) -> Result<Vec<PairRecord>, PairError> {
    read_jsonl(reader)
}

pub fn write_scores<W: Write>(scores: &[ScoreRecord], out: W) -> std::io::Result<()> {
    write_jsonl(out, scores)
}

pub fn read_scores<R: BufRead>(reader: R) -> Result<Vec<ScoreRecord>, PairError> {
    read_jsonl(reader)
}

/// Attaches scores to `pairs`. Every pair needs exactly one score and every
/// score must belong to a pair.
pub fn attach_scores(pairs: &mut [ScoredPair], scores: &[ScoreRecord]) -> Result<(), PairError> {
    let mut by_key: HashMap<(&str, TaxId), f64> = HashMap::with_capacity(scores.len());
    for s in scores {
        if !(0.0..=1.0).contains(&s.score) {
            return Err(PairError::ScoreOutOfRange {
                query_id: s.query_id.clone(),
                candidate_id: s.candidate_id,
                score: s.score,
            });
        }
        if by_key.insert((s.query_id.as_str(), s.candidate_id), s.score).is_some() {
            return Err(PairError::DuplicateScore {
                query_id: s.query_id.clone(),
                candidate_id: s.candidate_id,
            });
        }
    }
    let known: HashSet<(&str, TaxId)> = pairs.iter().map(|p| (p.query_id.as_str(), p.cand_id)).collect();
    if let Some(s) = scores
        .iter()
        .find(|s| !known.contains(&(s.query_id.as_str(), s.candidate_id)))
    {
        return Err(PairError::UnmatchedScore {
            query_id: s.query_id.clone(),
            candidate_id: s.candidate_id,
        });
    }
    let mut resolved = Vec::with_capacity(pairs.len());
    for p in pairs.iter() {
        let score = by_key
            .get(&(p.query_id.as_str(), p.cand_id))
            .copied()
            .ok_or_else(|| PairError::MissingScore {
                query_id: p.query_id.clone(),
                candidate_id: p.cand_id,
            })?;
        resolved.push(score);
    }
    for (p, s) in pairs.iter_mut().zip(resolved) {
        p.score = Some(s);
    }
    Ok(())
}

pub fn import_scores<R: BufRead>(pairs: &mut [ScoredPair], source: R) -> Result<(), PairError> {
    let scores = read_scores(source)?;
    attach_scores(pairs, &scores)
}
