//! Filtered top-1 accuracy, generator recall and per-mention reports.
//!
//! Accuracy only counts mentions for which the generator retrieved the gold
//! identifier somewhere in its top `k`; the others are listed as
//! ungeneratable and excluded from the denominator.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::tokenize;
use crate::pairs::QueryCandidates;
use crate::rerank::Prediction;
use crate::taxdump::DictionarySet;
use crate::taxon::TaxId;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction for unknown query {0}")]
    UnknownQuery(String),
    #[error("more than one prediction for query {0}")]
    DuplicatePrediction(String),
    #[error("generatable query {0} has no prediction")]
    MissingPrediction(String),
    #[error("system `{system}` has {runs} run(s); at least 2 are needed")]
    TooFewRuns { system: String, runs: usize },
    #[error("reports cover different corpora: `{0}` and `{1}`")]
    CorpusMismatch(String, String),
    #[error("no reports to compare")]
    NoReports,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Correct,
    Wrong,
    Ungeneratable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionOutcome {
    pub query_id: String,
    pub query: String,
    pub gold_id: TaxId,
    pub predicted_id: Option<TaxId>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub corpus: String,
    pub system: String,
    pub k: usize,
    pub total_mentions: usize,
    pub generatable_mentions: usize,
    pub correct_at_1: usize,
    /// `correct_at_1 / generatable_mentions`, 0 when nothing is generatable.
    pub accuracy: f64,
    /// `generatable_mentions / total_mentions`, 0 for an empty test set.
    pub recall_at_k: f64,
    pub per_mention: Vec<MentionOutcome>,
}

/// Labels a report so runs can be grouped later.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunLabel {
    pub corpus: String,
    pub system: String,
    pub k: usize,
}

pub fn evaluate(
    predictions: &[Prediction],
    queries: &[QueryCandidates],
    label: &RunLabel,
) -> Result<EvalReport, EvalError> {
    let known: BTreeSet<&str> = queries.iter().map(|q| q.query_id.as_str()).collect();
    let mut predicted: HashMap<&str, TaxId> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if !known.contains(p.query_id.as_str()) {
            return Err(EvalError::UnknownQuery(p.query_id.clone()));
        }
        if predicted.insert(&p.query_id, p.tax_id).is_some() {
            return Err(EvalError::DuplicatePrediction(p.query_id.clone()));
        }
    }

    let mut per_mention = Vec::with_capacity(queries.len());
    let (mut generatable, mut correct) = (0, 0);
    for q in queries {
        let predicted_id = predicted.get(q.query_id.as_str()).copied();
        let outcome = if !q.is_generatable() {
            Outcome::Ungeneratable
        } else {
            generatable += 1;
            match predicted_id {
                None => return Err(EvalError::MissingPrediction(q.query_id.clone())),
                Some(id) if id == q.gold_id => {
                    correct += 1;
                    Outcome::Correct
                }
                Some(_) => Outcome::Wrong,
            }
        };
        per_mention.push(MentionOutcome {
            query_id: q.query_id.clone(),
            query: q.query.clone(),
            gold_id: q.gold_id,
            predicted_id,
            outcome,
        });
    }

    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(EvalReport {
        corpus: label.corpus.clone(),
        system: label.system.clone(),
        k: label.k,
        total_mentions: queries.len(),
        generatable_mentions: generatable,
        correct_at_1: correct,
        accuracy: ratio(correct, generatable),
        recall_at_k: ratio(generatable, queries.len()),
        per_mention,
    })
}

/// A wrong prediction whose concept shares at least one token with the query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexicalMismatch {
    pub query: String,
    pub gold_id: TaxId,
    pub predicted_id: TaxId,
    pub predicted_concept: String,
    pub shared_tokens: Vec<String>,
}

pub fn lexical_mismatches(report: &EvalReport, dictionaries: &DictionarySet) -> Vec<LexicalMismatch> {
    report
        .per_mention
        .iter()
        .filter(|m| m.outcome == Outcome::Wrong)
        .filter_map(|m| {
            let predicted_id = m.predicted_id?;
            let concept = dictionaries.concept(predicted_id)?;
            let query_tokens: BTreeSet<String> = tokenize(&m.query).into_iter().collect();
            let concept_tokens: BTreeSet<&String> = concept.tokens.iter().collect();
            let shared: Vec<String> = query_tokens
                .into_iter()
                .filter(|t| concept_tokens.contains(t))
                .collect();
            (!shared.is_empty()).then(|| LexicalMismatch {
                query: m.query.clone(),
                gold_id: m.gold_id,
                predicted_id,
                predicted_concept: concept.concept_text.clone(),
                shared_tokens: shared,
            })
        })
        .collect()
}

pub fn render_text(report: &EvalReport, mismatches: &[LexicalMismatch]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "corpus      {}", report.corpus);
    let _ = writeln!(s, "system      {}", report.system);
    let _ = writeln!(s, "k           {}", report.k);
    let _ = writeln!(s, "mentions    {}", report.total_mentions);
    let _ = writeln!(s, "generatable {}", report.generatable_mentions);
    let _ = writeln!(s, "correct@1   {}", report.correct_at_1);
    let _ = writeln!(s, "accuracy    {:.4}", report.accuracy);
    let _ = writeln!(s, "recall@{:<4} {:.4}", report.k, report.recall_at_k);
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<16}  {:<13}  {:>10}  {:>10}  query",
        "query_id", "outcome", "gold", "predicted"
    );
    for m in &report.per_mention {
        let outcome = match m.outcome {
            Outcome::Correct => "correct",
            Outcome::Wrong => "wrong",
            Outcome::Ungeneratable => "ungeneratable",
        };
        let predicted = m.predicted_id.map(|p| p.to_string()).unwrap_or_else(|| "-".to_string());
        let _ = writeln!(
            s,
            "{:<16}  {:<13}  {:>10}  {:>10}  {}",
            m.query_id, outcome, m.gold_id, predicted, m.query
        );
    }
    if !mismatches.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "lexical mismatches (wrong candidate shares tokens with the query)");
        let _ = writeln!(
            s,
            "{:<24}  {:>10}  {:>10}  shared  predicted concept",
            "query", "gold", "predicted"
        );
        for m in mismatches {
            let _ = writeln!(
                s,
                "{:<24}  {:>10}  {:>10}  {}  {}",
                m.query,
                m.gold_id,
                m.predicted_id,
                m.shared_tokens.join(","),
                m.predicted_concept
            );
        }
    }
    s
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ReportLine<'a> {
    Summary {
        corpus: &'a str,
        system: &'a str,
        k: usize,
        total_mentions: usize,
        generatable_mentions: usize,
        correct_at_1: usize,
        accuracy: f64,
        recall_at_k: f64,
    },
    Mention(&'a MentionOutcome),
    Mismatch(&'a LexicalMismatch),
}

/// One `summary` line followed by one `mention` line per query and one
/// `mismatch` line per lexical mismatch.
pub fn write_jsonl<W: Write>(report: &EvalReport, mismatches: &[LexicalMismatch], mut out: W) -> std::io::Result<()> {
    let summary = ReportLine::Summary {
        corpus: &report.corpus,
        system: &report.system,
        k: report.k,
        total_mentions: report.total_mentions,
        generatable_mentions: report.generatable_mentions,
        correct_at_1: report.correct_at_1,
        accuracy: report.accuracy,
        recall_at_k: report.recall_at_k,
    };
    let lines = std::iter::once(summary)
        .chain(report.per_mention.iter().map(ReportLine::Mention))
        .chain(mismatches.iter().map(ReportLine::Mismatch));
    for line in lines {
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub system: String,
    pub corpus: String,
    pub runs: usize,
    pub mean_accuracy: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd_accuracy: f64,
}

/// Mean and sample standard deviation of accuracy per system, in order of
/// first appearance.
pub fn compare_runs(reports: &[EvalReport]) -> Result<Vec<RunSummary>, EvalError> {
    let first = reports.first().ok_or(EvalError::NoReports)?;
    if let Some(other) = reports.iter().find(|r| r.corpus != first.corpus) {
        return Err(EvalError::CorpusMismatch(first.corpus.clone(), other.corpus.clone()));
    }
    let mut systems: Vec<(&str, Vec<f64>)> = Vec::new();
    for r in reports {
        match systems.iter_mut().find(|(s, _)| *s == r.system) {
            Some((_, acc)) => acc.push(r.accuracy),
            None => systems.push((&r.system, vec![r.accuracy])),
        }
    }
    systems
        .into_iter()
        .map(|(system, acc)| {
            if acc.len() < 2 {
                return Err(EvalError::TooFewRuns {
                    system: system.to_string(),
                    runs: acc.len(),
                });
            }
            let n = acc.len() as f64;
            let mean = acc.iter().sum::<f64>() / n;
            let var = acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Ok(RunSummary {
                system: system.to_string(),
                corpus: first.corpus.clone(),
                runs: acc.len(),
                mean_accuracy: mean,
                sd_accuracy: var.sqrt(),
            })
        })
        .collect()
}
