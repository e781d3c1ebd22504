//! Okapi BM25 over concept entries.
//!
//! For a document `D` and query `Q` the score is
//!
//! ```text
//! sum over unique t in Q of
//!     idf(t) * (k1 + 1) f(t,D) / (K + f(t,D)) * (k2 + 1) qf(t) / (k2 + qf(t))
//! K      = k1 * ((1 - b) + b * |D| / avgdl)
//! idf(t) = ln(1 + (N - n(t) + 0.5) / (n(t) + 0.5))
//! ```
//!
//! The smoothed idf is positive for every `n(t) <= N`, so any document that
//! shares a term with the query scores above zero.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxdump::ConceptEntry;
use crate::taxon::TaxId;

const MAGIC: &str = "taxlink-bm25 1";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot build an index from zero entries")]
    Empty,
    #[error("entry {0} has no tokens")]
    EmptyEntry(TaxId),
    #[error("duplicate entry {0}")]
    DuplicateEntry(TaxId),
    #[error("document ordinal {ordinal} out of range (index holds {len})")]
    OrdinalOutOfRange { ordinal: usize, len: usize },
    #[error("invalid BM25 parameters: {0}")]
    BadParams(String),
    #[error("I/O error")]
    Io(#[from] std::io::Error),
    #[error("index file line {line}: {reason}")]
    Format { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub k2: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: 1.2,
            k2: 100.0,
            b: 0.75,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), IndexError> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(IndexError::BadParams(format!("k1 = {} must be >= 0", self.k1)));
        }
        if !(self.k2 >= 0.0 && self.k2.is_finite()) {
            return Err(IndexError::BadParams(format!("k2 = {} must be >= 0", self.k2)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(IndexError::BadParams(format!("b = {} must be in [0, 1]", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    postings: HashMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    doc_ids: Vec<TaxId>,
    avg_doc_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub tax_id: TaxId,
    pub score: f64,
}

/// Ranked candidates for one query: scores non-increasing, ties by
/// ascending tax_id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub query: String,
    pub candidates: Vec<Candidate>,
}

impl CandidateList {
    pub fn contains(&self, tax_id: TaxId) -> bool {
        self.candidates.iter().any(|c| c.tax_id == tax_id)
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Orders candidates best-first.
pub fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then(a.tax_id.cmp(&b.tax_id))
}

/// Unique query terms with their frequencies, in first-appearance order.
pub fn query_term_counts(tokens: &[String]) -> Vec<(&str, u32)> {
    let mut counts: Vec<(&str, u32)> = Vec::new();
    for t in tokens {
        match counts.iter_mut().find(|(term, _)| *term == t.as_str()) {
            Some((_, c)) => *c += 1,
            None => counts.push((t.as_str(), 1)),
        }
    }
    counts
}

impl InvertedIndex {
    /// Document ordinals follow the order of `entries`.
    pub fn build(entries: &[ConceptEntry]) -> Result<Self, IndexError> {
        if entries.is_empty() {
            return Err(IndexError::Empty);
        }
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut doc_lengths = Vec::with_capacity(entries.len());
        let mut doc_ids = Vec::with_capacity(entries.len());
        let mut seen = std::collections::HashSet::with_capacity(entries.len());

        for (ordinal, entry) in entries.iter().enumerate() {
            if entry.tokens.is_empty() {
                return Err(IndexError::EmptyEntry(entry.tax_id));
            }
            if !seen.insert(entry.tax_id) {
                return Err(IndexError::DuplicateEntry(entry.tax_id));
            }
            for (term, tf) in query_term_counts(&entry.tokens) {
                postings.entry(term.to_string()).or_default().push(Posting {
                    doc: ordinal as u32,
                    tf,
                });
            }
            doc_lengths.push(entry.tokens.len() as u32);
            doc_ids.push(entry.tax_id);
        }
        Ok(Self::from_parts(postings, doc_lengths, doc_ids))
    }

    fn from_parts(postings: HashMap<String, Vec<Posting>>, doc_lengths: Vec<u32>, doc_ids: Vec<TaxId>) -> Self {
        let total: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let avg_doc_length = total as f64 / doc_lengths.len() as f64;
        Self {
            postings,
            doc_lengths,
            doc_ids,
            avg_doc_length,
        }
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn doc_ids(&self) -> &[TaxId] {
        &self.doc_ids
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    /// `ln(1 + (N - n + 0.5) / (n + 0.5))`
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.postings(term).len() as f64;
        let big_n = self.num_docs() as f64;
        (1.0 + (big_n - n + 0.5) / (n + 0.5)).ln()
    }

    fn term_weight(&self, params: &Bm25Params, idf: f64, tf: u32, doc_len: u32, qf: u32) -> f64 {
        let f = f64::from(tf);
        let qf = f64::from(qf);
        let k = params.k1 * ((1.0 - params.b) + params.b * f64::from(doc_len) / self.avg_doc_length);
        idf * ((params.k1 + 1.0) * f) / (k + f) * ((params.k2 + 1.0) * qf) / (params.k2 + qf)
    }

    pub fn score(&self, params: &Bm25Params, query_tokens: &[String], ordinal: usize) -> Result<f64, IndexError> {
        if ordinal >= self.num_docs() {
            return Err(IndexError::OrdinalOutOfRange {
                ordinal,
                len: self.num_docs(),
            });
        }
        let doc_len = self.doc_lengths[ordinal];
        let mut total = 0.0;
        for (term, qf) in query_term_counts(query_tokens) {
            let postings = self.postings(term);
            // postings are sorted by ordinal
            if let Ok(pos) = postings.binary_search_by_key(&(ordinal as u32), |p| p.doc) {
                total += self.term_weight(params, self.idf(term), postings[pos].tf, doc_len, qf);
            }
        }
        Ok(total)
    }

    /// The `k` best documents with a positive score.
    pub fn top_k(&self, params: &Bm25Params, query_tokens: &[String], k: usize) -> CandidateList {
        let query = query_tokens.join(" ");
        if k == 0 {
            return CandidateList {
                query,
                candidates: Vec::new(),
            };
        }
        let mut scores = vec![0.0f64; self.num_docs()];
        let mut touched: Vec<u32> = Vec::new();
        for (term, qf) in query_term_counts(query_tokens) {
            let postings = self.postings(term);
            if postings.is_empty() {
                continue;
            }
            let idf = self.idf(term);
            for p in postings {
                let slot = &mut scores[p.doc as usize];
                if *slot == 0.0 {
                    touched.push(p.doc);
                }
                *slot += self.term_weight(params, idf, p.tf, self.doc_lengths[p.doc as usize], qf);
            }
        }

        let mut candidates: Vec<Candidate> = touched
            .into_iter()
            .map(|d| Candidate {
                tax_id: self.doc_ids[d as usize],
                score: scores[d as usize],
            })
            .filter(|c| c.score > 0.0)
            .collect();
        if candidates.len() > k {
            candidates.select_nth_unstable_by(k - 1, rank_order);
            candidates.truncate(k);
        }
        candidates.sort_unstable_by(rank_order);
        CandidateList { query, candidates }
    }

    /// Line-oriented persistence: a header, one `tax_id<TAB>length` line per
    /// document, then one `term<TAB>ord:tf ord:tf ...` line per term sorted
    /// by term.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "docs\t{}", self.num_docs())?;
        for (id, len) in self.doc_ids.iter().zip(&self.doc_lengths) {
            writeln!(out, "{id}\t{len}")?;
        }
        let mut terms: Vec<&String> = self.postings.keys().collect();
        terms.sort();
        writeln!(out, "terms\t{}", terms.len())?;
        for term in terms {
            write!(out, "{term}\t")?;
            for (i, p) in self.postings[term].iter().enumerate() {
                if i > 0 {
                    out.write_all(b" ")?;
                }
                write!(out, "{}:{}", p.doc, p.tf)?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self, IndexError> {
        let mut lines = reader.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String), IndexError> {
            match lines.next() {
                Some((i, line)) => Ok((i + 1, line?)),
                None => Err(IndexError::Format {
                    line: 0,
                    reason: format!("unexpected end of file, expected {what}"),
                }),
            }
        };
        let fmt_err = |line: usize, reason: &str| IndexError::Format {
            line,
            reason: reason.to_string(),
        };
        let count = |line: usize, text: &str, key: &str| -> Result<usize, IndexError> {
            text.strip_prefix(key)
                .and_then(|s| s.strip_prefix('\t'))
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| fmt_err(line, &format!("expected `{key}<TAB>count`")))
        };

        let (line, header) = next("header")?;
        if header != MAGIC {
            return Err(fmt_err(line, "not a taxlink BM25 index"));
        }
        let (line, text) = next("document count")?;
        let n_docs = count(line, &text, "docs")?;
        if n_docs == 0 {
            return Err(IndexError::Empty);
        }
        let mut doc_ids = Vec::with_capacity(n_docs);
        let mut doc_lengths = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            let (line, text) = next("document line")?;
            let (id, len) = text
                .split_once('\t')
                .ok_or_else(|| fmt_err(line, "expected `tax_id<TAB>length`"))?;
            doc_ids.push(id.parse::<TaxId>().map_err(|_| fmt_err(line, "bad tax_id"))?);
            let len: u32 = len.parse().map_err(|_| fmt_err(line, "bad length"))?;
            if len == 0 {
                return Err(fmt_err(line, "zero-length document"));
            }
            doc_lengths.push(len);
        }

        let (line, text) = next("term count")?;
        let n_terms = count(line, &text, "terms")?;
        let mut postings = HashMap::with_capacity(n_terms);
        let mut tf_sums = vec![0u64; n_docs];
        for _ in 0..n_terms {
            let (line, text) = next("posting line")?;
            let (term, list) = text
                .split_once('\t')
                .ok_or_else(|| fmt_err(line, "expected `term<TAB>postings`"))?;
            let mut plist = Vec::new();
            for item in list.split(' ') {
                let (doc, tf) = item.split_once(':').ok_or_else(|| fmt_err(line, "expected `ord:tf`"))?;
                let doc: u32 = doc.parse().map_err(|_| fmt_err(line, "bad ordinal"))?;
                let tf: u32 = tf.parse().map_err(|_| fmt_err(line, "bad term frequency"))?;
                if doc as usize >= n_docs || tf == 0 {
                    return Err(fmt_err(line, "posting out of range"));
                }
                if plist.last().is_some_and(|p: &Posting| p.doc >= doc) {
                    return Err(fmt_err(line, "postings must be strictly ascending"));
                }
                tf_sums[doc as usize] += u64::from(tf);
                plist.push(Posting { doc, tf });
            }
            if postings.insert(term.to_string(), plist).is_some() {
                return Err(fmt_err(line, "duplicate term"));
            }
        }
        if let Some((line, _)) = lines.next() {
            return Err(fmt_err(line + 1, "trailing data"));
        }
        if tf_sums.iter().zip(&doc_lengths).any(|(s, &l)| *s != u64::from(l)) {
            return Err(fmt_err(0, "postings disagree with document lengths"));
        }
        Ok(Self::from_parts(postings, doc_lengths, doc_ids))
    }
}
