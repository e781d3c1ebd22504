//! Species mention normalization against the NCBI taxonomy.
//!
//! Mentions are normalized, matched against per-rank dictionaries built from
//! the taxonomy dump with Okapi BM25, and the retrieved candidates are
//! rescored pairwise; the best-scoring candidate per mention wins.
//!
//! The stages live in separate modules:
//!
//! * [`normalize`]: text canonicalization and tokenization
//! * [`taxdump`]: `names.dmp` / `nodes.dmp` parsing and dictionaries
//! * [`corpus`]: annotation loading, document splits, deduplication
//! * [`bm25`]: inverted index and top-k retrieval
//! * [`pairs`]: query/candidate pairs and the JSONL exchange format
//! * [`rerank`]: scorers and argmax selection
//! * [`eval`]: filtered accuracy, recall@k and reports
//! * [`pipeline`]: work-directory orchestration and run manifests

pub mod bm25;
pub mod corpus;
pub mod eval;
pub mod normalize;
pub mod pairs;
pub mod pipeline;
pub mod rerank;
pub mod taxdump;
pub mod taxon;

pub use bm25::{Bm25Params, Candidate, CandidateList, InvertedIndex};
pub use corpus::{CorpusSplit, MentionAnnotation, SplitRatios, Subset, UniqueMention};
pub use eval::{EvalReport, Outcome};
pub use normalize::{AcronymMap, NonAsciiMode, Normalizer};
pub use pairs::{QueryCandidates, ScoredPair};
pub use pipeline::{PipelineConfig, RunManifest};
pub use rerank::{Prediction, Scorer, ScorerKind};
pub use taxdump::{ConceptEntry, DictionarySet, RankDictionary};
pub use taxon::{NameClass, Rank, TaxId};
