//! Gold-annotated species corpora: loading, document splits and mention
//! deduplication.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::Normalizer;
use crate::taxon::TaxId;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error")]
    Io(#[from] std::io::Error),
    #[error("row {row}: {reason}")]
    Parse { row: usize, reason: String },
    #[error("duplicate document id `{0}`")]
    DuplicateDocument(String),
    #[error("no documents to split")]
    NoDocuments,
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    BadRatios((f64, f64, f64)),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionAnnotation {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub gold_tax_id: TaxId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnnotationFormat {
    /// `doc_id<TAB>start<TAB>end<TAB>surface<TAB>tax_id`
    StandoffTsv,
    /// A brat `.ann` file for a single document; the identifier comes from a
    /// normalization (`N`) or annotator-note (`#`) line attached to the entity.
    BratAnn { doc_id: String },
}

fn parse_err(row: usize, reason: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        row,
        reason: reason.into(),
    }
}

pub fn load_annotations<R: BufRead>(
    reader: R,
    format: &AnnotationFormat,
) -> Result<Vec<MentionAnnotation>, CorpusError> {
    match format {
        AnnotationFormat::StandoffTsv => load_standoff_tsv(reader),
        AnnotationFormat::BratAnn { doc_id } => load_brat(reader, doc_id),
    }
}

fn parse_offsets(row: usize, start: &str, end: &str) -> Result<(usize, usize), CorpusError> {
    let start: usize = start
        .parse()
        .map_err(|_| parse_err(row, format!("start offset `{start}` is not a number")))?;
    let end: usize = end
        .parse()
        .map_err(|_| parse_err(row, format!("end offset `{end}` is not a number")))?;
    if end <= start {
        return Err(parse_err(row, format!("end {end} is not after start {start}")));
    }
    Ok((start, end))
}

fn load_standoff_tsv<R: BufRead>(reader: R) -> Result<Vec<MentionAnnotation>, CorpusError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let row = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(parse_err(row, format!("expected 5 fields, found {}", fields.len())));
        }
        let (start, end) = parse_offsets(row, fields[1], fields[2])?;
        if fields[0].is_empty() {
            return Err(parse_err(row, "empty document id"));
        }
        if fields[3].is_empty() {
            return Err(parse_err(row, "empty surface form"));
        }
        let gold_tax_id = fields[4]
            .parse()
            .map_err(|_| parse_err(row, format!("tax_id `{}` is not a positive integer", fields[4])))?;
        out.push(MentionAnnotation {
            doc_id: fields[0].to_string(),
            start,
            end,
            surface: fields[3].to_string(),
            gold_tax_id,
        });
    }
    Ok(out)
}

/// Pulls the trailing integer out of references such as `Taxonomy:9606`,
/// `NCBITaxon:9606` or `species:ncbi:9606`.
fn trailing_tax_id(reference: &str) -> Option<&str> {
    let tail = reference.rsplit(':').next()?.trim();
    (!tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit())).then_some(tail)
}

fn load_brat<R: BufRead>(reader: R, doc_id: &str) -> Result<Vec<MentionAnnotation>, CorpusError> {
    struct Entity {
        row: usize,
        start: usize,
        end: usize,
        surface: String,
    }
    let mut order: Vec<String> = Vec::new();
    let mut entities: HashMap<String, Entity> = HashMap::new();
    let mut ids: HashMap<String, (usize, String)> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let row = idx + 1;
        let mut parts = line.splitn(3, '\t');
        let (Some(key), Some(middle)) = (parts.next(), parts.next()) else {
            continue;
        };
        let rest = parts.next();
        if key.starts_with('T') {
            // `T1<TAB>Species 10 22[;30 35]<TAB>text`
            let mut tokens = middle.split(' ');
            tokens.next();
            let span = tokens.collect::<Vec<_>>().join(" ");
            let fragments: Vec<(&str, &str)> = span
                .split(';')
                .map(|frag| frag.split_once(' ').unwrap_or((frag, "")))
                .collect();
            let first = fragments.first().ok_or_else(|| parse_err(row, "missing span"))?;
            let last = fragments.last().ok_or_else(|| parse_err(row, "missing span"))?;
            let (start, end) = parse_offsets(row, first.0, last.1)?;
            let surface = rest.unwrap_or("").to_string();
            if surface.is_empty() {
                return Err(parse_err(row, "empty surface form"));
            }
            order.push(key.to_string());
            entities.insert(
                key.to_string(),
                Entity {
                    row,
                    start,
                    end,
                    surface,
                },
            );
        } else if key.starts_with('N') || key.starts_with('#') {
            // `N1<TAB>Reference T1 Taxonomy:9606[<TAB>text]`
            // `#1<TAB>AnnotatorNotes T1<TAB>species:ncbi:9606`
            let mut tokens = middle.split(' ');
            tokens.next();
            let Some(target) = tokens.next() else { continue };
            let reference = if key.starts_with('N') {
                tokens.next().unwrap_or("")
            } else {
                rest.unwrap_or("")
            };
            let Some(id) = trailing_tax_id(reference) else {
                if key.starts_with('N') {
                    return Err(parse_err(row, format!("reference `{reference}` has no numeric id")));
                }
                continue;
            };
            ids.entry(target.to_string()).or_insert((row, id.to_string()));
        }
    }

    let mut out = Vec::new();
    for key in order {
        let entity = &entities[&key];
        let Some((row, id)) = ids.get(&key) else {
            log::debug!("{doc_id}: entity {key} (row {}) has no identifier; skipped", entity.row);
            continue;
        };
        let gold_tax_id = id
            .parse()
            .map_err(|_| parse_err(*row, format!("tax_id `{id}` is not a positive integer")))?;
        out.push(MentionAnnotation {
            doc_id: doc_id.to_string(),
            start: entity.start,
            end: entity.end,
            surface: entity.surface.clone(),
            gold_tax_id,
        });
    }
    Ok(out)
}

/// Document ids in order of first appearance.
pub fn document_ids(mentions: &[MentionAnnotation]) -> Vec<String> {
    let mut seen = HashSet::new();
    mentions
        .iter()
        .filter(|m| seen.insert(m.doc_id.as_str()))
        .map(|m| m.doc_id.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Dev,
    Test,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::Train, Subset::Dev, Subset::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Dev => "dev",
            Subset::Test => "test",
        }
    }
}

impl std::fmt::Display for Subset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            dev: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusSplit {
    pub train: BTreeSet<String>,
    pub dev: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

impl CorpusSplit {
    pub fn subset_of(&self, doc_id: &str) -> Option<Subset> {
        if self.train.contains(doc_id) {
            Some(Subset::Train)
        } else if self.dev.contains(doc_id) {
            Some(Subset::Dev)
        } else if self.test.contains(doc_id) {
            Some(Subset::Test)
        } else {
            None
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.dev.len(), self.test.len())
    }

    /// Writes `doc_id<TAB>subset` lines in the given document order.
    pub fn write_membership<W: Write>(&self, doc_ids: &[String], mut out: W) -> std::io::Result<()> {
        for doc in doc_ids {
            if let Some(subset) = self.subset_of(doc) {
                writeln!(out, "{doc}\t{subset}")?;
            }
        }
        out.flush()
    }
}

/// Seeded shuffle followed by a cut into train/dev/test.
///
/// Dev and test get `floor(ratio * n)` documents; train takes the rest.
pub fn split_documents(doc_ids: &[String], seed: u64, ratios: SplitRatios) -> Result<CorpusSplit, CorpusError> {
    let SplitRatios { train, dev, test } = ratios;
    if [train, dev, test].iter().any(|r| !(0.0..=1.0).contains(r)) || (train + dev + test - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadRatios((train, dev, test)));
    }
    if doc_ids.is_empty() {
        return Err(CorpusError::NoDocuments);
    }
    let mut seen = HashSet::new();
    for id in doc_ids {
        if !seen.insert(id) {
            return Err(CorpusError::DuplicateDocument(id.clone()));
        }
    }

    let n = doc_ids.len();
    // the epsilon absorbs representation error such as 0.1 * 70 = 7.000000000000001
    let n_dev = (dev * n as f64 + 1e-9).floor() as usize;
    let n_test = (test * n as f64 + 1e-9).floor() as usize;
    let n_train = n - n_dev - n_test;

    let mut shuffled: Vec<&String> = doc_ids.iter().collect();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut split = CorpusSplit::default();
    for (i, id) in shuffled.into_iter().enumerate() {
        let target = if i < n_train {
            &mut split.train
        } else if i < n_train + n_dev {
            &mut split.dev
        } else {
            &mut split.test
        };
        target.insert(id.clone());
    }
    Ok(split)
}

/// A unique (normalized surface, gold id) pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UniqueMention {
    pub surface: String,
    pub gold_tax_id: TaxId,
}

/// Keeps the first occurrence of each (normalized surface, gold id).
pub fn dedup_mentions<'a, I>(mentions: I, normalizer: &Normalizer) -> Vec<UniqueMention>
where
    I: IntoIterator<Item = &'a MentionAnnotation>,
{
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for m in mentions {
        let unique = UniqueMention {
            surface: normalizer.normalize(&m.surface),
            gold_tax_id: m.gold_tax_id,
        };
        if seen.insert(unique.clone()) {
            out.push(unique);
        }
    }
    out
}

/// Deduplicates within one subset only; mentions from other subsets are ignored.
pub fn dedup_subset(
    mentions: &[MentionAnnotation],
    split: &CorpusSplit,
    subset: Subset,
    normalizer: &Normalizer,
) -> Vec<UniqueMention> {
    dedup_mentions(
        mentions.iter().filter(|m| split.subset_of(&m.doc_id) == Some(subset)),
        normalizer,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxon::tax;
    use proptest::prelude::*;

    fn mention(doc: &str, surface: &str, id: u32) -> MentionAnnotation {
        MentionAnnotation {
            doc_id: doc.into(),
            start: 0,
            end: surface.len().max(1),
            surface: surface.into(),
            gold_tax_id: tax(id),
        }
    }

    fn docs(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("doc{i:04}")).collect()
    }

    #[test]
    fn tsv_row() {
        let rows = load_annotations(
            "doc1\t10\t22\tHomo sapiens\t9606\n".as_bytes(),
            &AnnotationFormat::StandoffTsv,
        )
        .unwrap();
        assert_eq!(
            rows,
            vec![MentionAnnotation {
                doc_id: "doc1".into(),
                start: 10,
                end: 22,
                surface: "Homo sapiens".into(),
                gold_tax_id: tax(9606),
            }]
        );
        assert!(load_annotations(&b""[..], &AnnotationFormat::StandoffTsv)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn tsv_errors_carry_row() {
        let cases = [
            "d\t1\t5\tmouse\t10090\nd\tx\t5\tmouse\t10090\n",
            "d\t1\t5\tmouse\t10090\nd\t5\t5\tmouse\t10090\n",
            "d\t1\t5\tmouse\t10090\nd\t1\t5\tmouse\tmus\n",
            "d\t1\t5\tmouse\t10090\nd\t1\t5\tmouse\n",
        ];
        for text in cases {
            match load_annotations(text.as_bytes(), &AnnotationFormat::StandoffTsv) {
                Err(CorpusError::Parse { row: 2, .. }) => {}
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn brat_with_normalization_lines() {
        let ann = "T1\tSpecies 0 5\tmouse\n\
                   T2\tSpecies 20 32\tHomo sapiens\n\
                   T3\tSpecies 40 45;50 55\tE. coli\n\
                   T4\tSpecies 60 63\trat\n\
                   N1\tReference T1 Taxonomy:10090\tMus musculus\n\
                   #1\tAnnotatorNotes T2\tspecies:ncbi:9606\n\
                   N2\tReference T3 NCBITaxon:562\n";
        let rows = load_annotations(ann.as_bytes(), &AnnotationFormat::BratAnn { doc_id: "pmc1".into() }).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].gold_tax_id, tax(10090));
        assert_eq!((rows[1].start, rows[1].end, rows[1].gold_tax_id), (20, 32, tax(9606)));
        assert_eq!((rows[2].start, rows[2].end), (40, 55));
        assert!(rows.iter().all(|r| r.doc_id == "pmc1"));

        let bad = "T1\tSpecies 9 5\tmouse\n";
        assert!(matches!(
            load_annotations(bad.as_bytes(), &AnnotationFormat::BratAnn { doc_id: "x".into() }),
            Err(CorpusError::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn table2_split_sizes() {
        let split = split_documents(&docs(100), 1, SplitRatios::default()).unwrap();
        assert_eq!(split.sizes(), (80, 10, 10));
        let split = split_documents(&docs(800), 1, SplitRatios::default()).unwrap();
        assert_eq!(split.sizes(), (640, 80, 80));
    }

    #[test]
    fn seeds_change_membership_not_sizes() {
        let a = split_documents(&docs(10), 1, SplitRatios::default()).unwrap();
        let b = split_documents(&docs(10), 2, SplitRatios::default()).unwrap();
        assert_eq!(a.sizes(), (8, 1, 1));
        assert_eq!(b.sizes(), (8, 1, 1));
        assert_ne!(a, b);
    }

    #[test]
    fn split_errors() {
        let dup = vec!["a".to_string(), "b".to_string(), "a".to_string()];
        assert!(matches!(
            split_documents(&dup, 0, SplitRatios::default()),
            Err(CorpusError::DuplicateDocument(d)) if d == "a"
        ));
        assert!(matches!(
            split_documents(&[], 0, SplitRatios::default()),
            Err(CorpusError::NoDocuments)
        ));
        let bad = SplitRatios {
            train: 0.5,
            dev: 0.1,
            test: 0.1,
        };
        assert!(split_documents(&docs(5), 0, bad).is_err());
    }

    #[test]
    fn dedup_mouse_example() {
        let ms = vec![
            mention("a", "mouse", 10090),
            mention("b", "mouse", 10090),
            mention("c", "Mouse", 10090),
        ];
        let out = dedup_mentions(&ms, &Normalizer::default());
        assert_eq!(
            out,
            vec![UniqueMention {
                surface: "mouse".into(),
                gold_tax_id: tax(10090)
            }]
        );
        assert!(dedup_mentions(&[], &Normalizer::default()).is_empty());
    }

    #[test]
    fn dedup_keeps_ambiguous_surfaces() {
        let ms = vec![mention("a", "perennis", 4456), mention("a", "perennis", 29760)];
        assert_eq!(dedup_mentions(&ms, &Normalizer::default()).len(), 2);
    }

    #[test]
    fn dedup_is_per_subset() {
        let ms = vec![mention("a", "rat", 10116), mention("b", "rat", 10116)];
        let split = CorpusSplit {
            train: ["a".to_string()].into(),
            dev: BTreeSet::new(),
            test: ["b".to_string()].into(),
        };
        let n = Normalizer::default();
        assert_eq!(dedup_subset(&ms, &split, Subset::Train, &n).len(), 1);
        assert_eq!(dedup_subset(&ms, &split, Subset::Test, &n).len(), 1);
        assert!(dedup_subset(&ms, &split, Subset::Dev, &n).is_empty());
    }

    #[test]
    fn membership_file() {
        let ids = docs(10);
        let split = split_documents(&ids, 3, SplitRatios::default()).unwrap();
        let mut buf = Vec::new();
        split.write_membership(&ids, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 10);
        assert_eq!(text.lines().filter(|l| l.ends_with("\ttest")).count(), 1);
    }

    proptest! {
        #[test]
        fn split_is_deterministic_partition(n in 1usize..300, seed in any::<u64>()) {
            let ids = docs(n);
            let a = split_documents(&ids, seed, SplitRatios::default()).unwrap();
            let b = split_documents(&ids, seed, SplitRatios::default()).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.train.is_disjoint(&a.dev) && a.train.is_disjoint(&a.test) && a.dev.is_disjoint(&a.test));
            prop_assert_eq!(a.train.len() + a.dev.len() + a.test.len(), n);
            prop_assert_eq!(a.dev.len(), n / 10);
            prop_assert_eq!(a.test.len(), n / 10);
        }

        #[test]
        fn dedup_idempotent(raw in proptest::collection::vec(("[A-Za-z ]{1,6}", 1u32..4), 0..30)) {
            let ms: Vec<_> = raw.iter().map(|(s, id)| mention("d", s, *id)).collect();
            let n = Normalizer::default();
            let once = dedup_mentions(&ms, &n);
            let again: Vec<_> = once.iter().map(|u| mention("d", &u.surface, u.gold_tax_id.get())).collect();
            prop_assert_eq!(dedup_mentions(&again, &n), once);
        }
    }
}
