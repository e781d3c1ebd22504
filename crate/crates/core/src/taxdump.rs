//! Parsing of the NCBI taxonomy dump and construction of per-rank concept
//! dictionaries.
//!
//! `names.dmp` and `nodes.dmp` rows use `\t|\t` between fields and end with
//! `\t|\n`. Each dictionary maps a taxonomy identifier to one retrievable
//! document: the normalized names of the taxon joined with single spaces, in
//! dump order, with exact duplicates dropped.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::{tokenize, Normalizer};
use crate::taxon::{NameClass, Rank, TaxId};

const FIELD_SEP: &str = "\t|\t";
const ROW_END: &str = "\t|";
const RANKS_FILE: &str = "ranks.txt";

#[derive(Debug, Error)]
pub enum TaxdumpError {
    #[error("I/O error")]
    Io(#[from] std::io::Error),
    #[error("{file} line {line}: {reason}")]
    Parse {
        file: &'static str,
        line: usize,
        reason: String,
    },
    #[error("nodes.dmp lists tax_id {0} more than once")]
    DuplicateNode(TaxId),
    #[error("tax_ids present in names.dmp but missing from nodes.dmp: {}", join_ids(.0))]
    OrphanNames(Vec<TaxId>),
}

fn join_ids(ids: &[TaxId]) -> String {
    ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameVariant {
    pub text: String,
    pub name_class: NameClass,
    pub unique_name: Option<String>,
}

/// A taxonomy node merged with its names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaxonRecord {
    pub tax_id: TaxId,
    pub parent_id: TaxId,
    pub rank: Rank,
    pub names: Vec<NameVariant>,
}

/// One retrievable dictionary document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptEntry {
    pub tax_id: TaxId,
    pub concept_text: String,
    pub tokens: Vec<String>,
}

impl ConceptEntry {
    pub fn new(tax_id: TaxId, concept_text: String) -> Self {
        let tokens = tokenize(&concept_text);
        Self {
            tax_id,
            concept_text,
            tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankDictionary {
    pub rank: Rank,
    pub entries: BTreeMap<TaxId, ConceptEntry>,
}

impl RankDictionary {
    pub fn new(rank: Rank) -> Self {
        Self {
            rank,
            entries: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes `tax_id<TAB>concept_text` lines in ascending tax_id order.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for entry in self.entries.values() {
            writeln!(out, "{}\t{}", entry.tax_id, entry.concept_text)?;
        }
        out.flush()
    }

    pub fn read_from<R: BufRead>(rank: Rank, reader: R) -> Result<Self, TaxdumpError> {
        let mut dict = RankDictionary::new(rank);
        let mut last: Option<TaxId> = None;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let err = |reason: &str| TaxdumpError::Parse {
                file: "dictionary",
                line: idx + 1,
                reason: reason.to_string(),
            };
            let (id, text) = line
                .split_once('\t')
                .ok_or_else(|| err("expected `tax_id<TAB>concept_text`"))?;
            let tax_id: TaxId = id.parse().map_err(|_| err("non-integer tax_id"))?;
            if last.is_some_and(|prev| prev >= tax_id) {
                return Err(err("tax_ids must be strictly ascending"));
            }
            last = Some(tax_id);
            let entry = ConceptEntry::new(tax_id, text.to_string());
            let canonical = entry
                .concept_text
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b' ');
            if !canonical || entry.tokens.is_empty() || entry.tokens.join(" ") != entry.concept_text {
                return Err(err("concept text is not in normalized form"));
            }
            dict.entries.insert(tax_id, entry);
        }
        Ok(dict)
    }
}

/// Which ranks and name classes enter the dictionaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictionaryConfig {
    pub ranks: Vec<Rank>,
    /// `None` admits every name class.
    pub name_classes: Option<BTreeSet<NameClass>>,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        Self {
            ranks: Rank::default_set(),
            name_classes: None,
        }
    }
}

/// The dictionaries for all configured ranks, in configuration order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DictionarySet {
    pub dictionaries: Vec<RankDictionary>,
}

impl DictionarySet {
    pub fn get(&self, rank: &Rank) -> Option<&RankDictionary> {
        self.dictionaries.iter().find(|d| &d.rank == rank)
    }

    /// Looks a taxon up across all ranks.
    pub fn concept(&self, tax_id: TaxId) -> Option<&ConceptEntry> {
        self.dictionaries.iter().find_map(|d| d.entries.get(&tax_id))
    }

    pub fn contains(&self, tax_id: TaxId) -> bool {
        self.concept(tax_id).is_some()
    }

    /// Every entry across all ranks, ascending by tax_id.
    pub fn all_entries(&self) -> Vec<ConceptEntry> {
        let mut all: Vec<ConceptEntry> = self
            .dictionaries
            .iter()
            .flat_map(|d| d.entries.values().cloned())
            .collect();
        all.sort_by_key(|e| e.tax_id);
        all
    }

    pub fn total_entries(&self) -> usize {
        self.dictionaries.iter().map(RankDictionary::len).sum()
    }

    /// Writes `<rank>.tsv` per dictionary plus a `ranks.txt` listing them.
    pub fn save(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut ranks = BufWriter::new(File::create(dir.join(RANKS_FILE))?);
        for dict in &self.dictionaries {
            writeln!(ranks, "{}", dict.rank)?;
            let file = File::create(dir.join(format!("{}.tsv", dict.rank.slug())))?;
            dict.write_to(BufWriter::new(file))?;
        }
        ranks.flush()
    }

    pub fn load(dir: &Path) -> Result<Self, TaxdumpError> {
        let ranks = BufReader::new(File::open(dir.join(RANKS_FILE))?);
        let mut dictionaries = Vec::new();
        for line in ranks.lines() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let rank = Rank::from(line.as_str());
            let file = File::open(dir.join(format!("{}.tsv", rank.slug())))?;
            dictionaries.push(RankDictionary::read_from(rank, BufReader::new(file))?);
        }
        Ok(Self { dictionaries })
    }
}

/// Splits one dmp row into its fields. `line` excludes the newline.
fn split_row<'a>(file: &'static str, lineno: usize, line: &'a str) -> Result<Vec<&'a str>, TaxdumpError> {
    let body = line.strip_suffix(ROW_END).ok_or_else(|| TaxdumpError::Parse {
        file,
        line: lineno,
        reason: "row does not end with TAB '|'".to_string(),
    })?;
    Ok(body.split(FIELD_SEP).collect())
}

/// Iterates rows as `(line number, text)` with the newline removed.
fn for_each_row<R: BufRead>(
    file: &'static str,
    mut reader: R,
    mut f: impl FnMut(usize, &str) -> Result<(), TaxdumpError>,
) -> Result<(), TaxdumpError> {
    let mut buf = Vec::new();
    let mut lineno = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            return Ok(());
        }
        lineno += 1;
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        let line = std::str::from_utf8(&buf).map_err(|_| TaxdumpError::Parse {
            file,
            line: lineno,
            reason: "invalid UTF-8".to_string(),
        })?;
        f(lineno, line)?;
    }
}

fn parse_id(file: &'static str, lineno: usize, field: &str, what: &str) -> Result<TaxId, TaxdumpError> {
    field.parse().map_err(|_| TaxdumpError::Parse {
        file,
        line: lineno,
        reason: format!("{what} `{field}` is not a positive integer"),
    })
}

/// Parses `names.dmp` into `(tax_id, variant)` pairs in file order.
pub fn parse_names<R: BufRead>(reader: R) -> Result<Vec<(TaxId, NameVariant)>, TaxdumpError> {
    const FILE: &str = "names.dmp";
    let mut out = Vec::new();
    for_each_row(FILE, reader, |lineno, line| {
        let fields = split_row(FILE, lineno, line)?;
        if fields.len() != 4 {
            return Err(TaxdumpError::Parse {
                file: FILE,
                line: lineno,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let tax_id = parse_id(FILE, lineno, fields[0], "tax_id")?;
        if fields[1].is_empty() {
            return Err(TaxdumpError::Parse {
                file: FILE,
                line: lineno,
                reason: "empty name".to_string(),
            });
        }
        out.push((
            tax_id,
            NameVariant {
                text: fields[1].to_string(),
                unique_name: (!fields[2].is_empty()).then(|| fields[2].to_string()),
                name_class: NameClass::from(fields[3]),
            },
        ));
        Ok(())
    })?;
    Ok(out)
}

/// Parses `nodes.dmp`; only the first three fields are read.
pub fn parse_nodes<R: BufRead>(reader: R) -> Result<BTreeMap<TaxId, (TaxId, Rank)>, TaxdumpError> {
    const FILE: &str = "nodes.dmp";
    let mut out = BTreeMap::new();
    for_each_row(FILE, reader, |lineno, line| {
        let fields = split_row(FILE, lineno, line)?;
        if fields.len() < 3 {
            return Err(TaxdumpError::Parse {
                file: FILE,
                line: lineno,
                reason: format!("expected at least 3 fields, found {}", fields.len()),
            });
        }
        let tax_id = parse_id(FILE, lineno, fields[0], "tax_id")?;
        let parent = parse_id(FILE, lineno, fields[1], "parent tax_id")?;
        if out.insert(tax_id, (parent, Rank::from(fields[2]))).is_some() {
            return Err(TaxdumpError::DuplicateNode(tax_id));
        }
        Ok(())
    })?;
    Ok(out)
}

/// Groups names under their nodes. Records come out ascending by tax_id;
/// nodes with no names are skipped.
pub fn merge_records(
    names: &[(TaxId, NameVariant)],
    nodes: &BTreeMap<TaxId, (TaxId, Rank)>,
) -> Result<Vec<TaxonRecord>, TaxdumpError> {
    let orphans: BTreeSet<TaxId> = names
        .iter()
        .map(|(id, _)| *id)
        .filter(|id| !nodes.contains_key(id))
        .collect();
    if !orphans.is_empty() {
        return Err(TaxdumpError::OrphanNames(orphans.into_iter().collect()));
    }

    let mut grouped: BTreeMap<TaxId, Vec<NameVariant>> = BTreeMap::new();
    for (id, variant) in names {
        grouped.entry(*id).or_default().push(variant.clone());
    }
    Ok(grouped
        .into_iter()
        .map(|(tax_id, names)| {
            let (parent_id, rank) = nodes[&tax_id].clone();
            TaxonRecord {
                tax_id,
                parent_id,
                rank,
                names,
            }
        })
        .collect())
}

/// Builds one dictionary per configured rank.
///
/// Taxa of other ranks are skipped, as are taxa whose names all normalize to
/// the empty string.
pub fn build_dictionaries(
    names: &[(TaxId, NameVariant)],
    nodes: &BTreeMap<TaxId, (TaxId, Rank)>,
    normalizer: &Normalizer,
    config: &DictionaryConfig,
) -> Result<DictionarySet, TaxdumpError> {
    let records = merge_records(names, nodes)?;
    let mut by_rank: HashMap<&Rank, RankDictionary> = config
        .ranks
        .iter()
        .map(|r| (r, RankDictionary::new(r.clone())))
        .collect();

    for record in records {
        let Some(dict) = by_rank.get_mut(&record.rank) else {
            continue;
        };
        let mut variants: Vec<String> = Vec::with_capacity(record.names.len());
        for name in &record.names {
            if let Some(classes) = &config.name_classes {
                if !classes.contains(&name.name_class) {
                    continue;
                }
            }
            let normalized = normalizer.normalize(&name.text);
            if !normalized.is_empty() && !variants.contains(&normalized) {
                variants.push(normalized);
            }
        }
        if variants.is_empty() {
            log::debug!("tax_id {} has no usable names; skipped", record.tax_id);
            continue;
        }
        dict.entries
            .insert(record.tax_id, ConceptEntry::new(record.tax_id, variants.join(" ")));
    }

    let dictionaries = config
        .ranks
        .iter()
        .map(|r| by_rank.remove(r).unwrap_or_else(|| RankDictionary::new(r.clone())))
        .collect();
    Ok(DictionarySet { dictionaries })
}
