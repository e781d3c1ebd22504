//! Text canonicalization shared by mentions and dictionary concepts.
//!
//! Text is folded to lowercase ASCII, every character outside `[a-z0-9]`
//! becomes a separator, and whitespace runs collapse to a single space.
//! A mention whose normalized form is a known short form is replaced by its
//! long form.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AcronymError {
    #[error("I/O error reading acronym map")]
    Io(#[from] std::io::Error),
    #[error("acronym map line {line}: expected `short_form<TAB>long_form`")]
    Malformed { line: usize },
    #[error("acronym map line {line}: `{key}` maps to itself")]
    SelfMapping { line: usize, key: String },
    #[error("acronym map line {line}: short form normalizes to an empty string")]
    EmptyKey { line: usize },
}

/// How characters outside ASCII are handled before case folding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonAsciiMode {
    /// Replace with the closest ASCII spelling (`é` -> `e`, `×` -> `x`).
    #[default]
    Transliterate,
    /// Remove the character.
    Drop,
}

impl std::str::FromStr for NonAsciiMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transliterate" => Ok(Self::Transliterate),
            "drop" => Ok(Self::Drop),
            other => Err(format!("unknown non-ASCII mode `{other}`")),
        }
    }
}

/// Mapping from normalized short forms to long forms.
///
/// Keys are stored normalized. Long forms are stored as given and
/// normalized on lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AcronymMap {
    entries: BTreeMap<String, String>,
}

impl AcronymMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a mapping. The key is normalized with `mode`; returns `false`
    /// when the normalized key is empty or equals the normalized long form.
    pub fn insert(&mut self, short_form: &str, long_form: &str, mode: NonAsciiMode) -> bool {
        let key = canonicalize(short_form, mode);
        if key.is_empty() || key == canonicalize(long_form, mode) {
            return false;
        }
        self.entries.insert(key, long_form.to_string());
        true
    }

    /// Reads `short_form<TAB>long_form` lines. Blank lines are skipped.
    pub fn from_reader<R: BufRead>(reader: R, mode: NonAsciiMode) -> Result<Self, AcronymError> {
        let mut map = Self::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (short, long) = line.split_once('\t').ok_or(AcronymError::Malformed { line: lineno })?;
            if long.contains('\t') || long.trim().is_empty() {
                return Err(AcronymError::Malformed { line: lineno });
            }
            let key = canonicalize(short, mode);
            if key.is_empty() {
                return Err(AcronymError::EmptyKey { line: lineno });
            }
            if key == canonicalize(long, mode) {
                return Err(AcronymError::SelfMapping { line: lineno, key });
            }
            map.entries.insert(key, long.to_string());
        }
        Ok(map)
    }

    pub fn get(&self, normalized_short: &str) -> Option<&str> {
        self.entries.get(normalized_short).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Canonical serialization (sorted `key<TAB>long_form` lines), used for hashing.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('\t');
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

/// A configured normalizer. Cheap to clone and safe to share.
#[derive(Debug, Clone, Default)]
pub struct Normalizer {
    acronyms: AcronymMap,
    mode: NonAsciiMode,
}

impl Normalizer {
    pub fn new(acronyms: AcronymMap, mode: NonAsciiMode) -> Self {
        Self { acronyms, mode }
    }

    /// A normalizer with no acronym expansion.
    pub fn plain(mode: NonAsciiMode) -> Self {
        Self::new(AcronymMap::new(), mode)
    }

    pub fn mode(&self) -> NonAsciiMode {
        self.mode
    }

    pub fn acronyms(&self) -> &AcronymMap {
        &self.acronyms
    }

    pub fn normalize(&self, text: &str) -> String {
        normalize(text, &self.acronyms, self.mode)
    }
}

/// Lowercase, fold to ASCII, turn punctuation into spaces, collapse
/// whitespace, then expand the whole string if it is an acronym key.
pub fn normalize(text: &str, acronyms: &AcronymMap, mode: NonAsciiMode) -> String {
    let base = canonicalize(text, mode);
    match acronyms.get(&base) {
        // no second lookup: chained keys are not followed
        Some(long) => canonicalize(long, mode),
        None => base,
    }
}

fn canonicalize(text: &str, mode: NonAsciiMode) -> String {
    let mut folded = String::with_capacity(text.len());
    for ch in text.chars() {
        if ch.is_ascii() {
            folded.push(ch);
        } else if mode == NonAsciiMode::Transliterate {
            folded.push_str(deunicode::deunicode_char(ch).unwrap_or(""));
        }
    }

    let mut out = String::with_capacity(folded.len());
    let mut pending_space = false;
    for ch in folded.chars() {
        let ch = ch.to_ascii_lowercase();
        if ch.is_ascii_lowercase() || ch.is_ascii_digit() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(ch);
        } else {
            pending_space = true;
        }
    }
    out
}

/// Splits normalized text on spaces, discarding empty pieces.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(s: &str) -> String {
        normalize(s, &AcronymMap::new(), NonAsciiMode::Transliterate)
    }

    #[test]
    fn lowercases_species_names() {
        assert_eq!(norm("Aspergillus nidulans"), "aspergillus nidulans");
    }

    #[test]
    fn empty_input() {
        assert_eq!(norm(""), "");
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn expands_acronym_on_full_match() {
        let mut map = AcronymMap::new();
        assert!(map.insert("e coli", "Escherichia coli", NonAsciiMode::Transliterate));
        assert_eq!(
            normalize("E. coli", &map, NonAsciiMode::Transliterate),
            "escherichia coli"
        );
        // substrings are left alone
        assert_eq!(
            normalize("E. coli K-12", &map, NonAsciiMode::Transliterate),
            "e coli k 12"
        );
    }

    #[test]
    fn punctuation_splits_tokens() {
        assert_eq!(norm("aspergillus-nidulans"), "aspergillus nidulans");
        assert_eq!(norm("  Aspergillus sp. AJC-2016b  "), "aspergillus sp ajc 2016b");
    }

    #[test]
    fn non_ascii_modes() {
        assert_eq!(norm("Mentha × piperita"), "mentha x piperita");
        assert_eq!(
            normalize("Mentha × piperita", &AcronymMap::new(), NonAsciiMode::Drop),
            "mentha piperita"
        );
        assert_eq!(norm("Pérez"), "perez");
        assert_eq!(normalize("Pérez", &AcronymMap::new(), NonAsciiMode::Drop), "prez");
    }

    #[test]
    fn tokenize_fig4_concept() {
        assert_eq!(
            tokenize("azorhizobium caulinodans"),
            vec!["azorhizobium", "caulinodans"]
        );
    }

    #[test]
    fn acronym_file_parsing() {
        let text = "E. coli\tEscherichia coli\n\nHIV\thuman immunodeficiency virus\n";
        let map = AcronymMap::from_reader(text.as_bytes(), NonAsciiMode::Transliterate).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map.get("e coli"), Some("Escherichia coli"));
        assert_eq!(map.get("hiv"), Some("human immunodeficiency virus"));

        let err = AcronymMap::from_reader("no tab here\n".as_bytes(), NonAsciiMode::Drop);
        assert!(matches!(err, Err(AcronymError::Malformed { line: 1 })));
        let err = AcronymMap::from_reader("x\ta\nMouse\tmouse\n".as_bytes(), NonAsciiMode::Drop);
        assert!(matches!(err, Err(AcronymError::SelfMapping { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,40}") {
            let once = norm(&s);
            prop_assert_eq!(norm(&once), once.clone());
        }

        #[test]
        fn output_alphabet(s in "\\PC{0,40}") {
            let out = normalize(&s, &AcronymMap::new(), NonAsciiMode::Drop);
            prop_assert!(out.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == ' '));
            prop_assert!(!out.starts_with(' ') && !out.ends_with(' ') && !out.contains("  "));
        }

        #[test]
        fn tokenize_join_identity(tokens in proptest::collection::vec("[a-z0-9]{1,8}", 0..8)) {
            let joined = tokens.join(" ");
            prop_assert_eq!(tokenize(&joined), tokens.clone());
            prop_assert_eq!(tokenize(&joined).join(" "), joined);
        }

        #[test]
        fn idempotent_with_unchained_map(s in "[A-Za-z. ]{0,12}") {
            let mut map = AcronymMap::new();
            map.insert("E. coli", "Escherichia coli", NonAsciiMode::Transliterate);
            map.insert("hiv", "human immunodeficiency virus", NonAsciiMode::Transliterate);
            let once = normalize(&s, &map, NonAsciiMode::Transliterate);
            prop_assert_eq!(normalize(&once, &map, NonAsciiMode::Transliterate), once.clone());
        }
    }
}
