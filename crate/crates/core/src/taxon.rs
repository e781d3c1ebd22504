use std::fmt;
use std::num::NonZeroU32;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// An NCBI taxonomy identifier. Always positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaxId(NonZeroU32);

impl TaxId {
    pub fn new(id: u32) -> Option<Self> {
        NonZeroU32::new(id).map(Self)
    }

    pub fn get(self) -> u32 {
        self.0.get()
    }
}

impl fmt::Display for TaxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid taxonomy identifier `{0}`")]
pub struct InvalidTaxId(pub String);

impl FromStr for TaxId {
    type Err = InvalidTaxId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<NonZeroU32>()
            .map(Self)
            .map_err(|_| InvalidTaxId(s.to_string()))
    }
}

/// Shorthand for tests and fixtures.
///
/// # Panics
/// If `id` is zero.
pub fn tax(id: u32) -> TaxId {
    TaxId::new(id).expect("taxonomy identifiers are positive")
}

/// Taxonomic rank as recorded in `nodes.dmp`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rank {
    Strain,
    Species,
    Genus,
    Family,
    Order,
    Phylum,
    Other(String),
}

impl Rank {
    /// The six ranks dictionaries are built for unless configured otherwise.
    pub fn default_set() -> Vec<Rank> {
        vec![
            Rank::Strain,
            Rank::Species,
            Rank::Genus,
            Rank::Family,
            Rank::Order,
            Rank::Phylum,
        ]
    }

    pub fn as_str(&self) -> &str {
        match self {
            Rank::Strain => "strain",
            Rank::Species => "species",
            Rank::Genus => "genus",
            Rank::Family => "family",
            Rank::Order => "order",
            Rank::Phylum => "phylum",
            Rank::Other(s) => s,
        }
    }

    /// File-name friendly form: spaces become underscores.
    pub fn slug(&self) -> String {
        self.as_str().replace(' ', "_")
    }

    pub fn from_slug(slug: &str) -> Rank {
        Rank::from(slug.replace('_', " ").as_str())
    }
}

impl From<&str> for Rank {
    fn from(s: &str) -> Self {
        match s {
            "strain" => Rank::Strain,
            "species" => Rank::Species,
            "genus" => Rank::Genus,
            "family" => Rank::Family,
            "order" => Rank::Order,
            "phylum" => Rank::Phylum,
            other => Rank::Other(other.to_string()),
        }
    }
}

impl FromStr for Rank {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Rank::from(s))
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Rank {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Rank {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Rank::from(s.as_str()))
    }
}

/// Name class column of `names.dmp`, preserved verbatim.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NameClass {
    ScientificName,
    Synonym,
    CommonName,
    EquivalentName,
    Other(String),
}

impl NameClass {
    pub fn as_str(&self) -> &str {
        match self {
            NameClass::ScientificName => "scientific name",
            NameClass::Synonym => "synonym",
            NameClass::CommonName => "common name",
            NameClass::EquivalentName => "equivalent name",
            NameClass::Other(s) => s,
        }
    }
}

impl From<&str> for NameClass {
    fn from(s: &str) -> Self {
        match s {
            "scientific name" => NameClass::ScientificName,
            "synonym" => NameClass::Synonym,
            "common name" => NameClass::CommonName,
            "equivalent name" => NameClass::EquivalentName,
            other => NameClass::Other(other.to_string()),
        }
    }
}

impl fmt::Display for NameClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for NameClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for NameClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(NameClass::from(s.as_str()))
    }
}
