//! Phone inventories and the phonetic-feature encoding of input phones.
//!
//! Every phone is a binary feature vector. The boundary "phone" that opens
//! each word (and closes each syllable in the syllable-identification task)
//! is the all-zero vector, so no real phone may encode to all zeros.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

/// Symbol used for the boundary phone in serialized forms and lookups.
pub const BOUNDARY: &str = "#";

/// Suffix marking a nasalized vowel, e.g. `u~`.
pub const NASAL_MARK: char = '~';

pub const FEATURE_TABLE_VERSION: u32 = 1;

const DEFAULT_TABLE: &str = include_str!("../data/features.json");

const STANDARD_CONSONANTS: [&str; 14] = [
    "p", "b", "f", "v", "m", "t", "d", "s", "z", "n", "k", "g", "x", "ɣ",
];
pub const VOWELS: [&str; 5] = ["i", "e", "u", "o", "a"];
const TEMPLATE_CONSONANTS: [&str; 9] = ["p", "b", "m", "t", "d", "s", "n", "k", "g"];
const CONSTRAINT_CONSONANTS: [&str; 8] = ["p", "b", "m", "t", "d", "n", "k", "g"];

/// Versioned mapping from phone symbols to feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub version: u32,
    pub features: Vec<String>,
    pub rows: BTreeMap<String, Vec<f64>>,
}

impl FeatureTable {
    /// The table shipped with the crate (`data/features.json`).
    pub fn shipped() -> Self {
        Self::from_json(DEFAULT_TABLE).expect("shipped feature table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: FeatureTable = serde_json::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }

    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f == name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != FEATURE_TABLE_VERSION {
            return Err(Error::Version {
                what: "feature table",
                found: self.version,
                expected: FEATURE_TABLE_VERSION,
            });
        }
        if self.features.is_empty() {
            return Err(Error::Config("feature table has no features".into()));
        }
        let mut seen: Vec<(&str, &[f64])> = Vec::with_capacity(self.rows.len());
        for (sym, row) in &self.rows {
            if sym == BOUNDARY {
                return Err(Error::Config(format!("`{BOUNDARY}` is reserved for the boundary")));
            }
            if row.len() != self.width() {
                return Err(Error::Config(format!(
                    "phone `{sym}` has {} values for {} features",
                    row.len(),
                    self.width()
                )));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Config(format!("phone `{sym}` has a value outside [0,1]")));
            }
            if row.iter().all(|&v| v == 0.0) {
                return Err(Error::Config(format!(
                    "phone `{sym}` encodes to the all-zero boundary vector"
                )));
            }
            if let Some((other, _)) = seen.iter().find(|(_, r)| *r == row.as_slice()) {
                return Err(Error::Config(format!("phones `{other}` and `{sym}` share a vector")));
            }
            seen.push((sym, row));
        }
        Ok(())
    }
}

/// Input pattern for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct PhoneVector(pub Vec<f64>);

impl PhoneVector {
    pub fn boundary(width: usize) -> Self {
        PhoneVector(vec![0.0; width])
    }

    pub fn is_boundary(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InventoryKind {
    Standard,
    Mutation,
    Reduplication,
    TemplateCc,
    /// Eight-consonant subset used by the favored/disfavored template study.
    ConstraintCc,
}

impl InventoryKind {
    pub const ALL: [InventoryKind; 5] = [
        InventoryKind::Standard,
        InventoryKind::Mutation,
        InventoryKind::Reduplication,
        InventoryKind::TemplateCc,
        InventoryKind::ConstraintCc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InventoryKind::Standard => "standard",
            InventoryKind::Mutation => "mutation",
            InventoryKind::Reduplication => "reduplication",
            InventoryKind::TemplateCc => "template_cc",
            InventoryKind::ConstraintCc => "constraint_cc",
        }
    }
}

impl fmt::Display for InventoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InventoryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InventoryKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown inventory kind `{s}`")))
    }
}

/// The phone set of one experiment together with its feature encoding.
#[derive(Debug, Clone)]
pub struct Inventory {
    pub kind: InventoryKind,
    pub consonants: Vec<String>,
    pub vowels: Vec<String>,
    pub nasal_vowels: Vec<String>,
    pub feature_table: Arc<FeatureTable>,
}

/// Builds an inventory over the shipped feature table.
pub fn build_inventory(kind: InventoryKind) -> Result<Inventory> {
    Inventory::build(kind, Arc::new(FeatureTable::shipped()))
}

fn owned(symbols: &[&str]) -> Vec<String> {
    symbols.iter().map(|s| s.to_string()).collect()
}

impl Inventory {
    pub fn build(kind: InventoryKind, feature_table: Arc<FeatureTable>) -> Result<Self> {
        let vowels = owned(&VOWELS);
        let (consonants, nasal_vowels) = match kind {
            InventoryKind::Standard => (owned(&STANDARD_CONSONANTS), Vec::new()),
            InventoryKind::Mutation => (
                owned(&STANDARD_CONSONANTS),
                VOWELS.iter().map(|v| format!("{v}{NASAL_MARK}")).collect(),
            ),
            InventoryKind::Reduplication => {
                let mut c = owned(&STANDARD_CONSONANTS);
                c.push("ŋ".into());
                (c, Vec::new())
            }
            InventoryKind::TemplateCc => (owned(&TEMPLATE_CONSONANTS), Vec::new()),
            InventoryKind::ConstraintCc => (owned(&CONSTRAINT_CONSONANTS), Vec::new()),
        };
        let inv = Inventory {
            kind,
            consonants,
            vowels,
            nasal_vowels,
            feature_table,
        };
        inv.check()?;
        Ok(inv)
    }

    fn check(&self) -> Result<()> {
        let mut all = BTreeSet::new();
        for sym in self.phones() {
            if !all.insert(sym) {
                return Err(Error::Config(format!("phone `{sym}` listed twice")));
            }
            if !self.feature_table.rows.contains_key(sym) {
                return Err(Error::Config(format!(
                    "phone `{sym}` of the {} inventory is missing from the feature table",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    /// All phones: consonants, then vowels, then nasal vowels.
    pub fn phones(&self) -> impl Iterator<Item = &str> {
        self.consonants
            .iter()
            .chain(&self.vowels)
            .chain(&self.nasal_vowels)
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.consonants.len() + self.vowels.len() + self.nasal_vowels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.phones().any(|p| p == symbol)
    }

    pub fn is_vowel(&self, symbol: &str) -> bool {
        self.vowels.iter().chain(&self.nasal_vowels).any(|v| v == symbol)
    }

    pub fn is_consonant(&self, symbol: &str) -> bool {
        self.consonants.iter().any(|c| c == symbol)
    }

    pub fn feature_count(&self) -> usize {
        self.feature_table.width()
    }

    pub fn boundary(&self) -> PhoneVector {
        PhoneVector::boundary(self.feature_count())
    }

    /// Encodes a phone symbol, or [`BOUNDARY`] for the all-zero pattern.
    pub fn encode_phone(&self, symbol: &str) -> Result<PhoneVector> {
        if symbol == BOUNDARY {
            return Ok(self.boundary());
        }
        if !self.contains(symbol) {
            return Err(Error::Lookup(symbol.to_string()));
        }
        Ok(PhoneVector(self.feature_table.rows[symbol].clone()))
    }

    /// Boundary followed by one vector per phone.
    pub fn encode_word<S: AsRef<str>>(&self, symbols: &[S]) -> Result<Vec<PhoneVector>> {
        std::iter::once(Ok(self.boundary()))
            .chain(symbols.iter().map(|s| self.encode_phone(s.as_ref())))
            .collect()
    }

    pub fn nasalize(&self, vowel: &str) -> Result<String> {
        if !self.vowels.iter().any(|v| v == vowel) {
            return Err(Error::Domain(format!("`{vowel}` is not an oral vowel")));
        }
        let nasal = format!("{vowel}{NASAL_MARK}");
        if !self.nasal_vowels.contains(&nasal) {
            return Err(Error::Domain(format!(
                "the {} inventory has no nasal vowels",
                self.kind
            )));
        }
        Ok(nasal)
    }

    pub fn denasalize(&self, vowel: &str) -> Result<String> {
        match vowel.strip_suffix(NASAL_MARK) {
            Some(oral) if self.nasal_vowels.iter().any(|v| v == vowel) => Ok(oral.to_string()),
            _ => Err(Error::Domain(format!("`{vowel}` is not a nasal vowel"))),
        }
    }

    /// Splits a written form into phone symbols, longest match first.
    pub fn tokenize(&self, text: &str) -> Result<Vec<String>> {
        let mut symbols: Vec<&str> = self.phones().collect();
        symbols.sort_by_key(|s| std::cmp::Reverse(s.len()));
        let mut out = Vec::new();
        let mut rest = text;
        while !rest.is_empty() {
            let sym = symbols
                .iter()
                .find(|s| rest.starts_with(**s))
                .ok_or_else(|| Error::Lookup(rest.chars().next().unwrap().to_string()))?;
            out.push(sym.to_string());
            rest = &rest[sym.len()..];
        }
        Ok(out)
    }
}
