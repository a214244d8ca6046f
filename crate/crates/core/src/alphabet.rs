//! Finite alphabets and words over them.
//!
//! Symbols are referred to by dense indices (`SymbolId`) into an [`Alphabet`];
//! all user-facing output goes through the alphabet's display names.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a symbol within its alphabet.
pub type SymbolId = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlphabetError {
    #[error("alphabet must contain at least one symbol")]
    Empty,
    #[error("duplicate symbol name {0:?}")]
    Duplicate(String),
    #[error("unknown symbol name {0:?}")]
    Unknown(String),
}

/// An ordered finite set of named symbols. Order is fixed at construction and
/// determines symbol ids, matrix layouts and export order.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    symbols: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, SymbolId>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self, AlphabetError> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(AlphabetError::Empty);
        }
        let mut index = BTreeMap::new();
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i as SymbolId).is_some() {
                return Err(AlphabetError::Duplicate(s.clone()));
            }
        }
        Ok(Alphabet { symbols, index })
    }

    /// Rebuild the name index; needed after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as SymbolId))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn name(&self, id: SymbolId) -> &str {
        &self.symbols[id as usize]
    }

    pub fn id(&self, name: &str) -> Result<SymbolId, AlphabetError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| AlphabetError::Unknown(name.to_string()))
    }

    pub fn ids(&self) -> std::ops::Range<SymbolId> {
        0..self.symbols.len() as SymbolId
    }

    pub fn names(&self) -> &[String] {
        &self.symbols
    }

    /// Alphabet of tuples, ordered lexicographically by factor order.
    pub fn product(factors: &[&Alphabet]) -> Result<Self, AlphabetError> {
        let mut names = vec![String::new()];
        for f in factors {
            let mut next = Vec::with_capacity(names.len() * f.len());
            for prefix in &names {
                for s in f.names() {
                    if prefix.is_empty() {
                        next.push(s.clone());
                    } else {
                        next.push(format!("{prefix},{s}"));
                    }
                }
            }
            names = next;
        }
        Alphabet::new(names.into_iter().map(|n| format!("({n})")))
    }

    /// Decompose a product-symbol id into per-factor ids, given factor sizes.
    pub fn split_product_id(mut id: SymbolId, sizes: &[usize]) -> Vec<SymbolId> {
        let mut out = vec![0; sizes.len()];
        for (k, &sz) in sizes.iter().enumerate().rev() {
            out[k] = id % sz as SymbolId;
            id /= sz as SymbolId;
        }
        out
    }

    /// Compose per-factor ids into the product-symbol id.
    pub fn join_product_id(parts: &[SymbolId], sizes: &[usize]) -> SymbolId {
        let mut id = 0;
        for (k, &p) in parts.iter().enumerate() {
            id = id * sizes[k] as SymbolId + p;
        }
        id
    }

    pub fn format_word(&self, w: &[SymbolId]) -> String {
        let parts: Vec<&str> = w.iter().map(|&s| self.name(s)).collect();
        parts.join(" ")
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Alphabet{:?}", self.symbols)
    }
}

/// A finite word: a sequence of symbol ids from one alphabet.
pub type Word = Vec<SymbolId>;

/// Drop the last symbol (upper truncation).
pub fn iota_plus(w: &[SymbolId]) -> Word {
    w[..w.len().saturating_sub(1)].to_vec()
}

/// Drop the first symbol (left shift).
pub fn iota_minus(w: &[SymbolId]) -> Word {
    if w.is_empty() {
        Vec::new()
    } else {
        w[1..].to_vec()
    }
}
