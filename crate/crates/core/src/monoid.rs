//! Inverse-monoid style cancellation tables and word reduction.
//!
//! An alphabet is split into *openers* and *closers*. Adjacent pairs
//! `opener · closer` either cancel to the unit or annihilate the whole word
//! (zero), according to a pair table. Reducing a word repeatedly applies these
//! rules; the result is either zero or a word of the shape
//! `closers… openers…` in which no further cancellation applies.
//!
//! The admissible bi-infinite sequences over such a table form a shift space:
//! a word is admissible iff it does not reduce to zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::{Alphabet, SymbolId};

/// Outcome of pairing one opener against one closer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairRule {
    /// The pair cancels.
    Unit,
    /// The pair annihilates every word containing it.
    Zero,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MonoidError {
    #[error("opener and closer name sets must be disjoint; {0:?} appears in both")]
    Overlap(String),
    #[error("pair table has {rows} rows for {openers} openers")]
    RowCount { rows: usize, openers: usize },
    #[error("pair table row {row} has {cols} entries for {closers} closers")]
    ColCount { row: usize, cols: usize, closers: usize },
}

/// Cancellation table over `openers ∪ closers`.
///
/// The combined alphabet lists openers first, then closers, so symbol ids
/// below `openers.len()` are openers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonoidTable {
    pub alphabet: Alphabet,
    opener_count: usize,
    /// `rules[i][j]` pairs opener `i` against closer `j`.
    rules: Vec<Vec<PairRule>>,
}

impl MonoidTable {
    pub fn new(
        openers: Vec<String>,
        closers: Vec<String>,
        rules: Vec<Vec<PairRule>>,
    ) -> Result<Self, MonoidError> {
        for o in &openers {
            if closers.contains(o) {
                return Err(MonoidError::Overlap(o.clone()));
            }
        }
        if rules.len() != openers.len() {
            return Err(MonoidError::RowCount {
                rows: rules.len(),
                openers: openers.len(),
            });
        }
        for (row, r) in rules.iter().enumerate() {
            if r.len() != closers.len() {
                return Err(MonoidError::ColCount {
                    row,
                    cols: r.len(),
                    closers: closers.len(),
                });
            }
        }
        let opener_count = openers.len();
        let alphabet = Alphabet::new(openers.into_iter().chain(closers))
            .expect("opener/closer names are distinct and nonempty");
        Ok(MonoidTable {
            alphabet,
            opener_count,
            rules,
        })
    }

    pub fn opener_count(&self) -> usize {
        self.opener_count
    }

    pub fn closer_count(&self) -> usize {
        self.alphabet.len() - self.opener_count
    }

    pub fn is_opener(&self, s: SymbolId) -> bool {
        (s as usize) < self.opener_count
    }

    pub fn is_closer(&self, s: SymbolId) -> bool {
        !self.is_opener(s)
    }

    /// Pair an opener id against a closer id.
    pub fn pair(&self, opener: SymbolId, closer: SymbolId) -> PairRule {
        debug_assert!(self.is_opener(opener) && self.is_closer(closer));
        self.rules[opener as usize][closer as usize - self.opener_count]
    }

    /// Openers `o` with `pair(o, closer) == Unit`.
    pub fn matching_openers(&self, closer: SymbolId) -> Vec<SymbolId> {
        (0..self.opener_count as SymbolId)
            .filter(|&o| self.pair(o, closer) == PairRule::Unit)
            .collect()
    }

    /// Closers `c` with `pair(opener, c) == Unit`.
    pub fn matching_closers(&self, opener: SymbolId) -> Vec<SymbolId> {
        (self.opener_count as SymbolId..self.alphabet.len() as SymbolId)
            .filter(|&c| self.pair(opener, c) == PairRule::Unit)
            .collect()
    }

    /// The Dyck table on `bracket_pairs` kinds of brackets: each opener
    /// cancels only its own closer, every mismatched pair is zero.
    pub fn dyck(bracket_pairs: usize) -> Self {
        let openers: Vec<String> = (0..bracket_pairs).map(|i| format!("({i}")).collect();
        let closers: Vec<String> = (0..bracket_pairs).map(|i| format!("){i}")).collect();
        let rules = (0..bracket_pairs)
            .map(|i| {
                (0..bracket_pairs)
                    .map(|j| if i == j { PairRule::Unit } else { PairRule::Zero })
                    .collect()
            })
            .collect();
        MonoidTable::new(openers, closers, rules).expect("dyck table is well formed")
    }

    /// Extension of the two-bracket Dyck table by `k` wildcard-opener kinds:
    /// openers `a-`, `b-`, `g1-..gk-` and closers `a+`, `b+`, `g1+..gk+`.
    /// `a-`/`b-` cancel only their own closer; `gk-` cancels `a+`, `b+` and
    /// its own `gk+`; everything else is zero.
    pub fn gamma_extension(k: usize) -> Self {
        let mut openers = vec!["a-".to_string(), "b-".to_string()];
        let mut closers = vec!["a+".to_string(), "b+".to_string()];
        for i in 1..=k {
            openers.push(format!("g{i}-"));
            closers.push(format!("g{i}+"));
        }
        let n = 2 + k;
        let mut rules = vec![vec![PairRule::Zero; n]; n];
        rules[0][0] = PairRule::Unit; // a- a+
        rules[1][1] = PairRule::Unit; // b- b+
        for i in 0..k {
            rules[2 + i][0] = PairRule::Unit; // gi- a+
            rules[2 + i][1] = PairRule::Unit; // gi- b+
            rules[2 + i][2 + i] = PairRule::Unit; // gi- gi+
        }
        MonoidTable::new(openers, closers, rules).expect("gamma table is well formed")
    }
}

/// Result of reducing a word: zero, or an irreducible `closers… openers…`
/// normal form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReducedForm {
    Zero,
    Normal {
        /// Closers with no opener to their left; in original order.
        unmatched_closers: Vec<SymbolId>,
        /// Openers never closed; in original order (stack bottom first).
        unmatched_openers: Vec<SymbolId>,
    },
}

impl ReducedForm {
    pub fn unit() -> Self {
        ReducedForm::Normal {
            unmatched_closers: Vec::new(),
            unmatched_openers: Vec::new(),
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(
            self,
            ReducedForm::Normal { unmatched_closers, unmatched_openers }
                if unmatched_closers.is_empty() && unmatched_openers.is_empty()
        )
    }
}

/// Reduce a word over `table` to its normal form, or to zero.
///
/// Scan left to right keeping a stack of pending openers. A closer pairs
/// against the top opener: `Unit` pops it, `Zero` kills the word. A closer
/// arriving on an empty stack is irreducible and is kept as an unmatched
/// closer; it can never interact with later symbols.
pub fn monoid_reduce(table: &MonoidTable, word: &[SymbolId]) -> ReducedForm {
    let mut unmatched_closers = Vec::new();
    let mut stack: Vec<SymbolId> = Vec::new();
    for &s in word {
        if table.is_opener(s) {
            stack.push(s);
        } else {
            match stack.pop() {
                None => unmatched_closers.push(s),
                Some(top) => match table.pair(top, s) {
                    PairRule::Unit => {}
                    PairRule::Zero => return ReducedForm::Zero,
                },
            }
        }
    }
    ReducedForm::Normal {
        unmatched_closers,
        unmatched_openers: stack,
    }
}

/// Admissibility for the shift space of `table`: a word is admissible iff it
/// does not reduce to zero.
pub fn monoid_word_admissible(table: &MonoidTable, word: &[SymbolId]) -> bool {
    monoid_reduce(table, word) != ReducedForm::Zero
}
