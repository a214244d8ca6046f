//! Shift spaces and admissibility of finite words.
//!
//! A [`Subshift`] couples an alphabet with one of several ways of describing
//! which words occur in admissible bi-infinite sequences: no restriction at
//! all, a finite edge-labeled presentation (built from forbidden words or
//! given directly), a cancellation table, a product of smaller shifts, or the
//! image of another shift under an injective symbol-to-symbol relabeling.
//!
//! Throughout the crate, languages are treated as factorial (closed under
//! factors) and extendable (every admissible word occurs inside a bi-infinite
//! admissible sequence). Presentations are trimmed at construction time so
//! that path labels match that convention.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::alphabet::{Alphabet, SymbolId, Word};
use crate::monoid::{monoid_word_admissible, MonoidTable};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ShiftError {
    #[error("the described shift space is empty")]
    Empty,
    #[error("forbidden word {0} is empty")]
    EmptyForbiddenWord(usize),
    #[error("forbidden word {index} uses symbol id {symbol} outside the alphabet")]
    BadForbiddenSymbol { index: usize, symbol: SymbolId },
    #[error("edge {0} refers to a vertex that does not exist")]
    BadEdgeVertex(usize),
    #[error("edge {0} carries a label outside the alphabet")]
    BadEdgeLabel(usize),
    #[error("presentation has no vertices")]
    NoVertices,
    #[error("product needs at least one factor")]
    EmptyProduct,
    #[error("embedding map must list one target symbol per source symbol ({expected} expected, {got} given)")]
    MapLength { expected: usize, got: usize },
    #[error("embedding map entry {0} is outside the target alphabet")]
    MapRange(usize),
    #[error("embedding map sends two source symbols to target symbol {0}")]
    MapNotInjective(SymbolId),
    #[error("the two shifts use different alphabets ({0} vs {1})")]
    AlphabetMismatch(String, String),
}

/// Edge-labeled directed multigraph used to present a shift by its path
/// labels. Vertices are indices into `vertex_names`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    pub vertex_names: Vec<String>,
    /// `(from, label, to)`, kept sorted.
    pub edges: Vec<(usize, SymbolId, usize)>,
}

impl LabeledGraph {
    pub fn new(
        vertex_names: Vec<String>,
        mut edges: Vec<(usize, SymbolId, usize)>,
    ) -> LabeledGraph {
        edges.sort_unstable();
        edges.dedup();
        LabeledGraph {
            vertex_names,
            edges,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_names.len()
    }

    /// Restrict to vertices that lie on bi-infinite paths: iteratively drop
    /// vertices without an incoming or without an outgoing edge.
    pub fn essential(&self) -> LabeledGraph {
        let n = self.vertex_count();
        let mut alive = vec![true; n];
        loop {
            let mut has_in = vec![false; n];
            let mut has_out = vec![false; n];
            for &(u, _, v) in &self.edges {
                if alive[u] && alive[v] {
                    has_out[u] = true;
                    has_in[v] = true;
                }
            }
            let mut changed = false;
            for i in 0..n {
                if alive[i] && !(has_in[i] && has_out[i]) {
                    alive[i] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut remap = vec![usize::MAX; n];
        let mut names = Vec::new();
        for i in 0..n {
            if alive[i] {
                remap[i] = names.len();
                names.push(self.vertex_names[i].clone());
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(u, _, v)| alive[u] && alive[v])
            .map(|&(u, s, v)| (remap[u], s, remap[v]))
            .collect();
        LabeledGraph::new(names, edges)
    }

    /// All vertices reachable from `set` by one edge labeled `symbol`.
    pub fn step_subset(&self, set: &BTreeSet<usize>, symbol: SymbolId) -> BTreeSet<usize> {
        self.edges
            .iter()
            .filter(|&&(u, s, _)| s == symbol && set.contains(&u))
            .map(|&(_, _, v)| v)
            .collect()
    }

    /// Does some path read `word`?
    pub fn reads(&self, word: &[SymbolId]) -> bool {
        let mut set: BTreeSet<usize> = (0..self.vertex_count()).collect();
        for &s in word {
            set = self.step_subset(&set, s);
            if set.is_empty() {
                return false;
            }
        }
        true
    }

    /// Labels used by at least one edge.
    pub fn used_labels(&self) -> BTreeSet<SymbolId> {
        self.edges.iter().map(|&(_, s, _)| s).collect()
    }
}

/// How a [`Subshift`] describes its language.
#[derive(Debug, Clone)]
pub enum ShiftKind {
    /// Every word is admissible.
    Full,
    /// Words are exactly the path labels of a trimmed presentation.
    Presented(LabeledGraph),
    /// Words are the ones that do not reduce to zero under a cancellation
    /// table.
    Monoid(MonoidTable),
    /// Coordinatewise product of factor shifts.
    Product(Vec<Subshift>),
    /// Injective relabeling of another shift into this alphabet: `map[s]` is
    /// the symbol the source symbol `s` becomes.
    Embedding {
        source: Box<Subshift>,
        map: Vec<SymbolId>,
        /// Target symbol -> source symbol, `None` where the target symbol is
        /// not in the image (and hence never admissible).
        inverse: Vec<Option<SymbolId>>,
    },
}

/// A shift space: an alphabet plus a description of its language.
#[derive(Debug, Clone)]
pub struct Subshift {
    name: String,
    alphabet: Alphabet,
    kind: ShiftKind,
}

impl Subshift {
    pub fn full(name: impl Into<String>, alphabet: Alphabet) -> Subshift {
        Subshift {
            name: name.into(),
            alphabet,
            kind: ShiftKind::Full,
        }
    }

    /// Shift of finite type given by a list of forbidden words, compiled to a
    /// sliding-window presentation and trimmed.
    pub fn sft(
        name: impl Into<String>,
        alphabet: Alphabet,
        forbidden: &[Word],
    ) -> Result<Subshift, ShiftError> {
        for (i, w) in forbidden.iter().enumerate() {
            if w.is_empty() {
                return Err(ShiftError::EmptyForbiddenWord(i));
            }
            for &s in w {
                if s as usize >= alphabet.len() {
                    return Err(ShiftError::BadForbiddenSymbol { index: i, symbol: s });
                }
            }
        }
        let window = forbidden.iter().map(|w| w.len()).max().unwrap_or(1).max(2);
        let contains_forbidden = |w: &[SymbolId]| {
            forbidden
                .iter()
                .any(|f| w.windows(f.len()).any(|piece| piece == f.as_slice()))
        };
        // Vertices: clean words of length `window - 1`.
        let mut vertices: Vec<Word> = vec![Vec::new()];
        for _ in 0..window - 1 {
            let mut next = Vec::new();
            for v in &vertices {
                for s in alphabet.ids() {
                    let mut w = v.clone();
                    w.push(s);
                    if !contains_forbidden(&w) {
                        next.push(w);
                    }
                }
            }
            vertices = next;
        }
        let mut edges = Vec::new();
        for (i, v) in vertices.iter().enumerate() {
            for s in alphabet.ids() {
                let mut w = v.clone();
                w.push(s);
                if contains_forbidden(&w) {
                    continue;
                }
                let target: Word = w[1..].to_vec();
                if let Ok(j) = vertices.binary_search(&target) {
                    edges.push((i, s, j));
                }
            }
        }
        let names = vertices
            .iter()
            .map(|v| alphabet.format_word(v))
            .collect();
        let graph = LabeledGraph::new(names, edges).essential();
        if graph.vertex_count() == 0 {
            return Err(ShiftError::Empty);
        }
        Ok(Subshift {
            name: name.into(),
            alphabet,
            kind: ShiftKind::Presented(graph),
        })
    }

    /// Sofic shift given by an explicit presentation; the graph is trimmed to
    /// its bi-infinite part.
    pub fn sofic(
        name: impl Into<String>,
        alphabet: Alphabet,
        graph: LabeledGraph,
    ) -> Result<Subshift, ShiftError> {
        if graph.vertex_count() == 0 {
            return Err(ShiftError::NoVertices);
        }
        for (i, &(u, s, v)) in graph.edges.iter().enumerate() {
            if u >= graph.vertex_count() || v >= graph.vertex_count() {
                return Err(ShiftError::BadEdgeVertex(i));
            }
            if s as usize >= alphabet.len() {
                return Err(ShiftError::BadEdgeLabel(i));
            }
        }
        let trimmed = graph.essential();
        if trimmed.vertex_count() == 0 {
            return Err(ShiftError::Empty);
        }
        Ok(Subshift {
            name: name.into(),
            alphabet,
            kind: ShiftKind::Presented(trimmed),
        })
    }

    /// Shift of admissible sequences over a cancellation table.
    pub fn monoid(name: impl Into<String>, table: MonoidTable) -> Subshift {
        Subshift {
            name: name.into(),
            alphabet: table.alphabet.clone(),
            kind: ShiftKind::Monoid(table),
        }
    }

    /// Coordinatewise product; the alphabet is the product alphabet of the
    /// factors, ordered lexicographically by factor order.
    pub fn product(name: impl Into<String>, factors: Vec<Subshift>) -> Result<Subshift, ShiftError> {
        if factors.is_empty() {
            return Err(ShiftError::EmptyProduct);
        }
        let refs: Vec<&Alphabet> = factors.iter().map(|f| f.alphabet()).collect();
        let alphabet = Alphabet::product(&refs).expect("factor alphabets are nonempty");
        Ok(Subshift {
            name: name.into(),
            alphabet,
            kind: ShiftKind::Product(factors),
        })
    }

    /// Image of `source` in `target` under the injective symbol map
    /// `map[source_symbol] = target_symbol`.
    pub fn embedding(
        name: impl Into<String>,
        source: Subshift,
        target: Alphabet,
        map: Vec<SymbolId>,
    ) -> Result<Subshift, ShiftError> {
        if map.len() != source.alphabet().len() {
            return Err(ShiftError::MapLength {
                expected: source.alphabet().len(),
                got: map.len(),
            });
        }
        let mut inverse: Vec<Option<SymbolId>> = vec![None; target.len()];
        for (src, &tgt) in map.iter().enumerate() {
            if tgt as usize >= target.len() {
                return Err(ShiftError::MapRange(src));
            }
            if inverse[tgt as usize].is_some() {
                return Err(ShiftError::MapNotInjective(tgt));
            }
            inverse[tgt as usize] = Some(src as SymbolId);
        }
        Ok(Subshift {
            name: name.into(),
            alphabet: target,
            kind: ShiftKind::Embedding {
                source: Box::new(source),
                map,
                inverse,
            },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Subshift {
        self.name = name.into();
        self
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn kind(&self) -> &ShiftKind {
        &self.kind
    }

    /// Sizes of the factor alphabets if this shift is a product.
    pub fn factor_sizes(&self) -> Option<Vec<usize>> {
        match &self.kind {
            ShiftKind::Product(fs) => Some(fs.iter().map(|f| f.alphabet().len()).collect()),
            _ => None,
        }
    }

    /// Is `word` in the language of this shift?
    pub fn is_admissible(&self, word: &[SymbolId]) -> bool {
        match &self.kind {
            ShiftKind::Full => true,
            ShiftKind::Presented(g) => g.reads(word),
            ShiftKind::Monoid(t) => monoid_word_admissible(t, word),
            ShiftKind::Product(fs) => {
                let sizes: Vec<usize> = fs.iter().map(|f| f.alphabet().len()).collect();
                let mut coords: Vec<Word> = vec![Vec::with_capacity(word.len()); fs.len()];
                for &s in word {
                    let parts = Alphabet::split_product_id(s, &sizes);
                    for (k, p) in parts.into_iter().enumerate() {
                        coords[k].push(p);
                    }
                }
                fs.iter().zip(&coords).all(|(f, w)| f.is_admissible(w))
            }
            ShiftKind::Embedding { source, inverse, .. } => {
                let mut pre = Vec::with_capacity(word.len());
                for &s in word {
                    match inverse[s as usize] {
                        Some(src) => pre.push(src),
                        None => return false,
                    }
                }
                source.is_admissible(&pre)
            }
        }
    }

    /// All admissible words of length exactly `n`, in lexicographic order.
    pub fn words_of_length(&self, n: usize) -> Vec<Word> {
        let mut out = Vec::new();
        let mut stack: Vec<Word> = vec![Vec::new()];
        // Depth-first with prefix pruning; valid because languages are
        // factorial.
        while let Some(w) = stack.pop() {
            if w.len() == n {
                out.push(w);
                continue;
            }
            for s in self.alphabet.ids().rev() {
                let mut next = w.clone();
                next.push(s);
                if self.is_admissible(&next) {
                    stack.push(next);
                }
            }
        }
        out
    }

    pub fn count_words(&self, n: usize) -> usize {
        self.words_of_length(n).len()
    }
}

/// Is every `sub`-admissible word of length at most `n` also admissible in
/// `sup`?  Returns the first (shortest, then lexicographically smallest)
/// counterexample, or `None` when the language inclusion holds up to `n`.
pub fn check_containment(
    sub: &Subshift,
    sup: &Subshift,
    n: usize,
) -> Result<Option<Word>, ShiftError> {
    if sub.alphabet().names() != sup.alphabet().names() {
        return Err(ShiftError::AlphabetMismatch(
            sub.name().to_string(),
            sup.name().to_string(),
        ));
    }
    for m in 1..=n {
        for w in sub.words_of_length(m) {
            if !sup.is_admissible(&w) {
                return Ok(Some(w));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_mean() -> Subshift {
        let a = Alphabet::new(["0", "1"]).unwrap();
        Subshift::sft("gm", a, &[vec![1, 1]]).unwrap()
    }

    #[test]
    fn golden_mean_language() {
        let x = golden_mean();
        assert!(x.is_admissible(&[0, 1, 0, 1, 0]));
        assert!(!x.is_admissible(&[0, 1, 1, 0]));
        // 2, 3, 5, 8: Fibonacci word counts.
        assert_eq!(x.count_words(1), 2);
        assert_eq!(x.count_words(2), 3);
        assert_eq!(x.count_words(3), 5);
        assert_eq!(x.count_words(4), 8);
    }

    #[test]
    fn sft_with_excluded_symbol() {
        let a = Alphabet::new(["0", "1", "2"]).unwrap();
        let x = Subshift::sft("no2", a, &[vec![2]]).unwrap();
        assert!(x.is_admissible(&[0, 1, 1, 0]));
        assert!(!x.is_admissible(&[0, 2]));
        assert_eq!(x.count_words(3), 8);
    }

    #[test]
    fn empty_sft_rejected() {
        let a = Alphabet::new(["0", "1"]).unwrap();
        let err = Subshift::sft("none", a, &[vec![0], vec![1]]).unwrap_err();
        assert_eq!(err, ShiftError::Empty);
    }

    #[test]
    fn even_shift_presentation() {
        // Runs of 1 between 0s have even length.
        let a = Alphabet::new(["0", "1"]).unwrap();
        let g = LabeledGraph::new(
            vec!["e".into(), "o".into()],
            vec![(0, 0, 0), (0, 1, 1), (1, 1, 0)],
        );
        let x = Subshift::sofic("even", a, g).unwrap();
        assert!(x.is_admissible(&[0, 1, 1, 0]));
        assert!(x.is_admissible(&[1, 0]));
        assert!(!x.is_admissible(&[0, 1, 0]));
        assert!(x.is_admissible(&[1, 1, 1]));
        assert!(!x.is_admissible(&[0, 1, 1, 1, 0]));
    }

    #[test]
    fn presentation_is_trimmed() {
        let a = Alphabet::new(["0", "1"]).unwrap();
        // Vertex 1 has no outgoing edge; after trimming only the self-loop
        // on vertex 0 survives, so no word containing 1 is admissible.
        let g = LabeledGraph::new(
            vec!["u".into(), "dead".into()],
            vec![(0, 0, 0), (0, 1, 1)],
        );
        let x = Subshift::sofic("trimmed", a, g).unwrap();
        assert!(x.is_admissible(&[0, 0, 0]));
        assert!(!x.is_admissible(&[1]));
    }

    #[test]
    fn product_splits_coordinates() {
        let gm = golden_mean();
        let full = Subshift::full("full2", Alphabet::new(["a", "b"]).unwrap());
        let p = Subshift::product("gm_x_full2", vec![gm, full]).unwrap();
        assert_eq!(p.alphabet().len(), 4);
        assert_eq!(p.alphabet().name(0), "(0,a)");
        assert_eq!(p.alphabet().name(3), "(1,b)");
        // (1,a)(1,b) projects to 11 in the first coordinate.
        assert!(!p.is_admissible(&[2, 3]));
        assert!(p.is_admissible(&[2, 1]));
        assert_eq!(p.count_words(2), 3 * 4);
    }

    #[test]
    fn embedding_relabels_and_blocks_missing_symbols() {
        let gm = golden_mean();
        let target = Alphabet::new(["x", "y", "z"]).unwrap();
        // 0 -> z, 1 -> x; y is not in the image.
        let e = Subshift::embedding("gm_in_xyz", gm, target, vec![2, 0]).unwrap();
        assert!(e.is_admissible(&[2, 0, 2]));
        assert!(!e.is_admissible(&[0, 0]));
        assert!(!e.is_admissible(&[1]));
    }

    #[test]
    fn embedding_requires_injective_total_map() {
        let gm = golden_mean();
        let target = Alphabet::new(["x"]).unwrap();
        let err = Subshift::embedding("bad", gm.clone(), target.clone(), vec![0]).unwrap_err();
        assert_eq!(err, ShiftError::MapLength { expected: 2, got: 1 });
        let err = Subshift::embedding("bad", gm, target, vec![0, 0]).unwrap_err();
        assert_eq!(err, ShiftError::MapNotInjective(0));
    }

    #[test]
    fn dyck_shift_words() {
        let x = Subshift::monoid("dyck2", MonoidTable::dyck(2));
        // 4^1 minus nothing: every single symbol is admissible.
        assert_eq!(x.count_words(1), 4);
        // Of the 16 length-2 words the two crossing pairs are inadmissible.
        assert_eq!(x.count_words(2), 14);
    }
}
