//! Exact left-context tracking for the supported shift descriptions.
//!
//! A *context state* answers, for one left-infinite (or finite) history, the
//! question "which words may come next".  States are exact: two histories get
//! the same state exactly when they admit the same continuations.  For the
//! level structure we coarsen states to *keys*: a key at level `n` determines
//! the continuations of length at most `n`, and equal keys at level `n` mean
//! equal depth-`n` follower sets.  Keys are what the builders enumerate, step
//! and intern, so everything here is deterministic and `Ord`.
//!
//! The five tracked description kinds:
//!
//! * full shifts — a single state;
//! * presented shifts — follower subsets of the presentation, determinized
//!   from the full vertex set;
//! * cancellation-table shifts — the stack of unmatched pushing symbols
//!   (closing symbols read on an empty stack are absorbed and leave the stack
//!   unchanged, so the stack alone determines the future);
//! * products — tuples of factor states stepped with the split symbol;
//! * relabelings — the source state behind the symbol translation.

use std::collections::BTreeMap;

use super::{ShannonError, ShannonGraph};
use crate::alphabet::{Alphabet, SymbolId, Word};
use crate::monoid::{MonoidTable, PairRule};
use crate::subshift::{LabeledGraph, ShiftKind, Subshift};

/// Exact state of a left history.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ContextState {
    /// The unique state of a full shift.
    Unit,
    /// A state of the determinized follower automaton of a presented shift.
    Finite(usize),
    /// Unmatched pushing symbols, bottom first (the last entry is the top).
    Stack(Vec<SymbolId>),
    /// One state per product coordinate.
    Tuple(Vec<ContextState>),
}

/// Level-`n` coarsening of a context state.
///
/// At level 0 every state becomes [`Key::Unit`].  A stack state of depth `d`
/// keeps its full word while `d < n` (`deep: false`); once `d >= n` only the
/// topmost `n` symbols matter for continuations of length at most `n`, so the
/// key records exactly those (`deep: true`).  Finite and unit states carry no
/// more information than the state itself at any level.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Key {
    Unit,
    Finite(usize),
    Stack {
        deep: bool,
        /// Bottom first; for a deep key this is the top-`n` slice.
        word: Vec<SymbolId>,
    },
    Tuple(Vec<Key>),
}

#[derive(Debug, Clone)]
enum OracleKind {
    Full,
    Finite {
        /// Determinized follower automaton; state 0 is the full vertex set.
        graph: ShannonGraph,
        /// Membership in the eventual image, i.e. realizability by
        /// arbitrarily long (hence left-infinite) histories.
        alive: Vec<bool>,
        /// `reverse[q]` lists the `(p, σ)` with `p --σ--> q`.
        reverse: Vec<Vec<(usize, SymbolId)>>,
    },
    Monoid(MonoidTable),
    Product {
        factors: Vec<Oracle>,
        sizes: Vec<usize>,
    },
    Embedding {
        source: Box<Oracle>,
        map: Vec<SymbolId>,
        inverse: Vec<Option<SymbolId>>,
    },
}

/// Exact context machine for one subshift.
#[derive(Debug, Clone)]
pub struct Oracle {
    alphabet: Alphabet,
    kind: OracleKind,
}

/// Determinize a presentation by follower subsets, starting from the full
/// vertex set, without trimming.  Returns the automaton plus eventual-image
/// membership per state.
fn subset_automaton(
    alphabet: &Alphabet,
    presentation: &LabeledGraph,
) -> Result<(ShannonGraph, Vec<bool>), ShannonError> {
    let full: std::collections::BTreeSet<usize> = (0..presentation.vertex_count()).collect();
    let mut index = BTreeMap::new();
    let mut subsets = vec![full.clone()];
    index.insert(full, 0usize);
    let mut queue = std::collections::VecDeque::from([0usize]);
    let mut edges = Vec::new();
    while let Some(i) = queue.pop_front() {
        let set = subsets[i].clone();
        for sigma in alphabet.ids() {
            let image = presentation.step_subset(&set, sigma);
            if image.is_empty() {
                continue;
            }
            let j = *index.entry(image.clone()).or_insert_with(|| {
                subsets.push(image);
                queue.push_back(subsets.len() - 1);
                subsets.len() - 1
            });
            edges.push((i, sigma, j));
        }
    }
    let names = subsets
        .iter()
        .map(|s| {
            let parts: Vec<&str> = s
                .iter()
                .map(|&v| presentation.vertex_names[v].as_str())
                .collect();
            format!("{{{}}}", parts.join(","))
        })
        .collect();
    let graph = ShannonGraph::new(alphabet.clone(), names, edges)?;
    let keep = graph.eventual_image_vertices()?;
    let alive = (0..graph.vertex_count()).map(|v| keep.contains(&v)).collect();
    Ok((graph, alive))
}

impl Oracle {
    pub fn from_subshift(shift: &Subshift) -> Result<Oracle, ShannonError> {
        let alphabet = shift.alphabet().clone();
        if alphabet.len() > 128 {
            return Err(ShannonError::AlphabetTooLarge(alphabet.len()));
        }
        let kind = match shift.kind() {
            ShiftKind::Full => OracleKind::Full,
            ShiftKind::Presented(g) => {
                let (graph, alive) = subset_automaton(&alphabet, g)?;
                let mut reverse = vec![Vec::new(); graph.vertex_count()];
                for (p, s, q) in graph.edges() {
                    reverse[q].push((p, s));
                }
                OracleKind::Finite {
                    graph,
                    alive,
                    reverse,
                }
            }
            ShiftKind::Monoid(t) => OracleKind::Monoid(t.clone()),
            ShiftKind::Product(fs) => {
                let factors: Result<Vec<Oracle>, ShannonError> =
                    fs.iter().map(Oracle::from_subshift).collect();
                OracleKind::Product {
                    factors: factors?,
                    sizes: fs.iter().map(|f| f.alphabet().len()).collect(),
                }
            }
            ShiftKind::Embedding {
                source,
                map,
                inverse,
            } => OracleKind::Embedding {
                source: Box::new(Oracle::from_subshift(source)?),
                map: map.clone(),
                inverse: inverse.clone(),
            },
        };
        Ok(Oracle { alphabet, kind })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// State of the empty history.
    pub fn root(&self) -> ContextState {
        match &self.kind {
            OracleKind::Full => ContextState::Unit,
            OracleKind::Finite { .. } => ContextState::Finite(0),
            OracleKind::Monoid(_) => ContextState::Stack(Vec::new()),
            OracleKind::Product { factors, .. } => {
                ContextState::Tuple(factors.iter().map(Oracle::root).collect())
            }
            OracleKind::Embedding { source, .. } => source.root(),
        }
    }

    /// Extend a history by one symbol; `None` when the extension is
    /// inadmissible.
    pub fn step_state(&self, state: &ContextState, sigma: SymbolId) -> Option<ContextState> {
        match (&self.kind, state) {
            (OracleKind::Full, ContextState::Unit) => Some(ContextState::Unit),
            (OracleKind::Finite { graph, .. }, ContextState::Finite(q)) => {
                graph.step(*q, sigma).map(ContextState::Finite)
            }
            (OracleKind::Monoid(t), ContextState::Stack(v)) => {
                if t.is_opener(sigma) {
                    let mut w = v.clone();
                    w.push(sigma);
                    Some(ContextState::Stack(w))
                } else {
                    match v.last() {
                        None => Some(ContextState::Stack(v.clone())),
                        Some(&top) => match t.pair(top, sigma) {
                            PairRule::Unit => Some(ContextState::Stack(v[..v.len() - 1].to_vec())),
                            PairRule::Zero => None,
                        },
                    }
                }
            }
            (OracleKind::Product { factors, sizes }, ContextState::Tuple(states)) => {
                let parts = Alphabet::split_product_id(sigma, sizes);
                let mut out = Vec::with_capacity(states.len());
                for ((f, st), p) in factors.iter().zip(states).zip(parts) {
                    out.push(f.step_state(st, p)?);
                }
                Some(ContextState::Tuple(out))
            }
            (OracleKind::Embedding { source, inverse, .. }, st) => {
                source.step_state(st, inverse[sigma as usize]?)
            }
            _ => panic!("context state does not belong to this oracle"),
        }
    }

    /// State after reading `word` from the empty history; `None` when the
    /// word is inadmissible.
    pub fn run(&self, word: &[SymbolId]) -> Option<ContextState> {
        let mut state = self.root();
        for &s in word {
            state = self.step_state(&state, s)?;
        }
        Some(state)
    }

    /// Bitmask of the symbols admissible after a history in `state`.
    pub fn state_mask(&self, state: &ContextState) -> u128 {
        match (&self.kind, state) {
            (OracleKind::Full, ContextState::Unit) => full_mask(self.alphabet.len()),
            (OracleKind::Finite { graph, .. }, ContextState::Finite(q)) => {
                let mut m = 0u128;
                for s in graph.out_labels(*q) {
                    m |= 1 << s;
                }
                m
            }
            (OracleKind::Monoid(t), ContextState::Stack(v)) => monoid_mask(t, v.last().copied()),
            (OracleKind::Product { factors, sizes }, ContextState::Tuple(states)) => {
                let coord_masks: Vec<u128> = factors
                    .iter()
                    .zip(states)
                    .map(|(f, st)| f.state_mask(st))
                    .collect();
                let mut m = 0u128;
                for sigma in self.alphabet.ids() {
                    let parts = Alphabet::split_product_id(sigma, sizes);
                    if parts
                        .iter()
                        .zip(&coord_masks)
                        .all(|(p, cm)| cm >> p & 1 == 1)
                    {
                        m |= 1 << sigma;
                    }
                }
                m
            }
            (OracleKind::Embedding { source, map, .. }, st) => {
                let inner = source.state_mask(st);
                let mut m = 0u128;
                for (src, &tgt) in map.iter().enumerate() {
                    if inner >> src & 1 == 1 {
                        m |= 1 << tgt;
                    }
                }
                m
            }
            _ => panic!("context state does not belong to this oracle"),
        }
    }

    /// Do two states admit exactly the same words of length at most `n`?
    pub fn depth_n_equivalent(&self, a: &ContextState, b: &ContextState, n: usize) -> bool {
        self.subordinate_to_depth(a, b, n).is_ok() && self.subordinate_to_depth(b, a, n).is_ok()
    }

    /// Is every word of length at most `n` admissible after `a` also
    /// admissible after `b`?  On failure returns a shortest separating word
    /// (iterative deepening over the bound).
    pub fn subordinate_to_depth(
        &self,
        a: &ContextState,
        b: &ContextState,
        n: usize,
    ) -> Result<(), Word> {
        for depth in 1..=n {
            self.subordinate_at(a, b, depth)?;
        }
        Ok(())
    }

    fn subordinate_at(&self, a: &ContextState, b: &ContextState, n: usize) -> Result<(), Word> {
        if n == 0 {
            return Ok(());
        }
        let need = self.state_mask(a);
        let have = self.state_mask(b);
        for sigma in self.alphabet.ids() {
            if need >> sigma & 1 == 0 {
                continue;
            }
            if have >> sigma & 1 == 0 {
                return Err(vec![sigma]);
            }
            let ta = self.step_state(a, sigma).expect("masked symbol steps");
            let tb = self.step_state(b, sigma).expect("masked symbol steps");
            if let Err(mut w) = self.subordinate_at(&ta, &tb, n - 1) {
                let mut word = vec![sigma];
                word.append(&mut w);
                return Err(word);
            }
        }
        Ok(())
    }

    /// Coarsen a state to its level-`n` key.
    pub fn level_key(&self, state: &ContextState, n: usize) -> Key {
        if n == 0 {
            return Key::Unit;
        }
        match (&self.kind, state) {
            (OracleKind::Full, ContextState::Unit) => Key::Unit,
            (OracleKind::Finite { .. }, ContextState::Finite(q)) => Key::Finite(*q),
            (OracleKind::Monoid(_), ContextState::Stack(v)) => normalize_stack(v, n),
            (OracleKind::Product { factors, .. }, ContextState::Tuple(states)) => Key::Tuple(
                factors
                    .iter()
                    .zip(states)
                    .map(|(f, st)| f.level_key(st, n))
                    .collect(),
            ),
            (OracleKind::Embedding { source, .. }, st) => source.level_key(st, n),
            _ => panic!("context state does not belong to this oracle"),
        }
    }

    /// Level-`n` key after reading `word` from the empty history.
    pub fn key_of_word(&self, word: &[SymbolId], n: usize) -> Option<Key> {
        self.run(word).map(|st| self.level_key(&st, n))
    }

    /// All level-`n` keys realized by left-infinite histories, sorted.
    ///
    /// Realizability is structural per kind: deep stacks always extend to an
    /// infinite history; an exact stack needs at least one closing symbol in
    /// the table (an infinite run of absorbed closers below it); finite
    /// states must lie in the eventual image of the follower automaton.
    pub fn enumerate_keys(&self, n: usize) -> Vec<Key> {
        if n == 0 {
            return vec![Key::Unit];
        }
        let mut out = match &self.kind {
            OracleKind::Full => vec![Key::Unit],
            OracleKind::Finite { alive, .. } => alive
                .iter()
                .enumerate()
                .filter(|(_, &a)| a)
                .map(|(q, _)| Key::Finite(q))
                .collect(),
            OracleKind::Monoid(t) => {
                let openers: Vec<SymbolId> = (0..t.opener_count() as SymbolId).collect();
                let mut keys = Vec::new();
                if t.closer_count() >= 1 {
                    for d in 0..n {
                        push_opener_words(&openers, d, &mut keys, false);
                    }
                }
                push_opener_words(&openers, n, &mut keys, true);
                keys
            }
            OracleKind::Product { factors, .. } => {
                let per: Vec<Vec<Key>> = factors.iter().map(|f| f.enumerate_keys(n)).collect();
                let mut keys = vec![Vec::new()];
                for coord in &per {
                    let mut next = Vec::with_capacity(keys.len() * coord.len());
                    for partial in &keys {
                        for k in coord {
                            let mut t: Vec<Key> = partial.clone();
                            t.push(k.clone());
                            next.push(t);
                        }
                    }
                    keys = next;
                }
                keys.into_iter().map(Key::Tuple).collect()
            }
            OracleKind::Embedding { source, .. } => source.enumerate_keys(n),
        };
        out.sort();
        out
    }

    /// Is this level-`n` key realized by some left-infinite history?
    pub fn key_alive(&self, key: &Key, n: usize) -> bool {
        if n == 0 {
            return true;
        }
        match (&self.kind, key) {
            (OracleKind::Full, Key::Unit) => true,
            (OracleKind::Finite { alive, .. }, Key::Finite(q)) => alive[*q],
            (OracleKind::Monoid(_), Key::Stack { deep: true, .. }) => true,
            (OracleKind::Monoid(t), Key::Stack { deep: false, .. }) => t.closer_count() >= 1,
            (OracleKind::Product { factors, .. }, Key::Tuple(ks)) => factors
                .iter()
                .zip(ks)
                .all(|(f, k)| f.key_alive(k, n)),
            (OracleKind::Embedding { source, .. }, k) => source.key_alive(k, n),
            _ => panic!("key does not belong to this oracle"),
        }
    }

    /// Bitmask of the symbols admissible after any history with this
    /// level-`n` key (`n >= 1`; one-step admissibility is depth-1 data, so
    /// every level resolves it).
    pub fn key_mask(&self, key: &Key, n: usize) -> u128 {
        debug_assert!(n >= 1);
        match (&self.kind, key) {
            (OracleKind::Full, Key::Unit) => full_mask(self.alphabet.len()),
            (OracleKind::Finite { graph, .. }, Key::Finite(q)) => {
                let mut m = 0u128;
                for s in graph.out_labels(*q) {
                    m |= 1 << s;
                }
                m
            }
            (OracleKind::Monoid(t), Key::Stack { word, .. }) => {
                monoid_mask(t, word.last().copied())
            }
            (OracleKind::Product { factors, sizes }, Key::Tuple(ks)) => {
                let coord_masks: Vec<u128> = factors
                    .iter()
                    .zip(ks)
                    .map(|(f, k)| f.key_mask(k, n))
                    .collect();
                let mut m = 0u128;
                for sigma in self.alphabet.ids() {
                    let parts = Alphabet::split_product_id(sigma, sizes);
                    if parts
                        .iter()
                        .zip(&coord_masks)
                        .all(|(p, cm)| cm >> p & 1 == 1)
                    {
                        m |= 1 << sigma;
                    }
                }
                m
            }
            (OracleKind::Embedding { source, map, .. }, k) => {
                let inner = source.key_mask(k, n);
                let mut m = 0u128;
                for (src, &tgt) in map.iter().enumerate() {
                    if inner >> src & 1 == 1 {
                        m |= 1 << tgt;
                    }
                }
                m
            }
            _ => panic!("key does not belong to this oracle"),
        }
    }

    /// Step a level-`n` key by σ down to a level-`n-1` key (`n >= 1`);
    /// `None` when σ is inadmissible after histories with this key.
    pub fn step_key(&self, key: &Key, n: usize, sigma: SymbolId) -> Option<Key> {
        debug_assert!(n >= 1);
        if self.key_mask(key, n) >> sigma & 1 == 0 {
            return None;
        }
        if n == 1 {
            return Some(Key::Unit);
        }
        let m = n - 1;
        let stepped = match (&self.kind, key) {
            (OracleKind::Full, Key::Unit) => Key::Unit,
            (OracleKind::Finite { graph, .. }, Key::Finite(q)) => {
                Key::Finite(graph.step(*q, sigma).expect("masked symbol steps"))
            }
            (OracleKind::Monoid(t), Key::Stack { deep, word }) => {
                if t.is_opener(sigma) {
                    let mut w = word.clone();
                    w.push(sigma);
                    if *deep {
                        // Depth stays >= n > m; keep the top m symbols.
                        Key::Stack {
                            deep: true,
                            word: w[w.len() - m..].to_vec(),
                        }
                    } else {
                        normalize_stack(&w, m)
                    }
                } else if *deep {
                    // Top pops; the remaining m known symbols still sit on a
                    // stack of depth >= n - 1 = m.
                    Key::Stack {
                        deep: true,
                        word: word[..word.len() - 1].to_vec(),
                    }
                } else if word.is_empty() {
                    // Absorbed closer.
                    Key::Stack {
                        deep: false,
                        word: Vec::new(),
                    }
                } else {
                    normalize_stack(&word[..word.len() - 1], m)
                }
            }
            (OracleKind::Product { factors, sizes }, Key::Tuple(ks)) => {
                let parts = Alphabet::split_product_id(sigma, sizes);
                let mut out = Vec::with_capacity(ks.len());
                for ((f, k), p) in factors.iter().zip(ks).zip(parts) {
                    out.push(f.step_key(k, n, p)?);
                }
                Key::Tuple(out)
            }
            (OracleKind::Embedding { source, inverse, .. }, k) => {
                source.step_key(k, n, inverse[sigma as usize]?)?
            }
            _ => panic!("key does not belong to this oracle"),
        };
        Some(stepped)
    }

    /// Forget the deepest level of a key: the level-`n-1` key of every
    /// history whose level-`n` key this is.
    pub fn iota_key(&self, key: &Key, n: usize) -> Key {
        debug_assert!(n >= 1);
        if n == 1 {
            return Key::Unit;
        }
        let m = n - 1;
        match (&self.kind, key) {
            (OracleKind::Full, Key::Unit) => Key::Unit,
            (OracleKind::Finite { .. }, k) => k.clone(),
            (OracleKind::Monoid(_), Key::Stack { deep, word }) => {
                if *deep {
                    Key::Stack {
                        deep: true,
                        word: word[1..].to_vec(),
                    }
                } else {
                    normalize_stack(word, m)
                }
            }
            (OracleKind::Product { factors, .. }, Key::Tuple(ks)) => Key::Tuple(
                factors
                    .iter()
                    .zip(ks)
                    .map(|(f, k)| f.iota_key(k, n))
                    .collect(),
            ),
            (OracleKind::Embedding { source, .. }, k) => source.iota_key(k, n),
            _ => panic!("key does not belong to this oracle"),
        }
    }

    /// All `(source, σ)` with `step_key(source, n + 1, σ)` equal to `key` at
    /// level `n`, sorted.  Sources are not filtered for realizability.
    pub fn key_preimages(&self, key: &Key, n: usize) -> Vec<(Key, SymbolId)> {
        let mut out = if n == 0 {
            let mut v = Vec::new();
            for k in self.enumerate_keys(1) {
                let mask = self.key_mask(&k, 1);
                for sigma in self.alphabet.ids() {
                    if mask >> sigma & 1 == 1 {
                        v.push((k.clone(), sigma));
                    }
                }
            }
            v
        } else {
            self.key_preimages_inner(key, n)
        };
        out.sort();
        out.dedup();
        out
    }

    fn key_preimages_inner(&self, key: &Key, n: usize) -> Vec<(Key, SymbolId)> {
        match (&self.kind, key) {
            (OracleKind::Full, Key::Unit) => {
                self.alphabet.ids().map(|s| (Key::Unit, s)).collect()
            }
            (OracleKind::Finite { reverse, .. }, Key::Finite(q)) => reverse[*q]
                .iter()
                .map(|&(p, s)| (Key::Finite(p), s))
                .collect(),
            (OracleKind::Monoid(t), Key::Stack { deep, word }) => {
                monoid_key_preimages(t, *deep, word, n)
            }
            (OracleKind::Product { factors, sizes }, Key::Tuple(ks)) => {
                let per: Vec<Vec<(Key, SymbolId)>> = factors
                    .iter()
                    .zip(ks)
                    .map(|(f, k)| f.key_preimages(k, n))
                    .collect();
                let mut acc: Vec<(Vec<Key>, Vec<SymbolId>)> = vec![(Vec::new(), Vec::new())];
                for coord in &per {
                    let mut next = Vec::with_capacity(acc.len() * coord.len());
                    for (keys, syms) in &acc {
                        for (k, s) in coord {
                            let mut nk = keys.clone();
                            let mut ns = syms.clone();
                            nk.push(k.clone());
                            ns.push(*s);
                            next.push((nk, ns));
                        }
                    }
                    acc = next;
                }
                acc.into_iter()
                    .map(|(keys, syms)| {
                        (Key::Tuple(keys), Alphabet::join_product_id(&syms, sizes))
                    })
                    .collect()
            }
            (OracleKind::Embedding { source, map, .. }, k) => source
                .key_preimages(k, n)
                .into_iter()
                .map(|(p, s)| (p, map[s as usize]))
                .collect(),
            _ => panic!("key does not belong to this oracle"),
        }
    }

    /// A context state whose level-`n` key is `key`.  For a deep stack key
    /// the witness is a stack of depth exactly `n` carrying the recorded top
    /// pattern; deeper stacks would have the same depth-`n` follower set.
    pub fn state_for_key(&self, key: &Key) -> ContextState {
        match (&self.kind, key) {
            (OracleKind::Full, Key::Unit) => ContextState::Unit,
            // The level-0 key of any oracle; every history realizes it.
            (_, Key::Unit) => self.root(),
            (OracleKind::Finite { .. }, Key::Finite(q)) => ContextState::Finite(*q),
            (OracleKind::Monoid(_), Key::Stack { word, .. }) => ContextState::Stack(word.clone()),
            (OracleKind::Product { factors, .. }, Key::Tuple(ks)) => ContextState::Tuple(
                factors
                    .iter()
                    .zip(ks)
                    .map(|(f, k)| f.state_for_key(k))
                    .collect(),
            ),
            (OracleKind::Embedding { source, .. }, k) => source.state_for_key(k),
            _ => panic!("key does not belong to this oracle"),
        }
    }

    /// Number of level-`n` keys (realizable or not), saturating.  Used to
    /// refuse constructions that cannot fit in memory before starting them.
    pub fn estimate_keys(&self, n: usize) -> u128 {
        if n == 0 {
            return 1;
        }
        match &self.kind {
            OracleKind::Full => 1,
            OracleKind::Finite { alive, .. } => alive.iter().filter(|a| **a).count() as u128,
            OracleKind::Monoid(t) => {
                let o = t.opener_count() as u128;
                let mut exact = 0u128;
                if t.closer_count() >= 1 {
                    let mut p = 1u128;
                    for _ in 0..n {
                        exact = exact.saturating_add(p);
                        p = p.saturating_mul(o);
                    }
                }
                let mut deep = 1u128;
                for _ in 0..n {
                    deep = deep.saturating_mul(o);
                }
                exact.saturating_add(deep)
            }
            OracleKind::Product { factors, .. } => factors
                .iter()
                .fold(1u128, |acc, f| acc.saturating_mul(f.estimate_keys(n))),
            OracleKind::Embedding { source, .. } => source.estimate_keys(n),
        }
    }

    /// When the key set is the same finite set at every level (no stack
    /// component anywhere), its size; `None` otherwise.
    pub fn finite_keyed(&self) -> Option<u128> {
        match &self.kind {
            OracleKind::Full => Some(1),
            OracleKind::Finite { alive, .. } => {
                Some(alive.iter().filter(|a| **a).count() as u128)
            }
            OracleKind::Monoid(_) => None,
            OracleKind::Product { factors, .. } => factors
                .iter()
                .try_fold(1u128, |acc, f| {
                    f.finite_keyed().map(|k| acc.saturating_mul(k))
                }),
            OracleKind::Embedding { source, .. } => source.finite_keyed(),
        }
    }

    /// Short human-readable label for a key, used as a vertex name.
    pub fn key_label(&self, key: &Key) -> String {
        match (&self.kind, key) {
            (OracleKind::Full, Key::Unit) => "*".to_string(),
            // Level-0 key of a constrained shift: the one vertex every
            // history reaches.
            (_, Key::Unit) => "*".to_string(),
            (OracleKind::Finite { graph, .. }, Key::Finite(q)) => graph.vertex_names[*q].clone(),
            (OracleKind::Monoid(_), Key::Stack { deep, word }) => {
                let names: Vec<&str> = word.iter().map(|&s| self.alphabet.name(s)).collect();
                if *deep {
                    format!("[..{}]", names.join(""))
                } else {
                    format!("[{}]", names.join(""))
                }
            }
            (OracleKind::Product { factors, .. }, Key::Tuple(ks)) => {
                let parts: Vec<String> = factors
                    .iter()
                    .zip(ks)
                    .map(|(f, k)| f.key_label(k))
                    .collect();
                format!("({})", parts.join(";"))
            }
            (OracleKind::Embedding { source, .. }, k) => source.key_label(k),
            _ => panic!("key does not belong to this oracle"),
        }
    }
}

fn full_mask(len: usize) -> u128 {
    if len >= 128 {
        u128::MAX
    } else {
        (1u128 << len) - 1
    }
}

fn monoid_mask(t: &MonoidTable, top: Option<SymbolId>) -> u128 {
    let mut m = 0u128;
    for s in 0..t.opener_count() as SymbolId {
        m |= 1 << s;
    }
    for c in t.opener_count() as SymbolId..t.alphabet.len() as SymbolId {
        let ok = match top {
            None => true,
            Some(top) => t.pair(top, c) == PairRule::Unit,
        };
        if ok {
            m |= 1 << c;
        }
    }
    m
}

fn normalize_stack(word: &[SymbolId], n: usize) -> Key {
    if word.len() < n {
        Key::Stack {
            deep: false,
            word: word.to_vec(),
        }
    } else {
        Key::Stack {
            deep: true,
            word: word[word.len() - n..].to_vec(),
        }
    }
}

fn push_opener_words(openers: &[SymbolId], len: usize, out: &mut Vec<Key>, deep: bool) {
    let mut word = Vec::with_capacity(len);
    fn rec(openers: &[SymbolId], len: usize, word: &mut Vec<SymbolId>, out: &mut Vec<Key>, deep: bool) {
        if word.len() == len {
            out.push(Key::Stack {
                deep,
                word: word.clone(),
            });
            return;
        }
        for &o in openers {
            word.push(o);
            rec(openers, len, word, out, deep);
            word.pop();
        }
    }
    rec(openers, len, &mut word, out, deep);
}

/// Level-`(n+1)` sources of a level-`n` stack key, by case on how the last
/// symbol acted.
///
/// A pushing symbol σ makes the target stack end in σ, so exactly the
/// nonempty targets whose top is a pushing symbol have pushing preimages;
/// their source drops that top (and, for deep targets, may carry one or two
/// extra unknown-deep symbols that the deeper coarsening forgot).  A closing
/// symbol either popped a matching top — the source appends any unit-paired
/// pushing symbol — or was absorbed on the empty stack.
fn monoid_key_preimages(
    t: &MonoidTable,
    deep: bool,
    word: &[SymbolId],
    n: usize,
) -> Vec<(Key, SymbolId)> {
    let openers: Vec<SymbolId> = (0..t.opener_count() as SymbolId).collect();
    let closers: Vec<SymbolId> = (t.opener_count() as SymbolId..t.alphabet.len() as SymbolId).collect();
    let mut out = Vec::new();
    if !deep {
        // Exact target of depth d < n; sources are exact (depth <= d + 1 <= n).
        if let Some((&last, head)) = word.split_last() {
            // `last` was just pushed.
            out.push((
                Key::Stack {
                    deep: false,
                    word: head.to_vec(),
                },
                last,
            ));
        }
        for &c in &closers {
            if word.is_empty() {
                // Absorbed on the empty stack.
                out.push((
                    Key::Stack {
                        deep: false,
                        word: Vec::new(),
                    },
                    c,
                ));
            }
            for &o in &openers {
                if t.pair(o, c) == PairRule::Unit {
                    let mut w = word.to_vec();
                    w.push(o);
                    out.push((
                        Key::Stack {
                            deep: false,
                            word: w,
                        },
                        c,
                    ));
                }
            }
        }
    } else {
        // Deep target: known top-n slice `word`, true depth >= n.
        let top = *word.last().expect("deep keys have depth n >= 1");
        let head = &word[..word.len() - 1];
        // Push of `top` from depth n - 1 (exact, fully known), depth n
        // (exact, one forgotten deep symbol), or depth >= n + 1 (deep, two
        // forgotten deep symbols).
        out.push((
            Key::Stack {
                deep: false,
                word: head.to_vec(),
            },
            top,
        ));
        for &x in &openers {
            let mut w = vec![x];
            w.extend_from_slice(head);
            out.push((
                Key::Stack {
                    deep: false,
                    word: w.clone(),
                },
                top,
            ));
            for &y in &openers {
                let mut d = vec![x, y];
                d.extend_from_slice(head);
                out.push((
                    Key::Stack {
                        deep: true,
                        word: d[..n + 1].to_vec(),
                    },
                    top,
                ));
            }
        }
        // Pop: the source had one more matching symbol on top.
        for &c in &closers {
            for &o in &openers {
                if t.pair(o, c) == PairRule::Unit {
                    let mut w = word.to_vec();
                    w.push(o);
                    out.push((
                        Key::Stack {
                            deep: true,
                            word: w,
                        },
                        c,
                    ));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monoid::MonoidTable;
    use crate::subshift::Subshift;

    fn d2() -> Oracle {
        Oracle::from_subshift(&Subshift::monoid("d2", MonoidTable::dyck(2))).unwrap()
    }

    fn gamma(k: usize) -> Oracle {
        Oracle::from_subshift(&Subshift::monoid("g", MonoidTable::gamma_extension(k))).unwrap()
    }

    #[test]
    fn dyck_key_counts_double_per_level() {
        let o = d2();
        for n in 0..=5 {
            assert_eq!(o.enumerate_keys(n).len(), (1 << (n + 1)) - 1, "level {n}");
        }
    }

    #[test]
    fn gamma_key_count_matches_branching() {
        // 1 + 3 + 9 exact + 27 deep for one extra generator pair.
        assert_eq!(gamma(1).enumerate_keys(3).len(), 40);
    }

    #[test]
    fn bracket_states_separate_at_depth_one() {
        let o = d2();
        let a = o.run(&[0]).unwrap();
        let b = o.run(&[1]).unwrap();
        assert!(o.depth_n_equivalent(&a, &b, 0));
        assert!(!o.depth_n_equivalent(&a, &b, 1));
        // ")1" (symbol 3) is admissible after "(1" but not after "(0".
        assert_eq!(o.subordinate_to_depth(&b, &a, 1), Err(vec![3]));
    }

    #[test]
    fn gamma_opener_dominates_plain_opener() {
        let o = gamma(1);
        let a = o.run(&[0]).unwrap(); // a-
        let g = o.run(&[2]).unwrap(); // g1-
        assert_eq!(o.subordinate_to_depth(&a, &g, 2), Ok(()));
        // b+ (symbol 4) pops g1- but not a-.
        assert_eq!(o.subordinate_to_depth(&g, &a, 2), Err(vec![4]));
    }

    #[test]
    fn absorbed_closers_leave_no_trace() {
        let o = d2();
        assert_eq!(o.run(&[2, 3]), Some(ContextState::Stack(vec![])));
        assert_eq!(
            o.key_of_word(&[3, 3, 3, 0], 2),
            o.key_of_word(&[0], 2),
        );
        assert_eq!(
            o.key_of_word(&[0], 2),
            Some(Key::Stack {
                deep: false,
                word: vec![0]
            })
        );
    }

    #[test]
    fn tall_stacks_coarsen_to_their_top() {
        let o = d2();
        assert_eq!(
            o.key_of_word(&[0, 1, 0, 1], 2),
            Some(Key::Stack {
                deep: true,
                word: vec![0, 1]
            })
        );
        assert_eq!(o.key_of_word(&[0, 1, 0, 1], 0), Some(Key::Unit));
    }

    #[test]
    fn follower_keys_use_the_eventual_image() {
        let alphabet = Alphabet::new(["0", "1"]).unwrap();
        let golden = Subshift::sft("gm", alphabet, &[vec![1, 1]]).unwrap();
        let o = Oracle::from_subshift(&golden).unwrap();
        // Only the two singleton follower sets survive; the full start set
        // is transient.
        assert_eq!(o.enumerate_keys(1).len(), 2);
        assert_eq!(o.enumerate_keys(4).len(), 2);
        let after_one = o.run(&[1]).unwrap();
        // After "1" only "0" may follow.
        assert_eq!(o.state_mask(&after_one), 0b01);
    }

    #[test]
    fn product_keys_multiply() {
        let shift = Subshift::product(
            "d2xd2",
            vec![
                Subshift::monoid("d2", MonoidTable::dyck(2)),
                Subshift::monoid("d2", MonoidTable::dyck(2)),
            ],
        )
        .unwrap();
        let o = Oracle::from_subshift(&shift).unwrap();
        assert_eq!(o.enumerate_keys(1).len(), 9);
        assert_eq!(o.enumerate_keys(2).len(), 49);
    }

    #[test]
    fn embedded_masks_land_on_translated_symbols() {
        let g1 = MonoidTable::gamma_extension(1);
        let d2_in_g1 = Subshift::embedding(
            "d2-in-g1",
            Subshift::monoid("d2", MonoidTable::dyck(2)),
            g1.alphabet.clone(),
            vec![0, 1, 3, 4], // a-, b-, a+, b+
        )
        .unwrap();
        let o = Oracle::from_subshift(&d2_in_g1).unwrap();
        let root_key = o.key_of_word(&[], 1).unwrap();
        // Openers a-, b- and absorbed closers a+, b+; no gamma symbols.
        assert_eq!(o.key_mask(&root_key, 1), 0b011011);
    }

    #[test]
    fn preimages_invert_steps() {
        let product = Subshift::product(
            "mix",
            vec![
                Subshift::monoid("d2", MonoidTable::dyck(2)),
                Subshift::full("f2", Alphabet::new(["a", "b"]).unwrap()),
            ],
        )
        .unwrap();
        for oracle in [d2(), gamma(1), Oracle::from_subshift(&product).unwrap()] {
            for n in 0..=3usize {
                // Every claimed preimage steps back onto the key.
                for key in oracle.enumerate_keys(n) {
                    for (src, sigma) in oracle.key_preimages(&key, n) {
                        assert_eq!(
                            oracle.step_key(&src, n + 1, sigma),
                            Some(key.clone()),
                            "level {n}"
                        );
                    }
                }
                // Every admissible step appears among its target's preimages.
                for src in oracle.enumerate_keys(n + 1) {
                    let mask = oracle.key_mask(&src, n + 1);
                    for sigma in oracle.alphabet().ids() {
                        if mask >> sigma & 1 == 0 {
                            continue;
                        }
                        let target = oracle.step_key(&src, n + 1, sigma).unwrap();
                        let pre = oracle.key_preimages(&target, n);
                        assert!(
                            pre.contains(&(src.clone(), sigma)),
                            "missing preimage at level {n}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn iota_commutes_with_running_words() {
        let o = d2();
        for w in [vec![], vec![0], vec![0, 1], vec![0, 0, 1, 3], vec![3, 0, 1]] {
            for n in 1..=4usize {
                let fine = o.key_of_word(&w, n).unwrap();
                let coarse = o.key_of_word(&w, n - 1).unwrap();
                assert_eq!(o.iota_key(&fine, n), coarse);
            }
        }
    }
}
