//! Leveled presentations: finite levels of vertices joined by a depth-
//! forgetting map ι and symbol-reading edges that descend one level.
//!
//! Level `n` vertices stand for depth-`n` follower classes; an edge
//! `v --σ--> w` from level `n` to level `n-1` says that after σ the depth of
//! reliable knowledge shrinks by one, and `ι` forgets the deepest layer
//! directly.  A well-formed system is right-resolving at every level, has no
//! isolated vertices, has surjective ι, and its edges commute with ι.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::alphabet::{Alphabet, SymbolId, Word};
use crate::shannon::{ForwardContext, ShannonGraph};

/// One level of a leveled presentation.
#[derive(Debug, Clone, Serialize)]
pub struct Level {
    pub vertex_names: Vec<String>,
    /// `iota[v]` is the vertex one level down that `v` refines.  Empty at
    /// level 0.
    pub iota: Vec<usize>,
    /// `(source, symbol, target)` with the source at this level and the
    /// target one level down.  Empty at level 0.
    pub edges: Vec<(usize, SymbolId, usize)>,
}

impl Level {
    pub fn vertex_count(&self) -> usize {
        self.vertex_names.len()
    }

    /// Per-vertex successor map; meaningful on well-formed levels only.
    pub fn step_map(&self) -> Vec<BTreeMap<SymbolId, usize>> {
        let mut steps = vec![BTreeMap::new(); self.vertex_count()];
        for &(u, s, v) in &self.edges {
            steps[u].insert(s, v);
        }
        steps
    }
}

/// A leveled presentation of a subshift (levels `0..=N`).
#[derive(Debug, Clone, Serialize)]
pub struct LambdaGraphSystem {
    pub name: String,
    pub alphabet: Alphabet,
    /// `levels[n]` is level `n`; `levels[0]` is the single-vertex bottom in
    /// every system this crate builds.
    pub levels: Vec<Level>,
    /// Vertex sets were certified only up to a finite horizon and may shrink
    /// under a larger buffer.
    pub approximate: bool,
    /// Every surviving vertex has an incoming path at least this long.
    pub certified_path_length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LgsError {
    #[error("a leveled system needs at least levels 0 and 1 (got {0} levels)")]
    TooFewLevels(usize),
    #[error("level {level}: empty vertex set")]
    EmptyLevel { level: usize },
    #[error("level {level}: iota has {got} entries for {expected} vertices")]
    IotaLength {
        level: usize,
        got: usize,
        expected: usize,
    },
    #[error("level {level}: iota sends vertex {vertex} to {target}, past the {limit} vertices below")]
    IotaRange {
        level: usize,
        vertex: usize,
        target: usize,
        limit: usize,
    },
    #[error("level {level}: vertex {vertex} is not an iota-image")]
    IotaNotSurjective { level: usize, vertex: usize },
    #[error("level {level}: edge ({from}, {label}, {target}) leaves the vertex ranges")]
    EdgeRange {
        level: usize,
        from: usize,
        label: SymbolId,
        target: usize,
    },
    #[error("level {level}: vertex {vertex} has two edges labeled {label}")]
    NotRightResolving {
        level: usize,
        vertex: usize,
        label: SymbolId,
    },
    #[error("level {level}: vertex {vertex} has no outgoing edge")]
    MissingOutgoing { level: usize, vertex: usize },
    #[error("level {level}: vertex {vertex} has no incoming edge")]
    MissingIncoming { level: usize, vertex: usize },
    #[error(
        "level {level}: vertex {vertex} disagrees with its iota-image under {label} \
         (stepping then forgetting gives {down_then_forget:?}, forgetting then stepping {forget_then_down:?})"
    )]
    CommutationFailure {
        level: usize,
        vertex: usize,
        label: SymbolId,
        down_then_forget: Option<usize>,
        forget_then_down: Option<usize>,
    },
    #[error("matrix dimensions {lr}x{lc} and {rr}x{rc} do not compose")]
    DimensionMismatch {
        lr: usize,
        lc: usize,
        rr: usize,
        rc: usize,
    },
}

impl LambdaGraphSystem {
    /// Number of levels above the bottom.
    pub fn top_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn vertex_counts(&self) -> Vec<usize> {
        self.levels.iter().map(Level::vertex_count).collect()
    }

    pub fn edge_counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.edges.len()).collect()
    }

    /// Total number of label paths from each level down to level 0.
    pub fn path_counts(&self) -> Vec<u128> {
        let mut per_level = Vec::with_capacity(self.levels.len());
        let mut below: Vec<u128> = vec![1; self.levels[0].vertex_count()];
        per_level.push(below.iter().sum());
        for level in &self.levels[1..] {
            let mut here = vec![0u128; level.vertex_count()];
            for &(u, _, v) in &level.edges {
                here[u] += below[v];
            }
            per_level.push(here.iter().sum());
            below = here;
        }
        per_level
    }

    /// Words readable from `vertex` at `level` down to the bottom (length
    /// exactly `level`).  Exponential in the level; meant for the small
    /// systems that the conjugacy-witness machinery inspects.
    pub fn vertex_context(&self, level: usize, vertex: usize) -> ForwardContext {
        let mut below: Vec<ForwardContext> = (0..self.levels[0].vertex_count())
            .map(|_| [Word::new()].into_iter().collect())
            .collect();
        for l in 1..=level {
            let lv = &self.levels[l];
            let mut here: Vec<ForwardContext> = vec![BTreeSet::new(); lv.vertex_count()];
            for &(u, s, v) in &lv.edges {
                for w in &below[v] {
                    let mut word = vec![s];
                    word.extend_from_slice(w);
                    here[u].insert(word);
                }
            }
            below = here;
        }
        below[vertex].clone()
    }

    pub fn counts_csv(&self) -> String {
        let mut out = String::from("level,vertex_count,edge_count\n");
        for (n, level) in self.levels.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", n, level.vertex_count(), level.edges.len()));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain data serializes")
    }

    /// Graphviz rendering of levels `0..=max_level` (capped for legibility).
    pub fn to_dot(&self, max_level: usize) -> String {
        let top = max_level.min(self.top_level());
        let mut out = String::new();
        out.push_str("digraph levels {\n  rankdir=TB;\n");
        for n in (0..=top).rev() {
            let level = &self.levels[n];
            out.push_str(&format!("  subgraph cluster_{n} {{\n    label=\"level {n}\";\n"));
            for (v, name) in level.vertex_names.iter().enumerate() {
                out.push_str(&format!(
                    "    v{n}_{v} [label=\"{}\"];\n",
                    name.replace('"', "'")
                ));
            }
            out.push_str("  }\n");
        }
        for n in 1..=top {
            let level = &self.levels[n];
            for (v, &down) in level.iota.iter().enumerate() {
                out.push_str(&format!(
                    "  v{n}_{v} -> v{}_{down} [style=dashed, arrowhead=empty];\n",
                    n - 1
                ));
            }
            for &(u, s, w) in &level.edges {
                out.push_str(&format!(
                    "  v{n}_{u} -> v{}_{w} [label=\"{}\"];\n",
                    n - 1,
                    self.alphabet.name(s).replace('"', "'")
                ));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Edges of one level grouped by source vertex and sorted by label, for
/// allocation-lean successor lookups on large levels.
struct EdgeIndex {
    offsets: Vec<usize>,
    rows: Vec<(SymbolId, usize)>,
}

impl EdgeIndex {
    fn new(vertices: usize, edges: &[(usize, SymbolId, usize)]) -> EdgeIndex {
        let mut offsets = vec![0usize; vertices + 1];
        for &(u, _, _) in edges {
            offsets[u + 1] += 1;
        }
        for i in 1..offsets.len() {
            offsets[i] += offsets[i - 1];
        }
        let mut cursor = offsets.clone();
        let mut rows = vec![(0 as SymbolId, 0usize); edges.len()];
        for &(u, s, w) in edges {
            rows[cursor[u]] = (s, w);
            cursor[u] += 1;
        }
        for v in 0..vertices {
            rows[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        EdgeIndex { offsets, rows }
    }

    fn step(&self, v: usize, s: SymbolId) -> Option<usize> {
        let row = &self.rows[self.offsets[v]..self.offsets[v + 1]];
        row.binary_search_by_key(&s, |&(l, _)| l).ok().map(|i| row[i].1)
    }
}

/// Check the well-formedness axioms level by level; collects up to 32
/// violations.
///
/// Everything is done in streaming passes over the edge lists with per-vertex
/// label bitmasks, so systems with tens of millions of edges validate without
/// materializing per-edge maps.
pub fn validate_lgs(sys: &LambdaGraphSystem) -> Result<(), Vec<LgsError>> {
    let mut errors = Vec::new();
    let push = |errors: &mut Vec<LgsError>, e: LgsError| -> bool {
        errors.push(e);
        errors.len() >= 32
    };
    if sys.levels.len() < 2 {
        return Err(vec![LgsError::TooFewLevels(sys.levels.len())]);
    }
    for (n, level) in sys.levels.iter().enumerate() {
        if level.vertex_count() == 0 && push(&mut errors, LgsError::EmptyLevel { level: n }) {
            return Err(errors);
        }
    }
    // Structural bounds first; later passes assume them.
    for n in 1..sys.levels.len() {
        let level = &sys.levels[n];
        let below = sys.levels[n - 1].vertex_count();
        if level.iota.len() != level.vertex_count() {
            errors.push(LgsError::IotaLength {
                level: n,
                got: level.iota.len(),
                expected: level.vertex_count(),
            });
            continue;
        }
        for (v, &t) in level.iota.iter().enumerate() {
            if t >= below
                && push(
                    &mut errors,
                    LgsError::IotaRange {
                        level: n,
                        vertex: v,
                        target: t,
                        limit: below,
                    },
                )
            {
                return Err(errors);
            }
        }
        for &(u, s, w) in &level.edges {
            if (u >= level.vertex_count() || w >= below || s as usize >= sys.alphabet.len())
                && push(
                    &mut errors,
                    LgsError::EdgeRange {
                        level: n,
                        from: u,
                        label: s,
                        target: w,
                    },
                )
            {
                return Err(errors);
            }
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    // Label masks and grouped edges of the level below, maintained across
    // iterations.  The topmost level never needs its own grouped copy.
    let mut masks_below: Vec<u128> = Vec::new();
    let mut index_below: Option<EdgeIndex> = None;
    for n in 1..sys.levels.len() {
        let level = &sys.levels[n];
        let below = sys.levels[n - 1].vertex_count();
        let mut masks_here = vec![0u128; level.vertex_count()];
        let mut incoming = vec![false; below];
        for &(u, s, w) in &level.edges {
            incoming[w] = true;
            if masks_here[u] >> s & 1 == 1
                && push(
                    &mut errors,
                    LgsError::NotRightResolving {
                        level: n,
                        vertex: u,
                        label: s,
                    },
                )
            {
                return Err(errors);
            }
            masks_here[u] |= 1 << s;
        }
        for (v, &mask) in masks_here.iter().enumerate() {
            if mask == 0 && push(&mut errors, LgsError::MissingOutgoing { level: n, vertex: v }) {
                return Err(errors);
            }
        }
        for (w, ok) in incoming.iter().enumerate() {
            if !ok && push(&mut errors, LgsError::MissingIncoming { level: n - 1, vertex: w }) {
                return Err(errors);
            }
        }
        let mut image = vec![false; below];
        for &t in &level.iota {
            image[t] = true;
        }
        for (w, ok) in image.iter().enumerate() {
            if !ok
                && push(
                    &mut errors,
                    LgsError::IotaNotSurjective { level: n - 1, vertex: w },
                )
            {
                return Err(errors);
            }
        }
        // Edges must commute with ι: stepping then forgetting agrees with
        // forgetting then stepping.  Only checkable where the level below
        // has its own edges.
        if n >= 2 {
            let lower = index_below.as_ref().expect("set on previous iteration");
            let iota_here = &level.iota;
            let iota_below = &sys.levels[n - 1].iota;
            for &(v, s, w) in &level.edges {
                let down_then_forget = iota_below[w];
                match lower.step(iota_here[v], s) {
                    Some(t) if t == down_then_forget => {}
                    forget_then_down => {
                        if push(
                            &mut errors,
                            LgsError::CommutationFailure {
                                level: n,
                                vertex: v,
                                label: s,
                                down_then_forget: Some(down_then_forget),
                                forget_then_down,
                            },
                        ) {
                            return Err(errors);
                        }
                    }
                }
            }
            for (v, &mask) in masks_here.iter().enumerate() {
                let mut missing = masks_below[iota_here[v]] & !mask;
                while missing != 0 {
                    let s = missing.trailing_zeros() as SymbolId;
                    missing &= missing - 1;
                    if push(
                        &mut errors,
                        LgsError::CommutationFailure {
                            level: n,
                            vertex: v,
                            label: s,
                            down_then_forget: None,
                            forget_then_down: lower.step(iota_here[v], s),
                        },
                    ) {
                        return Err(errors);
                    }
                }
            }
        }
        if n + 1 < sys.levels.len() {
            index_below = Some(EdgeIndex::new(level.vertex_count(), &level.edges));
            masks_below = masks_here;
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// Multiset of words, the entry type of symbolic matrices.
pub type WordMultiset = BTreeMap<Word, usize>;

/// Sparse matrix over word multisets; the product concatenates words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: BTreeMap<(usize, usize), WordMultiset>,
}

impl SymbolicMatrix {
    pub fn zero(rows: usize, cols: usize) -> SymbolicMatrix {
        SymbolicMatrix {
            rows,
            cols,
            entries: BTreeMap::new(),
        }
    }

    pub fn add_word(&mut self, row: usize, col: usize, word: Word, multiplicity: usize) {
        if multiplicity == 0 {
            return;
        }
        *self
            .entries
            .entry((row, col))
            .or_default()
            .entry(word)
            .or_insert(0) += multiplicity;
    }

    pub fn entry(&self, row: usize, col: usize) -> Option<&WordMultiset> {
        self.entries.get(&(row, col))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &WordMultiset)> {
        self.entries.iter()
    }

    pub fn nonzero_count(&self) -> usize {
        self.entries.len()
    }

    /// Apply a word map entrywise (e.g. a letter-by-letter recoding).
    pub fn map_words(&self, f: impl Fn(&Word) -> Word) -> SymbolicMatrix {
        let mut out = SymbolicMatrix::zero(self.rows, self.cols);
        for (&(i, j), ws) in &self.entries {
            for (w, &m) in ws {
                out.add_word(i, j, f(w), m);
            }
        }
        out
    }

    pub fn render_entry(ws: &WordMultiset, alphabet: &Alphabet) -> String {
        let mut parts = Vec::new();
        for (w, &m) in ws {
            let body = if w.is_empty() {
                "1".to_string()
            } else {
                alphabet.format_word(w)
            };
            if m == 1 {
                parts.push(body);
            } else {
                parts.push(format!("{m}*{body}"));
            }
        }
        parts.join(" + ")
    }
}

/// Multiply symbolic matrices, concatenating words.  An identity-selector
/// matrix (empty-word entries) just routes the other factor's words through.
pub fn symbolic_matmul(a: &SymbolicMatrix, b: &SymbolicMatrix) -> Result<SymbolicMatrix, LgsError> {
    if a.cols != b.rows {
        return Err(LgsError::DimensionMismatch {
            lr: a.rows,
            lc: a.cols,
            rr: b.rows,
            rc: b.cols,
        });
    }
    let mut b_rows: Vec<Vec<(usize, &WordMultiset)>> = vec![Vec::new(); b.rows];
    for (&(k, j), ws) in &b.entries {
        b_rows[k].push((j, ws));
    }
    let mut out = SymbolicMatrix::zero(a.rows, b.cols);
    for (&(i, k), wa) in &a.entries {
        for &(j, wb) in &b_rows[k] {
            for (u, &mu) in wa {
                for (v, &mv) in wb {
                    let mut w = u.clone();
                    w.extend_from_slice(v);
                    out.add_word(i, j, w, mu * mv);
                }
            }
        }
    }
    Ok(out)
}

/// Extract the symbol matrix `M` and the ι-selector matrix `I` for the step
/// from `level` down to `level - 1`.
pub fn extract_sms(sys: &LambdaGraphSystem, level: usize) -> (SymbolicMatrix, SymbolicMatrix) {
    let lv = &sys.levels[level];
    let below = sys.levels[level - 1].vertex_count();
    let mut m = SymbolicMatrix::zero(lv.vertex_count(), below);
    for &(u, s, w) in &lv.edges {
        m.add_word(u, w, vec![s], 1);
    }
    let mut i = SymbolicMatrix::zero(lv.vertex_count(), below);
    for (v, &t) in lv.iota.iter().enumerate() {
        i.add_word(v, t, Word::new(), 1);
    }
    (m, i)
}

/// First witness that `M_up * I_low != I_up * M_low`, if any.
pub fn check_commutation(
    m_up: &SymbolicMatrix,
    i_up: &SymbolicMatrix,
    m_low: &SymbolicMatrix,
    i_low: &SymbolicMatrix,
) -> Result<(), String> {
    let left = symbolic_matmul(m_up, i_low).map_err(|e| e.to_string())?;
    let right = symbolic_matmul(i_up, m_low).map_err(|e| e.to_string())?;
    if left == right {
        return Ok(());
    }
    let keys: BTreeSet<(usize, usize)> = left
        .entries
        .keys()
        .chain(right.entries.keys())
        .copied()
        .collect();
    for key in keys {
        if left.entry(key.0, key.1) != right.entry(key.0, key.1) {
            return Err(format!(
                "entry ({}, {}): M*I gives {:?}, I*M gives {:?}",
                key.0,
                key.1,
                left.entry(key.0, key.1),
                right.entry(key.0, key.1)
            ));
        }
    }
    Err("matrices differ".to_string())
}

/// Collapse the level structure to a single right-resolving graph on the
/// top-level vertices: each vertex stands for its whole ι-chain, a symbol
/// steps every chain component down, and the lost top level is refilled by
/// the smallest-index ι-preimage of the stepped top vertex.
pub fn iota_orbit_transitions(sys: &LambdaGraphSystem) -> Result<ShannonGraph, String> {
    let top = sys.top_level();
    if top == 0 {
        return Err("system has no levels above the bottom".to_string());
    }
    let level = &sys.levels[top];
    let steps = level.step_map();
    // Smallest ι-preimage per top-level vertex image.
    let mut lift: Vec<Option<usize>> = vec![None; sys.levels[top - 1].vertex_count()];
    for (v, &t) in level.iota.iter().enumerate() {
        if lift[t].is_none() {
            lift[t] = Some(v);
        }
    }
    let mut edges = Vec::new();
    for v in 0..level.vertex_count() {
        for (&s, &w) in &steps[v] {
            let lifted = lift[w].ok_or_else(|| {
                format!("vertex {w} below the top has no ι-preimage; validate first")
            })?;
            edges.push((v, s, lifted));
        }
    }
    ShannonGraph::new(sys.alphabet.clone(), level.vertex_names.clone(), edges)
        .map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-level system: level 1 has vertices {p, q}, level 0 one vertex.
    /// p reads 0 and 1, q reads 0 only.
    fn tiny() -> LambdaGraphSystem {
        LambdaGraphSystem {
            name: "tiny".into(),
            alphabet: Alphabet::new(["0", "1"]).unwrap(),
            levels: vec![
                Level {
                    vertex_names: vec!["*".into()],
                    iota: vec![],
                    edges: vec![],
                },
                Level {
                    vertex_names: vec!["p".into(), "q".into()],
                    iota: vec![0, 0],
                    edges: vec![(0, 0, 0), (0, 1, 0), (1, 0, 0)],
                },
            ],
            approximate: false,
            certified_path_length: 0,
        }
    }

    /// Three levels of the golden-mean pattern: level n distinguishes the
    /// last n symbols' constraint.
    fn golden_three_levels() -> LambdaGraphSystem {
        // Level 1 and 2 both have states A (free) and B (must read 0).
        let l0 = Level {
            vertex_names: vec!["*".into()],
            iota: vec![],
            edges: vec![],
        };
        let l1 = Level {
            vertex_names: vec!["A".into(), "B".into()],
            iota: vec![0, 0],
            edges: vec![(0, 0, 0), (0, 1, 0), (1, 0, 0)],
        };
        let l2 = Level {
            vertex_names: vec!["A".into(), "B".into()],
            iota: vec![0, 1],
            edges: vec![(0, 0, 0), (0, 1, 1), (1, 0, 0)],
        };
        LambdaGraphSystem {
            name: "gm3".into(),
            alphabet: Alphabet::new(["0", "1"]).unwrap(),
            levels: vec![l0, l1, l2],
            approximate: false,
            certified_path_length: 0,
        }
    }

    #[test]
    fn valid_systems_pass() {
        assert_eq!(validate_lgs(&tiny()), Ok(()));
        assert_eq!(validate_lgs(&golden_three_levels()), Ok(()));
    }

    #[test]
    fn missing_incoming_is_reported() {
        let mut sys = tiny();
        sys.levels[1].edges.retain(|&(u, _, _)| u != 1);
        let errs = validate_lgs(&sys).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, LgsError::MissingOutgoing { level: 1, vertex: 1 })));
    }

    #[test]
    fn double_label_is_reported() {
        let mut sys = tiny();
        sys.levels[1].edges.push((0, 0, 0));
        let errs = validate_lgs(&sys).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, LgsError::NotRightResolving { vertex: 0, label: 0, .. })));
    }

    #[test]
    fn broken_iota_surjectivity_is_reported() {
        let mut sys = golden_three_levels();
        sys.levels[2].iota = vec![0, 0];
        let errs = validate_lgs(&sys).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, LgsError::IotaNotSurjective { level: 1, vertex: 1 })));
    }

    #[test]
    fn commutation_violation_is_reported() {
        let mut sys = golden_three_levels();
        // Let B read 1 at level 2; its ι-image below still reads only 0, so
        // the label sets of v and ι(v) disagree.
        sys.levels[2].edges = vec![(0, 0, 0), (0, 1, 1), (1, 1, 0)];
        let errs = validate_lgs(&sys).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, LgsError::CommutationFailure { level: 2, vertex: 1, .. })));
    }

    #[test]
    fn extracted_matrices_commute() {
        let sys = golden_three_levels();
        let (m2, i2) = extract_sms(&sys, 2);
        let (m1, i1) = extract_sms(&sys, 1);
        assert_eq!(check_commutation(&m2, &i2, &m1, &i1), Ok(()));
        // Sanity: the product M2*I1 lists one single-symbol word per path.
        let prod = symbolic_matmul(&m2, &i1).unwrap();
        let entry = prod.entry(0, 0).unwrap();
        assert_eq!(entry.get(&vec![0]).copied(), Some(1));
        assert_eq!(entry.get(&vec![1]).copied(), Some(1));
    }

    #[test]
    fn matmul_concatenates_and_distributes() {
        // a = [ {x} {y} ], b = [ {w}, {} ], alphabet {x, y, w}.
        let mut a = SymbolicMatrix::zero(1, 2);
        a.add_word(0, 0, vec![0], 1);
        a.add_word(0, 1, vec![1], 1);
        let mut b = SymbolicMatrix::zero(2, 1);
        b.add_word(0, 0, vec![2], 1);
        b.add_word(1, 0, vec![2], 2);
        let ab = symbolic_matmul(&a, &b).unwrap();
        let entry = ab.entry(0, 0).unwrap();
        assert_eq!(entry.get(&vec![0, 2]).copied(), Some(1));
        assert_eq!(entry.get(&vec![1, 2]).copied(), Some(2));
        // Selector matrices route words through unchanged.
        let mut sel = SymbolicMatrix::zero(1, 1);
        sel.add_word(0, 0, Word::new(), 1);
        assert_eq!(symbolic_matmul(&ab, &sel).unwrap(), ab);
    }

    #[test]
    fn matmul_is_associative_on_a_small_case() {
        let mut a = SymbolicMatrix::zero(2, 2);
        a.add_word(0, 0, vec![0], 1);
        a.add_word(0, 1, vec![1], 1);
        a.add_word(1, 0, vec![0], 2);
        let b = a.clone();
        let mut c = SymbolicMatrix::zero(2, 1);
        c.add_word(0, 0, vec![1], 1);
        c.add_word(1, 0, vec![0, 0], 1);
        let left = symbolic_matmul(&symbolic_matmul(&a, &b).unwrap(), &c).unwrap();
        let right = symbolic_matmul(&a, &symbolic_matmul(&b, &c).unwrap()).unwrap();
        assert_eq!(left, right);
    }

    #[test]
    fn path_counts_follow_edges() {
        let sys = golden_three_levels();
        // Level 1: A reads 2 words, B reads 1. Level 2: A -> 0A|1B, B -> 0A.
        assert_eq!(sys.path_counts(), vec![1, 3, 5]);
        assert_eq!(sys.vertex_counts(), vec![1, 2, 2]);
    }

    #[test]
    fn contexts_list_readable_words() {
        let sys = golden_three_levels();
        let ctx_a = sys.vertex_context(2, 0);
        let words: Vec<Word> = ctx_a.into_iter().collect();
        assert_eq!(words, vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        let ctx_b = sys.vertex_context(2, 1);
        assert_eq!(ctx_b.len(), 2);
    }

    #[test]
    fn orbit_transitions_are_right_resolving_and_lift_minimally() {
        let sys = golden_three_levels();
        let g = iota_orbit_transitions(&sys).unwrap();
        assert_eq!(g.vertex_count(), 2);
        // A -0-> lift(A)=A, A -1-> lift(B)=B, B -0-> lift(A)=A.
        assert_eq!(g.step(0, 0), Some(0));
        assert_eq!(g.step(0, 1), Some(1));
        assert_eq!(g.step(1, 0), Some(0));
        assert_eq!(g.step(1, 1), None);
    }

    #[test]
    fn csv_lists_levels() {
        let csv = golden_three_levels().counts_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(3).unwrap().starts_with("2,2,3"));
    }
}
