//! Word-enumeration reference constructions.
//!
//! Everything here works from the admissibility oracle alone: enumerate the
//! admissible context words up to a length bound, attach to each the set of
//! words of each length `m ≤ n` that may follow it, build the derivative
//! graph on those follower sets, and keep the part with incoming paths of
//! every available length.  No context keys, classes or presentation
//! internals are consulted, so the results cross-check the structural
//! builders.
//!
//! Follower sets are stored as sorted vectors of packed words (7 bits per
//! symbol), and the derivative of a stored set is computed once per
//! (set, symbol) pair.  Only the deepest level needs fresh admissibility
//! queries per context word: the level-`m` follower set of `b·σ` is exactly
//! the `σ`-derivative of the level-`m+1` set of `b`, so lower levels are
//! set arithmetic.
//!
//! For products the enumeration runs per coordinate, and coordinate results
//! are recombined: a tuple of coordinate follower sets is realized exactly
//! when the coordinates share a realizing context length (realization
//! lengths are tracked per set), and survival is evaluated on the recombined
//! graph.  The pair variant tracks (context length, ambient context length)
//! profiles the same way.

use std::collections::{BTreeSet, HashMap};

use crate::alphabet::{Alphabet, SymbolId, Word};
use crate::lgs::{LambdaGraphSystem, Level};
use crate::subshift::{ShiftKind, Subshift};

use super::pair::{factor_pair, PairLgs};
use super::{BuildError, BuilderConfig, KEY_BUDGET};

const SYM_BITS: u32 = 7;
/// Longest context word the packed representation holds.
const MAX_PACKED: usize = 18;

/// Pack a word, first symbol in the highest bits, so that integer order on
/// packed words of equal length is lexicographic order.
pub fn pack_word(w: &[SymbolId]) -> u128 {
    let mut p = 0u128;
    for &s in w {
        debug_assert!(s < 1 << SYM_BITS);
        p = p << SYM_BITS | s as u128;
    }
    p
}

fn unpack_word(mut p: u128, len: usize) -> Word {
    let mut w = vec![0; len];
    for slot in w.iter_mut().rev() {
        *slot = (p & 0x7f) as SymbolId;
        p >>= SYM_BITS;
    }
    w
}

/// Words of `value` (all of length `len`) that start with `sigma`, with that
/// first symbol stripped.  Sorted in, sorted out.
fn derivative(value: &[u128], len: usize, sigma: SymbolId) -> Vec<u128> {
    debug_assert!(len >= 1);
    let shift = SYM_BITS * (len as u32 - 1);
    let lo = (sigma as u128) << shift;
    let hi = (sigma as u128 + 1) << shift;
    let a = value.partition_point(|&w| w < lo);
    let b = value.partition_point(|&w| w < hi);
    value[a..b].iter().map(|&w| w - lo).collect()
}

/// Drop the last symbol of every word; the truncation of a follower set one
/// level down.
fn truncate_value(value: &[u128]) -> Vec<u128> {
    let mut out: Vec<u128> = value.iter().map(|&w| w >> SYM_BITS).collect();
    out.dedup();
    out
}

/// First symbols occurring in a set of words of length `len`.
fn heads(value: &[u128], len: usize) -> Vec<SymbolId> {
    let shift = SYM_BITS * (len as u32 - 1);
    let mut out: Vec<SymbolId> = value.iter().map(|&w| (w >> shift) as SymbolId).collect();
    out.dedup();
    out
}

fn is_subset(smaller: &[u128], larger: &[u128]) -> bool {
    let mut it = larger.iter();
    'outer: for &w in smaller {
        for &v in it.by_ref() {
            if v == w {
                continue 'outer;
            }
            if v > w {
                return false;
            }
        }
        return false;
    }
    true
}

#[derive(Default)]
struct Interner {
    values: Vec<Vec<u128>>,
    ids: HashMap<Vec<u128>, u32>,
}

impl Interner {
    fn intern(&mut self, v: Vec<u128>) -> u32 {
        if let Some(&id) = self.ids.get(&v) {
            return id;
        }
        let id = self.values.len() as u32;
        self.ids.insert(v.clone(), id);
        self.values.push(v);
        id
    }

    fn lookup(&self, v: &[u128]) -> Option<u32> {
        self.ids.get(v).copied()
    }

    fn value(&self, id: u32) -> &[u128] {
        &self.values[id as usize]
    }
}

fn packed_words_of_length(shift: &Subshift, len: usize) -> Vec<u128> {
    shift
        .words_of_length(len)
        .iter()
        .map(|w| pack_word(w))
        .collect()
}

// ---------------------------------------------------------------------------
// Single-shift reference
// ---------------------------------------------------------------------------

/// Reference data: surviving follower values per level, plus the assembled
/// system.  For products `levels` is left empty and `coords` carries the
/// per-coordinate results the product was recombined from.
pub struct BruteLevels {
    /// Per level, the surviving truncated-follower sets, each a sorted list
    /// of packed words of the level's length.
    pub levels: Vec<Vec<Vec<u128>>>,
    pub counts: Vec<usize>,
    pub coords: Vec<BruteLevels>,
    pub system: LambdaGraphSystem,
}

/// Per-level interned follower values with realization-length masks,
/// id-sorted by value so downstream output is deterministic.
struct SingleCore {
    values: Vec<Vec<Vec<u128>>>,
    /// `masks[m][id]`: bit `i` set when a context of length `i` realizes the
    /// value.
    masks: Vec<Vec<u64>>,
    top: usize,
}

fn single_core(shift: &Subshift, top: usize, bound: usize) -> Result<SingleCore, BuildError> {
    if top == 0 {
        return Err(BuildError::BadConfig(
            "at least one level is required".into(),
        ));
    }
    if bound < top {
        return Err(BuildError::BadConfig(format!(
            "context bound {bound} is shorter than the requested depth {top}"
        )));
    }
    if bound > MAX_PACKED {
        return Err(BuildError::BadConfig(format!(
            "context bound {bound} exceeds the packed-word limit of {MAX_PACKED}"
        )));
    }
    if shift.alphabet().len() > 1 << SYM_BITS {
        return Err(BuildError::BadConfig(
            "alphabet too large for the packed representation".into(),
        ));
    }

    let mut interners: Vec<Interner> = (0..=top).map(|_| Interner::default()).collect();
    let mut masks: Vec<Vec<u64>> = vec![Vec::new(); top + 1];
    // Memoized derivatives: level m, (value id at m, symbol) -> id at m-1.
    let mut deriv_memo: Vec<HashMap<(u32, SymbolId), u32>> = vec![HashMap::new(); top + 1];

    let intern = |interners: &mut Vec<Interner>, masks: &mut Vec<Vec<u64>>, m: usize, v: Vec<u128>, len: usize| -> u32 {
        let id = interners[m].intern(v);
        if masks[m].len() <= id as usize {
            masks[m].resize(id as usize + 1, 0);
        }
        masks[m][id as usize] |= 1 << len;
        id
    };

    // Root: the empty context is followed by every admissible word.
    let mut root = Vec::with_capacity(top + 1);
    for m in 0..=top {
        let v = packed_words_of_length(shift, m);
        root.push(intern(&mut interners, &mut masks, m, v, 0));
    }

    struct Dfs<'a> {
        shift: &'a Subshift,
        top: usize,
        bound: usize,
        count: u128,
        word: Word,
        scratch: Word,
    }

    impl Dfs<'_> {
        #[allow(clippy::too_many_arguments)]
        fn go(
            &mut self,
            tuple: &[u32],
            interners: &mut Vec<Interner>,
            masks: &mut Vec<Vec<u64>>,
            deriv_memo: &mut Vec<HashMap<(u32, SymbolId), u32>>,
        ) -> Result<(), BuildError> {
            if self.word.len() == self.bound {
                return Ok(());
            }
            let sigmas: Vec<SymbolId> = interners[1]
                .value(tuple[1])
                .iter()
                .map(|&w| w as SymbolId)
                .collect();
            for sigma in sigmas {
                self.count += 1;
                if self.count > KEY_BUDGET {
                    return Err(BuildError::ResourceLimit(self.count));
                }
                self.word.push(sigma);
                let len = self.word.len();
                let mut child = vec![0u32; self.top + 1];
                for m in 1..self.top {
                    let parent_id = tuple[m + 1];
                    let id = match deriv_memo[m + 1].get(&(parent_id, sigma)) {
                        Some(&id) => id,
                        None => {
                            let d = derivative(interners[m + 1].value(parent_id), m + 1, sigma);
                            let id = interners[m].intern(d);
                            deriv_memo[m + 1].insert((parent_id, sigma), id);
                            id
                        }
                    };
                    if masks[m].len() <= id as usize {
                        masks[m].resize(id as usize + 1, 0);
                    }
                    masks[m][id as usize] |= 1 << len;
                    child[m] = id;
                }
                // Deepest level: filter the one-symbol extensions of the
                // derivative of the parent's deepest set.
                let stems = if self.top == 1 {
                    vec![0u128]
                } else {
                    let pid = tuple[self.top];
                    match deriv_memo[self.top].get(&(pid, sigma)) {
                        Some(&id) => interners[self.top - 1].value(id).to_vec(),
                        None => derivative(interners[self.top].value(pid), self.top, sigma),
                    }
                };
                let mut deep = Vec::new();
                for &stem in &stems {
                    self.scratch.clear();
                    self.scratch.extend_from_slice(&self.word);
                    self.scratch
                        .extend_from_slice(&unpack_word(stem, self.top - 1));
                    for tau in self.shift.alphabet().ids() {
                        self.scratch.push(tau);
                        if self.shift.is_admissible(&self.scratch) {
                            deep.push(stem << SYM_BITS | tau as u128);
                        }
                        self.scratch.pop();
                    }
                }
                let deep_id = interners[self.top].intern(deep);
                if masks[self.top].len() <= deep_id as usize {
                    masks[self.top].resize(deep_id as usize + 1, 0);
                }
                masks[self.top][deep_id as usize] |= 1 << len;
                child[self.top] = deep_id;
                child[0] = tuple[0];
                self.go(&child, interners, masks, deriv_memo)?;
                self.word.pop();
            }
            Ok(())
        }
    }

    let mut dfs = Dfs {
        shift,
        top,
        bound,
        count: 1,
        word: Vec::new(),
        scratch: Vec::new(),
    };
    dfs.go(&root, &mut interners, &mut masks, &mut deriv_memo)?;

    // Sort each level's values for deterministic downstream output.
    let mut values = Vec::with_capacity(top + 1);
    let mut sorted_masks = Vec::with_capacity(top + 1);
    for (m, interner) in interners.into_iter().enumerate() {
        let mut order: Vec<usize> = (0..interner.values.len()).collect();
        order.sort_by(|&a, &b| interner.values[a].cmp(&interner.values[b]));
        values.push(
            order
                .iter()
                .map(|&i| interner.values[i].clone())
                .collect::<Vec<_>>(),
        );
        sorted_masks.push(order.iter().map(|&i| masks[m][i]).collect::<Vec<_>>());
    }
    Ok(SingleCore {
        values,
        masks: sorted_masks,
        top,
    })
}

/// Survival and assembly for one shift's follower graph: keep values with
/// incoming derivative chains from the deepest level, then emit levels
/// `0..=out`.
fn finish_single(
    core: &SingleCore,
    alphabet: &Alphabet,
    out: usize,
    name: String,
) -> Result<(Vec<Vec<Vec<u128>>>, LambdaGraphSystem), BuildError> {
    let top = core.top;
    let mut alive: Vec<Vec<bool>> = core
        .values
        .iter()
        .map(|lvl| vec![false; lvl.len()])
        .collect();
    for a in alive[top].iter_mut() {
        *a = true;
    }
    for m in (1..=top).rev() {
        // Index of the level below for target lookups.
        let below: HashMap<&[u128], usize> = core.values[m - 1]
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_slice(), i))
            .collect();
        for (i, v) in core.values[m].iter().enumerate() {
            if !alive[m][i] {
                continue;
            }
            for sigma in heads(v, m) {
                let d = derivative(v, m, sigma);
                if let Some(&j) = below.get(d.as_slice()) {
                    alive[m - 1][j] = true;
                }
            }
        }
    }

    let mut kept_values: Vec<Vec<Vec<u128>>> = Vec::with_capacity(out + 1);
    let mut kept_index: Vec<HashMap<&[u128], usize>> = Vec::with_capacity(out + 1);
    for m in 0..=out {
        let kept: Vec<Vec<u128>> = core.values[m]
            .iter()
            .enumerate()
            .filter(|&(i, _)| alive[m][i])
            .map(|(_, v)| v.clone())
            .collect();
        kept_values.push(kept);
    }
    for kept in &kept_values {
        kept_index.push(
            kept.iter()
                .enumerate()
                .map(|(i, v)| (v.as_slice(), i))
                .collect(),
        );
    }

    let mut levels = Vec::with_capacity(out + 1);
    for (m, kept) in kept_values.iter().enumerate() {
        let vertex_names: Vec<String> = (0..kept.len()).map(|i| format!("v{i}")).collect();
        let mut iota = Vec::new();
        let mut edges = Vec::new();
        if m > 0 {
            for (i, v) in kept.iter().enumerate() {
                let t = truncate_value(v);
                let &j = kept_index[m - 1]
                    .get(t.as_slice())
                    .ok_or(BuildError::HorizonTooSmall { level: m - 1 })?;
                iota.push(j);
                for sigma in heads(v, m) {
                    let d = derivative(v, m, sigma);
                    if let Some(&t) = kept_index[m - 1].get(d.as_slice()) {
                        edges.push((i, sigma, t));
                    }
                }
            }
        }
        levels.push(Level {
            vertex_names,
            iota,
            edges,
        });
    }
    let system = LambdaGraphSystem {
        name,
        alphabet: alphabet.clone(),
        levels,
        approximate: true,
        certified_path_length: top - out,
    };
    Ok((kept_values, system))
}

/// Flat product factors, if this shift is a product of non-products.
fn flat_factors(shift: &Subshift) -> Option<&[Subshift]> {
    match shift.kind() {
        ShiftKind::Product(fs)
            if fs
                .iter()
                .all(|f| !matches!(f.kind(), ShiftKind::Product(_))) =>
        {
            Some(fs)
        }
        _ => None,
    }
}

/// Follower-set reference for one shift: enumerate contexts up to length
/// `bound`, attach truncated follower sets at every level up to `top`, keep
/// the values with incoming derivative chains from level `top`, and emit
/// them as a leveled system.
pub fn brute_force_reference(
    shift: &Subshift,
    top: usize,
    bound: usize,
) -> Result<BruteLevels, BuildError> {
    if let Some(factors) = flat_factors(shift) {
        return brute_product(shift, factors, top, bound);
    }
    let core = single_core(shift, top, bound)?;
    let (levels, system) = finish_single(
        &core,
        shift.alphabet(),
        top,
        format!("{}-reference", shift.name()),
    )?;
    let counts = system.vertex_counts();
    Ok(BruteLevels {
        levels,
        counts,
        coords: Vec::new(),
        system,
    })
}

fn brute_product(
    shift: &Subshift,
    factors: &[Subshift],
    top: usize,
    bound: usize,
) -> Result<BruteLevels, BuildError> {
    let cores: Vec<SingleCore> = factors
        .iter()
        .map(|f| single_core(f, top, bound))
        .collect::<Result<_, _>>()?;
    let sizes: Vec<usize> = factors.iter().map(|f| f.alphabet().len()).collect();

    // Realized tuples per level: coordinates sharing a context length.
    let mut nodes: Vec<Vec<Vec<u32>>> = Vec::with_capacity(top + 1);
    let mut index: Vec<HashMap<Vec<u32>, u32>> = Vec::with_capacity(top + 1);
    let mut budget: u128 = 0;
    for m in 0..=top {
        let lens: Vec<usize> = cores.iter().map(|c| c.values[m].len()).collect();
        let mut level_nodes = Vec::new();
        let mut tuple = vec![0u32; cores.len()];
        loop {
            let mut mask = u64::MAX;
            for (k, c) in cores.iter().enumerate() {
                mask &= c.masks[m][tuple[k] as usize];
            }
            if mask != 0 {
                level_nodes.push(tuple.clone());
                budget += 1;
                if budget > KEY_BUDGET {
                    return Err(BuildError::ResourceLimit(budget));
                }
            }
            // Next tuple, last coordinate fastest.
            let mut k = cores.len();
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                tuple[k] += 1;
                if (tuple[k] as usize) < lens[k] {
                    break;
                }
                tuple[k] = 0;
            }
            if tuple.iter().all(|&t| t == 0) {
                break;
            }
        }
        index.push(
            level_nodes
                .iter()
                .enumerate()
                .map(|(i, t)| (t.clone(), i as u32))
                .collect(),
        );
        nodes.push(level_nodes);
    }

    // Derivative edges between realized tuples, then survival from the top.
    let value_index: Vec<Vec<HashMap<&[u128], u32>>> = cores
        .iter()
        .map(|c| {
            c.values
                .iter()
                .map(|lvl| {
                    lvl.iter()
                        .enumerate()
                        .map(|(i, v)| (v.as_slice(), i as u32))
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut alive: Vec<Vec<bool>> = nodes.iter().map(|lvl| vec![false; lvl.len()]).collect();
    for a in alive[top].iter_mut() {
        *a = true;
    }
    let alphabet = shift.alphabet();
    let mut edges_by_level: Vec<Vec<(u32, SymbolId, u32)>> = vec![Vec::new(); top + 1];
    for m in (1..=top).rev() {
        for (i, tuple) in nodes[m].iter().enumerate() {
            if !alive[m][i] {
                continue;
            }
            'symbols: for sigma in alphabet.ids() {
                let parts = Alphabet::split_product_id(sigma, &sizes);
                let mut target = Vec::with_capacity(cores.len());
                for (k, c) in cores.iter().enumerate() {
                    let v = &c.values[m][tuple[k] as usize];
                    let d = derivative(v, m, parts[k]);
                    if d.is_empty() {
                        continue 'symbols;
                    }
                    match value_index[k][m - 1].get(d.as_slice()) {
                        Some(&id) => target.push(id),
                        None => continue 'symbols,
                    }
                }
                if let Some(&j) = index[m - 1].get(&target) {
                    alive[m - 1][j as usize] = true;
                    edges_by_level[m].push((i as u32, sigma, j));
                }
            }
        }
    }

    // Assemble the surviving part.
    let mut levels = Vec::with_capacity(top + 1);
    let mut remap: Vec<Vec<Option<usize>>> = Vec::with_capacity(top + 1);
    for m in 0..=top {
        let mut map = vec![None; nodes[m].len()];
        let mut next = 0usize;
        for (i, ok) in alive[m].iter().enumerate() {
            if *ok {
                map[i] = Some(next);
                next += 1;
            }
        }
        remap.push(map);
    }
    for m in 0..=top {
        let kept: Vec<usize> = (0..nodes[m].len()).filter(|&i| alive[m][i]).collect();
        let vertex_names: Vec<String> = (0..kept.len()).map(|i| format!("v{i}")).collect();
        let mut iota = Vec::new();
        let mut edges = Vec::new();
        if m > 0 {
            for &i in &kept {
                let tuple = &nodes[m][i];
                let mut down = Vec::with_capacity(cores.len());
                for (k, c) in cores.iter().enumerate() {
                    let t = truncate_value(&c.values[m][tuple[k] as usize]);
                    match value_index[k][m - 1].get(t.as_slice()) {
                        Some(&id) => down.push(id),
                        None => return Err(BuildError::HorizonTooSmall { level: m - 1 }),
                    }
                }
                let j = index[m - 1]
                    .get(&down)
                    .and_then(|&j| remap[m - 1][j as usize])
                    .ok_or(BuildError::HorizonTooSmall { level: m - 1 })?;
                iota.push(j);
            }
            for &(i, sigma, j) in &edges_by_level[m] {
                if let (Some(a), Some(b)) = (remap[m][i as usize], remap[m - 1][j as usize]) {
                    edges.push((a, sigma, b));
                }
            }
            edges.sort_unstable();
        }
        levels.push(Level {
            vertex_names,
            iota,
            edges,
        });
    }
    let system = LambdaGraphSystem {
        name: format!("{}-reference", shift.name()),
        alphabet: alphabet.clone(),
        levels,
        approximate: true,
        certified_path_length: 0,
    };
    let counts = system.vertex_counts();

    let coords = factors
        .iter()
        .zip(cores)
        .map(|(f, core)| {
            let (levels, system) = finish_single(
                &core,
                f.alphabet(),
                top,
                format!("{}-reference", f.name()),
            )?;
            let counts = system.vertex_counts();
            Ok(BruteLevels {
                levels,
                counts,
                coords: Vec::new(),
                system,
            })
        })
        .collect::<Result<Vec<_>, BuildError>>()?;

    Ok(BruteLevels {
        levels: Vec::new(),
        counts,
        coords,
        system,
    })
}

/// Word-enumeration fallback for the follower presentation: run the
/// reference at depth `levels + buffer`, then publish only the first
/// `levels` levels, flagged approximate with the buffer as the certified
/// incoming-path length.
pub(crate) fn approximate_canonical(
    shift: &Subshift,
    config: &BuilderConfig,
) -> Result<LambdaGraphSystem, BuildError> {
    let depth = config.levels + config.buffer;
    let bound = config.context_bound.max(depth);
    let reference = brute_force_reference(shift, depth, bound)?;
    let mut system = reference.system;
    system.levels.truncate(config.levels + 1);
    system.name = shift.name().to_string();
    system.approximate = true;
    system.certified_path_length = config.buffer;
    Ok(system)
}

// ---------------------------------------------------------------------------
// Pair reference
// ---------------------------------------------------------------------------

/// Reference data for a subsystem inside an ambient shift.  As with
/// [`BruteLevels`], products leave `levels` empty and carry coordinate
/// results in `coords`.
pub struct BrutePairLevels {
    /// Per level, the surviving (subsystem follower set, ambient follower
    /// set) pairs.
    pub levels: Vec<Vec<(Vec<u128>, Vec<u128>)>>,
    pub counts: Vec<usize>,
    pub coords: Vec<BrutePairLevels>,
    pub system: LambdaGraphSystem,
}

/// Extra levels explored above the requested depth; chains this much longer
/// than the output depth must exist for a pair to be kept.
const PAIR_SLACK: usize = 2;

/// Candidate pair graph of one (sub, sup) pair before survival analysis.
/// Node indices are sorted by (sub value, sup value); `profiles` records
/// which (sub context length, sup context length) pairs realized each node.
struct PairCore {
    y_values: Vec<Vec<Vec<u128>>>,
    x_values: Vec<Vec<Vec<u128>>>,
    nodes: Vec<Vec<(u32, u32)>>,
    profiles: Vec<Vec<u128>>,
    /// `edge_map[m][node][sigma]`: target node at level `m-1`, if any.
    edge_map: Vec<Vec<Vec<Option<u32>>>>,
    /// Truncation target one level down per node.
    iota_map: Vec<Vec<Option<u32>>>,
    horizon: usize,
    symbols: usize,
}

fn pair_core(
    sub: &Subshift,
    sup: &Subshift,
    top: usize,
    bound: usize,
) -> Result<PairCore, BuildError> {
    if top == 0 {
        return Err(BuildError::BadConfig(
            "at least one level is required".into(),
        ));
    }
    let horizon = top + PAIR_SLACK;
    if bound < horizon {
        return Err(BuildError::BadConfig(format!(
            "context bound {bound} is shorter than the exploration depth {horizon}"
        )));
    }
    if bound > MAX_PACKED {
        return Err(BuildError::BadConfig(format!(
            "context bound {bound} exceeds the packed-word limit of {MAX_PACKED}"
        )));
    }
    if (bound + 1) * (bound + 1) > 128 {
        return Err(BuildError::BadConfig(format!(
            "context bound {bound} exceeds the pair-profile limit of 10"
        )));
    }
    if sub.alphabet().names() != sup.alphabet().names() {
        return Err(BuildError::AlphabetMismatch(
            sub.name().to_string(),
            sup.name().to_string(),
        ));
    }

    let symbols = sup.alphabet().len();
    let mut y_int: Vec<Interner> = (0..=horizon).map(|_| Interner::default()).collect();
    let mut x_int: Vec<Interner> = (0..=horizon).map(|_| Interner::default()).collect();
    let mut y_memo: Vec<HashMap<(u32, SymbolId), u32>> = vec![HashMap::new(); horizon + 1];
    let mut x_memo: Vec<HashMap<(u32, SymbolId), u32>> = vec![HashMap::new(); horizon + 1];

    // Realization lengths per interned value: bit `i` of `y_masks[m][id]`
    // set when a subsystem context of length `i` has that level-`m` follower
    // set, and likewise on the ambient side.
    let mut y_masks: Vec<Vec<u32>> = vec![Vec::new(); horizon + 1];
    let mut x_masks: Vec<Vec<u32>> = vec![Vec::new(); horizon + 1];
    fn mark(masks: &mut [Vec<u32>], m: usize, id: u32, len: usize) {
        if masks[m].len() <= id as usize {
            masks[m].resize(id as usize + 1, 0);
        }
        masks[m][id as usize] |= 1 << len;
    }

    let x_root: Vec<u32> = (0..=horizon)
        .map(|m| x_int[m].intern(packed_words_of_length(sup, m)))
        .collect();
    let y_root: Vec<u32> = (0..=horizon)
        .map(|m| y_int[m].intern(packed_words_of_length(sub, m)))
        .collect();
    for m in 0..=horizon {
        mark(&mut x_masks, m, x_root[m], 0);
        mark(&mut y_masks, m, y_root[m], 0);
    }

    // Depth-first over ambient-admissible context words.  Child values are
    // derivatives of the parent's, except at the horizon where one-symbol
    // extensions of the derivative stems are tested individually.
    struct Dfs<'a> {
        sub: &'a Subshift,
        sup: &'a Subshift,
        horizon: usize,
        bound: usize,
        count: u128,
        word: Word,
        scratch: Word,
    }

    #[allow(clippy::too_many_arguments)]
    fn child_tuple(
        shift: &Subshift,
        word: &Word,
        scratch: &mut Word,
        horizon: usize,
        parent: &[u32],
        sigma: SymbolId,
        interners: &mut [Interner],
        memo: &mut [HashMap<(u32, SymbolId), u32>],
    ) -> Vec<u32> {
        let mut child = vec![0u32; horizon + 1];
        for m in 1..horizon {
            let pid = parent[m + 1];
            let id = match memo[m + 1].get(&(pid, sigma)) {
                Some(&id) => id,
                None => {
                    let d = derivative(interners[m + 1].value(pid), m + 1, sigma);
                    let id = interners[m].intern(d);
                    memo[m + 1].insert((pid, sigma), id);
                    id
                }
            };
            child[m] = id;
        }
        let stems = if horizon == 1 {
            vec![0u128]
        } else {
            let pid = parent[horizon];
            match memo[horizon].get(&(pid, sigma)) {
                Some(&id) => interners[horizon - 1].value(id).to_vec(),
                None => derivative(interners[horizon].value(pid), horizon, sigma),
            }
        };
        let mut deep = Vec::new();
        for &stem in &stems {
            scratch.clear();
            scratch.extend_from_slice(word);
            scratch.extend_from_slice(&unpack_word(stem, horizon - 1));
            for tau in shift.alphabet().ids() {
                scratch.push(tau);
                if shift.is_admissible(scratch) {
                    deep.push(stem << SYM_BITS | tau as u128);
                }
                scratch.pop();
            }
        }
        child[horizon] = interners[horizon].intern(deep);
        child
    }

    impl Dfs<'_> {
        #[allow(clippy::too_many_arguments)]
        fn go(
            &mut self,
            xt: &[u32],
            yt: Option<&[u32]>,
            y_int: &mut [Interner],
            x_int: &mut [Interner],
            y_memo: &mut [HashMap<(u32, SymbolId), u32>],
            x_memo: &mut [HashMap<(u32, SymbolId), u32>],
            y_masks: &mut [Vec<u32>],
            x_masks: &mut [Vec<u32>],
        ) -> Result<(), BuildError> {
            if self.word.len() == self.bound {
                return Ok(());
            }
            let sigmas: Vec<SymbolId> = x_int[1]
                .value(xt[1])
                .iter()
                .map(|&w| w as SymbolId)
                .collect();
            for sigma in sigmas {
                self.count += 1;
                if self.count > KEY_BUDGET {
                    return Err(BuildError::ResourceLimit(self.count));
                }
                self.word.push(sigma);
                let len = self.word.len();
                let child_xt = child_tuple(
                    self.sup,
                    &self.word,
                    &mut self.scratch,
                    self.horizon,
                    xt,
                    sigma,
                    x_int,
                    x_memo,
                );
                let child_yt = match yt {
                    Some(parent_yt) if self.sub.is_admissible(&self.word) => Some(child_tuple(
                        self.sub,
                        &self.word,
                        &mut self.scratch,
                        self.horizon,
                        parent_yt,
                        sigma,
                        y_int,
                        y_memo,
                    )),
                    _ => None,
                };
                for m in 0..=self.horizon {
                    mark(x_masks, m, child_xt[m], len);
                    if let Some(t) = &child_yt {
                        mark(y_masks, m, t[m], len);
                    }
                }
                self.go(
                    &child_xt,
                    child_yt.as_deref(),
                    y_int,
                    x_int,
                    y_memo,
                    x_memo,
                    y_masks,
                    x_masks,
                )?;
                self.word.pop();
            }
            Ok(())
        }
    }

    let mut dfs = Dfs {
        sub,
        sup,
        horizon,
        bound,
        count: 1,
        word: Vec::new(),
        scratch: Vec::new(),
    };
    dfs.go(
        &x_root,
        Some(&y_root),
        &mut y_int,
        &mut x_int,
        &mut y_memo,
        &mut x_memo,
        &mut y_masks,
        &mut x_masks,
    )?;

    // Candidate nodes: every (subsystem value, ambient value) pair realized
    // by some pair of contexts.  Common suffixes are not demanded here —
    // the derivative chains consumed by the survival pass extend a shared
    // suffix one symbol per edge, so the survivors are exactly the pairs
    // realized with arbitrarily long common suffixes within the horizon.
    // The profile of a node records the (sub length, sup length) pairs that
    // realize it, which the product recombination intersects coordinatewise.
    let mut node_profiles: Vec<HashMap<(u32, u32), u128>> =
        vec![HashMap::new(); horizon + 1];
    for m in 0..=horizon {
        for (yid, &ymask) in y_masks[m].iter().enumerate() {
            if ymask == 0 {
                continue;
            }
            for (xid, &xmask) in x_masks[m].iter().enumerate() {
                if xmask == 0 {
                    continue;
                }
                let mut profile = 0u128;
                for lb in 0..=bound {
                    if ymask & (1 << lb) != 0 {
                        profile |= (xmask as u128) << (lb * (bound + 1));
                    }
                }
                node_profiles[m].insert((yid as u32, xid as u32), profile);
            }
        }
    }

    // Containment filter, then sort nodes by value for determinism.
    let mut nodes: Vec<Vec<(u32, u32)>> = Vec::with_capacity(horizon + 1);
    let mut profiles: Vec<Vec<u128>> = Vec::with_capacity(horizon + 1);
    for (m, level) in node_profiles.into_iter().enumerate() {
        let mut kept: Vec<((u32, u32), u128)> = level
            .into_iter()
            .filter(|&((y, x), _)| is_subset(y_int[m].value(y), x_int[m].value(x)))
            .collect();
        kept.sort_by(|a, b| {
            let ka = (y_int[m].value(a.0 .0), x_int[m].value(a.0 .1));
            let kb = (y_int[m].value(b.0 .0), x_int[m].value(b.0 .1));
            ka.cmp(&kb)
        });
        nodes.push(kept.iter().map(|&(n, _)| n).collect());
        profiles.push(kept.iter().map(|&(_, p)| p).collect());
    }

    // Synchronized derivative edges and componentwise truncations.
    let node_index: Vec<HashMap<(u32, u32), u32>> = nodes
        .iter()
        .map(|lvl| {
            lvl.iter()
                .enumerate()
                .map(|(i, &n)| (n, i as u32))
                .collect()
        })
        .collect();
    let mut edge_map: Vec<Vec<Vec<Option<u32>>>> = Vec::with_capacity(horizon + 1);
    let mut iota_map: Vec<Vec<Option<u32>>> = Vec::with_capacity(horizon + 1);
    for m in 0..=horizon {
        if m == 0 {
            edge_map.push(Vec::new());
            iota_map.push(Vec::new());
            continue;
        }
        let mut em = Vec::with_capacity(nodes[m].len());
        let mut im = Vec::with_capacity(nodes[m].len());
        for &(y, x) in &nodes[m] {
            let yv = y_int[m].value(y);
            let xv = x_int[m].value(x);
            let mut per_symbol = vec![None; symbols];
            for sigma in heads(yv, m) {
                let dy = derivative(yv, m, sigma);
                let dx = derivative(xv, m, sigma);
                let ty = y_int[m - 1].lookup(&dy);
                let tx = x_int[m - 1].lookup(&dx);
                if let (Some(ty), Some(tx)) = (ty, tx) {
                    per_symbol[sigma as usize] =
                        node_index[m - 1].get(&(ty, tx)).copied();
                }
            }
            em.push(per_symbol);
            let ty = y_int[m - 1].lookup(&truncate_value(yv));
            let tx = x_int[m - 1].lookup(&truncate_value(xv));
            im.push(match (ty, tx) {
                (Some(ty), Some(tx)) => node_index[m - 1].get(&(ty, tx)).copied(),
                _ => None,
            });
        }
        edge_map.push(em);
        iota_map.push(im);
    }

    Ok(PairCore {
        y_values: nodes
            .iter()
            .enumerate()
            .map(|(m, lvl)| {
                lvl.iter()
                    .map(|&(y, _)| y_int[m].value(y).to_vec())
                    .collect()
            })
            .collect(),
        x_values: nodes
            .iter()
            .enumerate()
            .map(|(m, lvl)| {
                lvl.iter()
                    .map(|&(_, x)| x_int[m].value(x).to_vec())
                    .collect()
            })
            .collect(),
        nodes,
        profiles,
        edge_map,
        iota_map,
        horizon,
        symbols,
    })
}

/// Survival from the horizon plus assembly shared by the direct and product
/// pair routes.  `node_count`, `edge`, and `iota` describe the candidate
/// graph abstractly.
fn finish_pair_graph(
    horizon: usize,
    out: usize,
    node_count: &dyn Fn(usize) -> usize,
    edge: &dyn Fn(usize, usize, SymbolId) -> Option<usize>,
    iota: &dyn Fn(usize, usize) -> Option<usize>,
    symbols: usize,
    alphabet: &Alphabet,
    name: String,
) -> Result<(Vec<Vec<usize>>, LambdaGraphSystem), BuildError> {
    let mut alive: Vec<Vec<bool>> = (0..=horizon).map(|m| vec![false; node_count(m)]).collect();
    for a in alive[horizon].iter_mut() {
        *a = true;
    }
    for m in (1..=horizon).rev() {
        for i in 0..node_count(m) {
            if !alive[m][i] {
                continue;
            }
            for sigma in 0..symbols {
                if let Some(j) = edge(m, i, sigma as SymbolId) {
                    alive[m - 1][j] = true;
                }
            }
        }
    }

    let mut kept: Vec<Vec<usize>> = Vec::with_capacity(out + 1);
    let mut remap: Vec<Vec<Option<usize>>> = Vec::with_capacity(out + 1);
    for m in 0..=out {
        let ids: Vec<usize> = (0..node_count(m)).filter(|&i| alive[m][i]).collect();
        let mut map = vec![None; node_count(m)];
        for (new, &old) in ids.iter().enumerate() {
            map[old] = Some(new);
        }
        kept.push(ids);
        remap.push(map);
    }

    let mut levels = Vec::with_capacity(out + 1);
    for m in 0..=out {
        let vertex_names: Vec<String> = (0..kept[m].len()).map(|i| format!("v{i}")).collect();
        let mut iota_v = Vec::new();
        let mut edges = Vec::new();
        if m > 0 {
            for (new, &old) in kept[m].iter().enumerate() {
                let j = iota(m, old)
                    .and_then(|j| remap[m - 1][j])
                    .ok_or(BuildError::HorizonTooSmall { level: m - 1 })?;
                iota_v.push(j);
                for sigma in 0..symbols {
                    if let Some(t) = edge(m, old, sigma as SymbolId) {
                        if let Some(t) = remap[m - 1][t] {
                            edges.push((new, sigma as SymbolId, t));
                        }
                    }
                }
            }
        }
        levels.push(Level {
            vertex_names,
            iota: iota_v,
            edges,
        });
    }
    let system = LambdaGraphSystem {
        name,
        alphabet: alphabet.clone(),
        levels,
        approximate: true,
        certified_path_length: horizon - out,
    };
    Ok((kept, system))
}

/// Follower-pair reference for a subsystem of an ambient shift: enumerate
/// ambient contexts up to length `bound`, pair each with its subsystem-
/// admissible suffixes in both orders, keep containment-satisfying pairs
/// with synchronized derivative chains from `top + 2` levels up, and emit
/// levels `0..=top`.
pub fn brute_force_reference_pair(
    sub: &Subshift,
    sup: &Subshift,
    top: usize,
    bound: usize,
) -> Result<BrutePairLevels, BuildError> {
    if let Some(parts) = factor_pair(sub, sup) {
        if parts
            .iter()
            .all(|(_, x)| !matches!(x.kind(), ShiftKind::Product(_)))
        {
            return brute_pair_product(sub, sup, &parts, top, bound);
        }
    }
    let core = pair_core(sub, sup, top, bound)?;
    let (kept, system) = finish_pair_graph(
        core.horizon,
        top,
        &|m| core.nodes[m].len(),
        &|m, i, sigma| core.edge_map[m][i][sigma as usize].map(|t| t as usize),
        &|m, i| core.iota_map[m][i].map(|t| t as usize),
        core.symbols,
        sub.alphabet(),
        format!("({} in {})-reference", sub.name(), sup.name()),
    )?;
    let levels: Vec<Vec<(Vec<u128>, Vec<u128>)>> = kept
        .iter()
        .enumerate()
        .map(|(m, ids)| {
            ids.iter()
                .map(|&i| (core.y_values[m][i].clone(), core.x_values[m][i].clone()))
                .collect()
        })
        .collect();
    let counts = system.vertex_counts();
    Ok(BrutePairLevels {
        levels,
        counts,
        coords: Vec::new(),
        system,
    })
}

fn brute_pair_product(
    sub: &Subshift,
    sup: &Subshift,
    parts: &[(Subshift, Subshift)],
    top: usize,
    bound: usize,
) -> Result<BrutePairLevels, BuildError> {
    let cores: Vec<PairCore> = parts
        .iter()
        .map(|(y, x)| pair_core(y, x, top, bound))
        .collect::<Result<_, _>>()?;
    let horizon = top + PAIR_SLACK;
    let sizes: Vec<usize> = parts.iter().map(|(_, x)| x.alphabet().len()).collect();

    // Tuples of coordinate pairs sharing a (sub length, sup length)
    // profile.
    let mut nodes: Vec<Vec<Vec<u32>>> = Vec::with_capacity(horizon + 1);
    let mut index: Vec<HashMap<Vec<u32>, u32>> = Vec::with_capacity(horizon + 1);
    let mut budget: u128 = 0;
    for m in 0..=horizon {
        let lens: Vec<usize> = cores.iter().map(|c| c.nodes[m].len()).collect();
        let mut level_nodes = Vec::new();
        if lens.iter().all(|&l| l > 0) {
            let mut tuple = vec![0u32; cores.len()];
            loop {
                let mut mask = u128::MAX;
                for (k, c) in cores.iter().enumerate() {
                    mask &= c.profiles[m][tuple[k] as usize];
                }
                if mask != 0 {
                    level_nodes.push(tuple.clone());
                    budget += 1;
                    if budget > KEY_BUDGET {
                        return Err(BuildError::ResourceLimit(budget));
                    }
                }
                let mut k = cores.len();
                loop {
                    if k == 0 {
                        break;
                    }
                    k -= 1;
                    tuple[k] += 1;
                    if (tuple[k] as usize) < lens[k] {
                        break;
                    }
                    tuple[k] = 0;
                }
                if tuple.iter().all(|&t| t == 0) {
                    break;
                }
            }
        }
        index.push(
            level_nodes
                .iter()
                .enumerate()
                .map(|(i, t)| (t.clone(), i as u32))
                .collect(),
        );
        nodes.push(level_nodes);
    }

    let alphabet = sub.alphabet();
    let edge = |m: usize, i: usize, sigma: SymbolId| -> Option<usize> {
        let parts_sigma = Alphabet::split_product_id(sigma, &sizes);
        let tuple = &nodes[m][i];
        let mut target = Vec::with_capacity(cores.len());
        for (k, c) in cores.iter().enumerate() {
            target.push(c.edge_map[m][tuple[k] as usize][parts_sigma[k] as usize]?);
        }
        index[m - 1].get(&target).map(|&j| j as usize)
    };
    let iota = |m: usize, i: usize| -> Option<usize> {
        let tuple = &nodes[m][i];
        let mut target = Vec::with_capacity(cores.len());
        for (k, c) in cores.iter().enumerate() {
            target.push(c.iota_map[m][tuple[k] as usize]?);
        }
        index[m - 1].get(&target).map(|&j| j as usize)
    };
    let (_, system) = finish_pair_graph(
        horizon,
        top,
        &|m| nodes[m].len(),
        &edge,
        &iota,
        alphabet.len(),
        alphabet,
        format!("({} in {})-reference", sub.name(), sup.name()),
    )?;
    let counts = system.vertex_counts();

    let coords = parts
        .iter()
        .zip(cores)
        .map(|((y, x), core)| {
            let (kept, system) = finish_pair_graph(
                core.horizon,
                top,
                &|m| core.nodes[m].len(),
                &|m, i, sigma| core.edge_map[m][i][sigma as usize].map(|t| t as usize),
                &|m, i| core.iota_map[m][i].map(|t| t as usize),
                core.symbols,
                y.alphabet(),
                format!("({} in {})-reference", y.name(), x.name()),
            )?;
            let levels: Vec<Vec<(Vec<u128>, Vec<u128>)>> = kept
                .iter()
                .enumerate()
                .map(|(m, ids)| {
                    ids.iter()
                        .map(|&i| {
                            (core.y_values[m][i].clone(), core.x_values[m][i].clone())
                        })
                        .collect()
                })
                .collect();
            let counts = system.vertex_counts();
            Ok(BrutePairLevels {
                levels,
                counts,
                coords: Vec::new(),
                system,
            })
        })
        .collect::<Result<Vec<_>, BuildError>>()?;

    Ok(BrutePairLevels {
        levels: Vec::new(),
        counts,
        coords,
        system,
    })
}

// ---------------------------------------------------------------------------
// Comparison helpers
// ---------------------------------------------------------------------------

/// The level-`n` vertex contexts of a built system as packed word sets, for
/// value-level comparison against reference output.
pub fn packed_context_sets(sys: &LambdaGraphSystem, level: usize) -> BTreeSet<Vec<u128>> {
    (0..sys.levels[level].vertex_count())
        .map(|v| {
            sys.vertex_context(level, v)
                .iter()
                .map(|w| pack_word(w))
                .collect()
        })
        .collect()
}

/// The level-`n` (sub context, sup context) pairs of a built pair system as
/// packed word sets.
pub fn packed_context_pair_sets(
    pair: &PairLgs,
    level: usize,
) -> BTreeSet<(Vec<u128>, Vec<u128>)> {
    let sub_ctx: Vec<Vec<u128>> = (0..pair.side_sub.levels[level].vertex_count())
        .map(|v| {
            pair.side_sub
                .vertex_context(level, v)
                .iter()
                .map(|w| pack_word(w))
                .collect()
        })
        .collect();
    let sup_ctx: Vec<Vec<u128>> = (0..pair.side_sup.levels[level].vertex_count())
        .map(|v| {
            pair.side_sup
                .vertex_context(level, v)
                .iter()
                .map(|w| pack_word(w))
                .collect()
        })
        .collect();
    pair.pairs[level]
        .iter()
        .map(|&(y, x)| (sub_ctx[y].clone(), sup_ctx[x].clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{build_canonical_lgs, build_pair_lgs, BuilderConfig};
    use crate::fixtures::{dyck, dyck_power, even_shift, full_shift, golden_mean};
    use crate::lgs::validate_lgs;
    use crate::subshift::Subshift;

    #[test]
    fn golden_mean_reference_matches_the_structural_builder() {
        let gm = golden_mean();
        let reference = brute_force_reference(&gm, 3, 8).unwrap();
        assert_eq!(reference.counts, vec![1, 2, 2, 2]);
        let built = build_canonical_lgs(&gm, &BuilderConfig::for_levels(3)).unwrap();
        for level in 0..=3 {
            let b: BTreeSet<Vec<u128>> = reference.levels[level].iter().cloned().collect();
            assert_eq!(packed_context_sets(&built, level), b, "level {level}");
        }
        validate_lgs(&reference.system).unwrap();
    }

    #[test]
    fn even_shift_reference_matches_the_structural_builder() {
        let even = even_shift();
        let reference = brute_force_reference(&even, 3, 10).unwrap();
        assert_eq!(reference.counts, vec![1, 2, 3, 3]);
        let built = build_canonical_lgs(&even, &BuilderConfig::for_levels(3)).unwrap();
        for level in 0..=3 {
            let b: BTreeSet<Vec<u128>> = reference.levels[level].iter().cloned().collect();
            assert_eq!(packed_context_sets(&built, level), b, "level {level}");
        }
    }

    #[test]
    fn dyck_reference_level_counts() {
        let d2 = dyck(2);
        let reference = brute_force_reference(&d2, 3, 10).unwrap();
        assert_eq!(reference.counts, vec![1, 3, 7, 15]);
        let built = build_canonical_lgs(&d2, &BuilderConfig::for_levels(3)).unwrap();
        for level in 0..=3 {
            let b: BTreeSet<Vec<u128>> = reference.levels[level].iter().cloned().collect();
            assert_eq!(packed_context_sets(&built, level), b, "level {level}");
        }
    }

    #[test]
    fn product_reference_recombines_coordinates() {
        let d2x2 = dyck_power(2, 2);
        let reference = brute_force_reference(&d2x2, 2, 6).unwrap();
        assert_eq!(reference.counts, vec![1, 9, 49]);
        assert_eq!(reference.coords.len(), 2);
        assert_eq!(reference.coords[0].counts, vec![1, 3, 7]);
        validate_lgs(&reference.system).unwrap();
    }

    #[test]
    fn full_shift_reference_is_trivial() {
        let f2 = full_shift(2);
        let reference = brute_force_reference(&f2, 4, 6).unwrap();
        assert_eq!(reference.counts, vec![1; 5]);
    }

    #[test]
    fn pair_reference_matches_pair_builder_on_codings() {
        let d2 = dyck(2);
        let openers =
            Subshift::embedding("openers", full_shift(2), d2.alphabet().clone(), vec![0, 1])
                .unwrap();
        let reference = brute_force_reference_pair(&openers, &d2, 2, 8).unwrap();
        assert_eq!(reference.counts, vec![1, 2, 4]);
        let built = build_pair_lgs(&openers, &d2, &BuilderConfig::for_levels(2)).unwrap();
        for level in 0..=2 {
            let b: BTreeSet<(Vec<u128>, Vec<u128>)> =
                reference.levels[level].iter().cloned().collect();
            assert_eq!(packed_context_pair_sets(&built, level), b, "level {level}");
        }
    }

    #[test]
    fn pair_reference_on_the_dyck_diagonal() {
        let d2 = dyck(2);
        let reference = brute_force_reference_pair(&d2, &d2, 2, 8).unwrap();
        assert_eq!(reference.counts, vec![1, 5, 17]);
        let built = build_pair_lgs(&d2, &d2, &BuilderConfig::for_levels(2)).unwrap();
        for level in 0..=2 {
            let b: BTreeSet<(Vec<u128>, Vec<u128>)> =
                reference.levels[level].iter().cloned().collect();
            assert_eq!(packed_context_pair_sets(&built, level), b, "level {level}");
        }
    }
}
