//! Relative presentation of a subsystem inside an ambient shift.
//!
//! Level `n` pairs a depth-`n` follower class of the subsystem with one of
//! the ambient shift whose context contains it; an edge reads a symbol the
//! subsystem class allows and steps both components.  Kept pairs are those
//! with incoming chains of every length through such pairs, evaluated up to
//! a horizon: exactly when both sides have finitely many context states
//! (one pigeonhole round past the requested depth proves or refutes every
//! chain), and up to `levels + buffer` otherwise, in which case the result
//! is flagged approximate.
//!
//! When both shifts decompose coordinatewise — the ambient shift is a
//! product and the subsystem is a product or a coordinatewise relabeling of
//! one — the pair system is built per coordinate and assembled as a product.
//! Containment, subordination and survival are all coordinatewise for such
//! pairs, so the assembly is exact, and it sidesteps the blowup of running
//! the engine on the product alphabet directly.

use std::collections::{BTreeMap, HashMap};

use crate::alphabet::{Alphabet, SymbolId};
use crate::lgs::{LambdaGraphSystem, Level};
use crate::shannon::oracle::Oracle;
use crate::subshift::{ShiftKind, Subshift};

use super::{
    assemble_canonical, require_contained, BuildError, BuilderConfig, SideLevels, KEY_BUDGET,
};

/// The pair system together with the two follower presentations it projects
/// onto and the `(sub class, sup class)` behind each vertex.
pub struct PairLgs {
    pub system: LambdaGraphSystem,
    pub side_sub: LambdaGraphSystem,
    pub side_sup: LambdaGraphSystem,
    /// Per level, the class pair behind each vertex; indices refer to the
    /// side systems' vertices at the same level.
    pub pairs: Vec<Vec<(usize, usize)>>,
}

/// Depth used by the language-inclusion precheck.  Violations of a
/// symbolwise coding show up on very short words; capping the depth keeps
/// the check cheap on wide product alphabets.
const CONTAINMENT_DEPTH: usize = 4;

pub fn build_pair_lgs(
    sub: &Subshift,
    sup: &Subshift,
    config: &BuilderConfig,
) -> Result<PairLgs, BuildError> {
    config.validate()?;
    require_contained(sub, sup, config.levels.min(CONTAINMENT_DEPTH))?;
    if let Some(parts) = factor_pair(sub, sup) {
        let mut built = Vec::with_capacity(parts.len());
        for (y, x) in &parts {
            built.push(build_pair_direct(y, x, config)?);
        }
        return assemble_product_pair(sub, sup, &built);
    }
    build_pair_direct(sub, sup, config)
}

fn build_pair_direct(
    sub: &Subshift,
    sup: &Subshift,
    config: &BuilderConfig,
) -> Result<PairLgs, BuildError> {
    let oy = Oracle::from_subshift(sub)?;
    let ox = Oracle::from_subshift(sup)?;
    let n = config.levels;
    let (horizon, exact) = match (oy.finite_keyed(), ox.finite_keyed()) {
        (Some(ky), Some(kx)) => {
            let states = usize::try_from(ky.saturating_mul(kx)).unwrap_or(usize::MAX);
            (n.saturating_add(states).saturating_add(1), true)
        }
        _ => (n + config.buffer, false),
    };
    let sy = SideLevels::build(&oy, horizon)?;
    let sx = SideLevels::build(&ox, horizon)?;
    let mut engine = PairEngine {
        sy: &sy,
        sx: &sx,
        horizon,
        symbols: sub.alphabet().len() as SymbolId,
        subordinate_memo: vec![HashMap::new(); horizon + 1],
        alive_memo: vec![HashMap::new(); horizon + 1],
        visited: 0,
    };

    // Subordinate pairs per level.  Subordination passes to the forgetful
    // images, and level 0 is the single pair of base classes, so lifting
    // level by level enumerates exactly the subordinate pairs.
    let mut cand: Vec<Vec<(usize, usize)>> = vec![vec![(0, 0)]];
    for l in 1..=n {
        let mut level = Vec::new();
        for &(py, px) in &cand[l - 1] {
            for &cy in &sy.levels[l].iota_up[py] {
                for &cx in &sx.levels[l].iota_up[px] {
                    if engine.subordinate(l, cy, cx) {
                        level.push((cy, cx));
                    }
                }
            }
        }
        level.sort_unstable();
        if level.len() as u128 > KEY_BUDGET {
            return Err(BuildError::ResourceLimit(level.len() as u128));
        }
        cand.push(level);
    }

    let mut kept: Vec<Vec<(usize, usize)>> = Vec::with_capacity(n + 1);
    for (l, level) in cand.iter().enumerate() {
        let mut keep = Vec::new();
        for &(cy, cx) in level {
            if engine.alive(l, cy, cx)? {
                keep.push((cy, cx));
            }
        }
        kept.push(keep);
    }

    let side_sub = assemble_canonical(&oy, &sy, n, sub.name().to_string());
    let side_sup = assemble_canonical(&ox, &sx, n, sup.name().to_string());

    let mut levels = Vec::with_capacity(n + 1);
    let mut index_below: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (l, pairs_l) in kept.iter().enumerate() {
        let index: BTreeMap<(usize, usize), usize> =
            pairs_l.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let vertex_names: Vec<String> = pairs_l
            .iter()
            .map(|&(cy, cx)| {
                format!(
                    "({},{})",
                    side_sub.levels[l].vertex_names[cy], side_sup.levels[l].vertex_names[cx]
                )
            })
            .collect();
        let mut iota = Vec::new();
        let mut edges = Vec::new();
        if l > 0 {
            let sl_y = &sy.levels[l];
            for (i, &(cy, cx)) in pairs_l.iter().enumerate() {
                let down = (sl_y.class_iota[cy], sx.levels[l].class_iota[cx]);
                let &j = index_below
                    .get(&down)
                    .ok_or(BuildError::HorizonTooSmall { level: l - 1 })?;
                iota.push(j);
                for &(sigma, dy) in &sl_y.class_steps[cy] {
                    let dx = step_class(&sx, l, cx, sigma).expect(
                        "subordination includes the one-symbol mask, so the ambient class steps",
                    );
                    let &t = index_below
                        .get(&(dy, dx))
                        .ok_or(BuildError::HorizonTooSmall { level: l - 1 })?;
                    edges.push((i, sigma, t));
                }
            }
        }
        levels.push(Level {
            vertex_names,
            iota,
            edges,
        });
        index_below = index;
    }

    let system = LambdaGraphSystem {
        name: format!("({} in {})", sub.name(), sup.name()),
        alphabet: sub.alphabet().clone(),
        levels,
        approximate: !exact,
        certified_path_length: if exact { 0 } else { config.buffer },
    };
    Ok(PairLgs {
        system,
        side_sub,
        side_sup,
        pairs: kept,
    })
}

fn step_class(side: &SideLevels, l: usize, c: usize, sigma: SymbolId) -> Option<usize> {
    let steps = &side.levels[l].class_steps[c];
    steps
        .binary_search_by_key(&sigma, |&(s, _)| s)
        .ok()
        .map(|i| steps[i].1)
}

struct PairEngine<'a> {
    sy: &'a SideLevels,
    sx: &'a SideLevels,
    horizon: usize,
    symbols: SymbolId,
    subordinate_memo: Vec<HashMap<(u32, u32), bool>>,
    alive_memo: Vec<HashMap<(u32, u32), bool>>,
    visited: u128,
}

impl PairEngine<'_> {
    /// Does every word the sub class admits also pass through the sup
    /// class?  Checked one symbol at a time: mask inclusion here, then
    /// recursion on the stepped classes.
    fn subordinate(&mut self, l: usize, cy: usize, cx: usize) -> bool {
        if l == 0 {
            return true;
        }
        let key = (cy as u32, cx as u32);
        if let Some(&b) = self.subordinate_memo[l].get(&key) {
            return b;
        }
        let my = self.sy.levels[l].class_mask[cy];
        let mx = self.sx.levels[l].class_mask[cx];
        let mut ok = my & !mx == 0;
        if ok {
            for &(sigma, dy) in &self.sy.levels[l].class_steps[cy] {
                let dx = step_class(self.sx, l, cx, sigma)
                    .expect("mask inclusion was just checked");
                if !self.subordinate(l - 1, dy, dx) {
                    ok = false;
                    break;
                }
            }
        }
        self.subordinate_memo[l].insert(key, ok);
        ok
    }

    /// Does the pair have incoming chains of subordinate pairs reaching the
    /// horizon?  Backward search with memoization; the search is cheap for
    /// surviving pairs (one chain suffices) and terminates for dying ones
    /// because their source sets thin out.
    fn alive(&mut self, l: usize, cy: usize, cx: usize) -> Result<bool, BuildError> {
        if l >= self.horizon {
            return Ok(true);
        }
        let key = (cy as u32, cx as u32);
        if let Some(&b) = self.alive_memo[l].get(&key) {
            return Ok(b);
        }
        self.visited += 1;
        if self.visited > KEY_BUDGET {
            return Err(BuildError::ResourceLimit(self.visited));
        }
        let mut found = false;
        'search: for sigma in 0..self.symbols {
            let up_y = match self.sy.levels[l + 1].rev_class.get(&(cy, sigma)) {
                Some(v) => v,
                None => continue,
            };
            let up_x = match self.sx.levels[l + 1].rev_class.get(&(cx, sigma)) {
                Some(v) => v,
                None => continue,
            };
            for &qy in up_y {
                for &qx in up_x {
                    if self.subordinate(l + 1, qy, qx) && self.alive(l + 1, qy, qx)? {
                        found = true;
                        break 'search;
                    }
                }
            }
        }
        self.alive_memo[l].insert(key, found);
        Ok(found)
    }
}

/// Decompose a subsystem/ambient pair into per-coordinate pairs, when the
/// ambient shift is a product and the subsystem is either a matching
/// product or a relabeling of one whose symbol map acts coordinatewise.
pub(crate) fn factor_pair(sub: &Subshift, sup: &Subshift) -> Option<Vec<(Subshift, Subshift)>> {
    let sup_factors = match sup.kind() {
        ShiftKind::Product(fs) if fs.len() >= 2 => fs,
        _ => return None,
    };
    match sub.kind() {
        ShiftKind::Product(ys) if ys.len() == sup_factors.len() => {
            for (y, x) in ys.iter().zip(sup_factors) {
                if y.alphabet().names() != x.alphabet().names() {
                    return None;
                }
            }
            Some(ys.iter().cloned().zip(sup_factors.iter().cloned()).collect())
        }
        ShiftKind::Embedding { source, map, .. } => {
            let ys = match source.kind() {
                ShiftKind::Product(f) if f.len() == sup_factors.len() => f,
                _ => return None,
            };
            let k = ys.len();
            let src_sizes: Vec<usize> = ys.iter().map(|y| y.alphabet().len()).collect();
            let tgt_sizes: Vec<usize> = sup_factors.iter().map(|x| x.alphabet().len()).collect();
            // Candidate per-coordinate maps, read off the tuples that vary
            // one coordinate away from the all-zero tuple.
            let mut coord_maps: Vec<Vec<SymbolId>> = Vec::with_capacity(k);
            for i in 0..k {
                let mut m = Vec::with_capacity(src_sizes[i]);
                for p in 0..src_sizes[i] {
                    let mut parts = vec![0 as SymbolId; k];
                    parts[i] = p as SymbolId;
                    let s = Alphabet::join_product_id(&parts, &src_sizes);
                    let t = map[s as usize];
                    m.push(Alphabet::split_product_id(t, &tgt_sizes)[i]);
                }
                coord_maps.push(m);
            }
            // The whole map must agree with them on every tuple.
            for (s, &t) in map.iter().enumerate() {
                let sp = Alphabet::split_product_id(s as SymbolId, &src_sizes);
                let tp = Alphabet::split_product_id(t, &tgt_sizes);
                for i in 0..k {
                    if coord_maps[i][sp[i] as usize] != tp[i] {
                        return None;
                    }
                }
            }
            let mut parts = Vec::with_capacity(k);
            for ((y, x), m) in ys.iter().zip(sup_factors).zip(coord_maps) {
                let name = format!("{}>{}", y.name(), x.name());
                let embedded = Subshift::embedding(name, y.clone(), x.alphabet().clone(), m).ok()?;
                parts.push((embedded, x.clone()));
            }
            Some(parts)
        }
        _ => None,
    }
}

fn assemble_product_pair(
    sub: &Subshift,
    sup: &Subshift,
    parts: &[PairLgs],
) -> Result<PairLgs, BuildError> {
    let sizes = sup
        .factor_sizes()
        .expect("factored pairs have a product ambient shift");
    let part_systems: Vec<&LambdaGraphSystem> = parts.iter().map(|p| &p.system).collect();
    let mut system = product_system(
        &part_systems,
        sub.alphabet(),
        &sizes,
        format!("({} in {})", sub.name(), sup.name()),
    )?;
    system.approximate = parts.iter().any(|p| p.system.approximate);
    system.certified_path_length = parts
        .iter()
        .filter(|p| p.system.approximate)
        .map(|p| p.system.certified_path_length)
        .min()
        .unwrap_or(0);

    let subs: Vec<&LambdaGraphSystem> = parts.iter().map(|p| &p.side_sub).collect();
    let side_sub = product_system(&subs, sub.alphabet(), &sizes, sub.name().to_string())?;
    let sups: Vec<&LambdaGraphSystem> = parts.iter().map(|p| &p.side_sup).collect();
    let side_sup = product_system(&sups, sup.alphabet(), &sizes, sup.name().to_string())?;

    let top = system.levels.len() - 1;
    let mut pairs = Vec::with_capacity(top + 1);
    for l in 0..=top {
        let y_counts: Vec<usize> = parts
            .iter()
            .map(|p| p.side_sub.levels[l].vertex_count())
            .collect();
        let x_counts: Vec<usize> = parts
            .iter()
            .map(|p| p.side_sup.levels[l].vertex_count())
            .collect();
        let lens: Vec<usize> = parts.iter().map(|p| p.pairs[l].len()).collect();
        let total: usize = lens.iter().product();
        let mut out = Vec::with_capacity(total);
        for v in 0..total {
            let tuple = decode_tuple(v, &lens);
            let mut y = 0usize;
            let mut x = 0usize;
            for (i, &t) in tuple.iter().enumerate() {
                let (cy, cx) = parts[i].pairs[l][t];
                y = y * y_counts[i] + cy;
                x = x * x_counts[i] + cx;
            }
            out.push((y, x));
        }
        pairs.push(out);
    }

    Ok(PairLgs {
        system,
        side_sub,
        side_sup,
        pairs,
    })
}

fn decode_tuple(mut v: usize, lens: &[usize]) -> Vec<usize> {
    let mut tuple = vec![0usize; lens.len()];
    for (i, &len) in lens.iter().enumerate().rev() {
        tuple[i] = v % len;
        v /= len;
    }
    tuple
}

/// Coordinatewise product of leveled systems over a product alphabet:
/// vertices are tuples, a product symbol steps every coordinate, and the
/// forgetful map acts per coordinate.  Tuples are ordered with the last
/// coordinate varying fastest, matching product symbol ids.
pub(crate) fn product_system(
    systems: &[&LambdaGraphSystem],
    alphabet: &Alphabet,
    sizes: &[usize],
    name: String,
) -> Result<LambdaGraphSystem, BuildError> {
    let top = systems[0].levels.len() - 1;
    debug_assert!(systems.iter().all(|s| s.levels.len() == top + 1));
    let splits: Vec<Vec<SymbolId>> = alphabet
        .ids()
        .map(|sigma| Alphabet::split_product_id(sigma, sizes))
        .collect();

    let mut predicted: u128 = 0;
    let mut levels = Vec::with_capacity(top + 1);
    for l in 0..=top {
        let counts: Vec<usize> = systems.iter().map(|s| s.levels[l].vertex_count()).collect();
        let total: usize = counts.iter().product();
        predicted = predicted.saturating_add(total as u128);
        if predicted > KEY_BUDGET {
            return Err(BuildError::ResourceLimit(predicted));
        }
        let step_maps: Vec<Vec<BTreeMap<SymbolId, usize>>> =
            systems.iter().map(|s| s.levels[l].step_map()).collect();
        let below_counts: Vec<usize> = if l > 0 {
            systems
                .iter()
                .map(|s| s.levels[l - 1].vertex_count())
                .collect()
        } else {
            Vec::new()
        };
        let mut vertex_names = Vec::with_capacity(total);
        let mut iota = Vec::with_capacity(if l > 0 { total } else { 0 });
        let mut edges = Vec::new();
        for v in 0..total {
            let tuple = decode_tuple(v, &counts);
            let names: Vec<&str> = tuple
                .iter()
                .enumerate()
                .map(|(i, &c)| systems[i].levels[l].vertex_names[c].as_str())
                .collect();
            vertex_names.push(format!("({})", names.join(";")));
            if l > 0 {
                let mut down = 0usize;
                for (i, &c) in tuple.iter().enumerate() {
                    down = down * below_counts[i] + systems[i].levels[l].iota[c];
                }
                iota.push(down);
                'symbols: for sigma in alphabet.ids() {
                    let mut tgt = 0usize;
                    for (i, &c) in tuple.iter().enumerate() {
                        match step_maps[i][c].get(&splits[sigma as usize][i]) {
                            Some(&t) => tgt = tgt * below_counts[i] + t,
                            None => continue 'symbols,
                        }
                    }
                    edges.push((v, sigma, tgt));
                }
            }
        }
        levels.push(Level {
            vertex_names,
            iota,
            edges,
        });
    }
    Ok(LambdaGraphSystem {
        name,
        alphabet: alphabet.clone(),
        levels,
        approximate: false,
        certified_path_length: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{brute_force_reference_pair, BuilderConfig};
    use crate::fixtures::{
        dyck, dyck_in_gamma, dyck_power, full_shift, gamma_shift, golden_mean, y_minus, y_plus,
    };
    use crate::lgs::validate_lgs;

    fn opener_coded_full2() -> Subshift {
        Subshift::embedding("openers", full_shift(2), dyck(2).alphabet().clone(), vec![0, 1])
            .unwrap()
    }

    fn closer_coded_full2() -> Subshift {
        Subshift::embedding("closers", full_shift(2), dyck(2).alphabet().clone(), vec![2, 3])
            .unwrap()
    }

    #[test]
    fn diagonal_pair_of_the_golden_mean_stays_two_per_level() {
        let gm = golden_mean();
        let built = build_pair_lgs(&gm, &gm, &BuilderConfig::for_levels(6)).unwrap();
        assert_eq!(built.system.vertex_counts(), vec![1, 2, 2, 2, 2, 2, 2]);
        assert!(!built.system.approximate);
        validate_lgs(&built.system).unwrap();
        // The surviving pairs are exactly the diagonal.
        for (l, pairs) in built.pairs.iter().enumerate().skip(1) {
            assert_eq!(built.side_sub.levels[l].vertex_count(), 2);
            assert!(pairs.iter().all(|&(y, x)| y == x));
        }
    }

    #[test]
    fn dyck_in_itself_counts() {
        let d2 = dyck(2);
        let built = build_pair_lgs(&d2, &d2, &BuilderConfig::for_levels(4)).unwrap();
        let expected: Vec<usize> = (0..=4).map(|l| if l == 0 { 1 } else { 2 * l * (1 << l) + 1 }).collect();
        assert_eq!(built.system.vertex_counts(), expected);
        validate_lgs(&built.system).unwrap();
        // Diagonal pairs all survive.
        for (l, pairs) in built.pairs.iter().enumerate() {
            let classes = built.side_sub.levels[l].vertex_count();
            for c in 0..classes {
                assert!(pairs.contains(&(c, c)), "diagonal pair missing at level {l}");
            }
        }
    }

    #[test]
    fn opener_coding_grows_and_closer_coding_collapses() {
        let d2 = dyck(2);
        let minus = build_pair_lgs(&opener_coded_full2(), &d2, &BuilderConfig::for_levels(4))
            .unwrap();
        assert_eq!(minus.system.vertex_counts(), vec![1, 2, 4, 8, 16]);
        let plus = build_pair_lgs(&closer_coded_full2(), &d2, &BuilderConfig::for_levels(4))
            .unwrap();
        assert_eq!(plus.system.vertex_counts(), vec![1, 1, 1, 1, 1]);
        validate_lgs(&minus.system).unwrap();
        validate_lgs(&plus.system).unwrap();
    }

    #[test]
    fn coded_products_factor_and_multiply() {
        let ambient = dyck_power(2, 2);
        let minus = build_pair_lgs(&y_minus(), &ambient, &BuilderConfig::for_levels(3)).unwrap();
        assert_eq!(minus.system.vertex_counts(), vec![1, 10, 68, 392]);
        let plus = build_pair_lgs(&y_plus(), &ambient, &BuilderConfig::for_levels(3)).unwrap();
        assert_eq!(plus.system.vertex_counts(), vec![1, 5, 17, 49]);
        validate_lgs(&minus.system).unwrap();
        validate_lgs(&plus.system).unwrap();
        // Projection onto the sub side is onto at every level.
        for (l, pairs) in minus.pairs.iter().enumerate() {
            let mut seen: Vec<usize> = pairs.iter().map(|&(y, _)| y).collect();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), minus.side_sub.levels[l].vertex_count());
        }
    }

    #[test]
    fn wildcard_extension_merges_the_empty_and_wildcard_stacks_at_level_one() {
        // At level 1 the empty stack and a wildcard-topped stack of the
        // ambient shift admit the same one-symbol continuations (every
        // closer is accepted by both), so they fall into one class.  The
        // bracket coding then pairs with three ambient classes: its empty
        // stack with the merged class, and each single-opener stack with
        // both the merged class and the matching-opener class.
        let built = build_pair_lgs(
            &dyck_in_gamma(1),
            &gamma_shift(1),
            &BuilderConfig::for_levels(2).with_buffer(2),
        )
        .unwrap();
        assert_eq!(built.system.vertex_counts()[0..2], [1, 5]);
        validate_lgs(&built.system).unwrap();
        // The word-enumeration reference arrives at the same pair sets.
        let reference = brute_force_reference_pair(&dyck_in_gamma(1), &gamma_shift(1), 2, 6).unwrap();
        assert_eq!(reference.counts, built.system.vertex_counts());
        for level in 0..=2 {
            let b: std::collections::BTreeSet<_> =
                reference.levels[level].iter().cloned().collect();
            assert_eq!(
                crate::builders::brute::packed_context_pair_sets(&built, level),
                b,
                "level {level}"
            );
        }
    }

    #[test]
    fn containment_violations_are_reported() {
        let gm = golden_mean();
        let f2 = full_shift(2);
        match build_pair_lgs(&f2, &gm, &BuilderConfig::for_levels(3)) {
            Err(BuildError::NotContained { witness, .. }) => assert_eq!(witness, vec![1, 1]),
            other => panic!("expected a containment error, got {:?}", other.err()),
        }
        let d2 = dyck(2);
        assert!(matches!(
            build_pair_lgs(&gm, &d2, &BuilderConfig::for_levels(3)),
            Err(BuildError::AlphabetMismatch(_, _))
        ));
    }

    #[test]
    fn factoring_recovers_coordinate_codings() {
        let parts = factor_pair(&y_minus(), &dyck_power(2, 2)).unwrap();
        assert_eq!(parts.len(), 2);
        // First coordinate: the Dyck shift itself; second: openers only.
        assert!(parts[0].0.is_admissible(&[2]));
        assert!(parts[1].0.is_admissible(&[0]));
        assert!(!parts[1].0.is_admissible(&[2]));
        // A non-coordinatewise map must not factor: swap two images so the
        // second coordinate of the image depends on the first of the source.
        let source = Subshift::product("src", vec![full_shift(2), full_shift(2)]).unwrap();
        let ambient = Subshift::product("amb", vec![full_shift(2), full_shift(2)]).unwrap();
        let twisted = Subshift::embedding(
            "twisted",
            source.clone(),
            ambient.alphabet().clone(),
            vec![0, 1, 3, 2],
        )
        .unwrap();
        assert!(factor_pair(&twisted, &ambient).is_none());
        let straight = Subshift::embedding(
            "straight",
            source,
            ambient.alphabet().clone(),
            vec![0, 1, 2, 3],
        )
        .unwrap();
        assert!(factor_pair(&straight, &ambient).is_some());
    }
}
