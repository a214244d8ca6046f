//! Constructions of leveled presentations from a shift description.
//!
//! Four builders share one engine.  [`build_word_lgs`] presents levels by
//! admissible words.  [`build_canonical_lgs`] presents them by truncated
//! follower sets, obtained by grouping realizable context keys into
//! depth-equal classes.  [`build_pair_word_lgs`] pairs words with the
//! follower classes containing them.  [`build_pair_lgs`] (in [`pair`])
//! restricts a follower presentation of an ambient shift to the classes
//! reachable alongside a subsystem.
//!
//! [`brute`] holds a deliberately independent reference implementation that
//! works by enumerating words and truncated follower languages directly,
//! touching the shift only through admissibility queries.  The two routes
//! are compared in the test suites; they share no construction code.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::alphabet::Word;
use crate::lgs::{LambdaGraphSystem, Level};
use crate::shannon::oracle::{Key, Oracle};
use crate::shannon::ShannonError;
use crate::subshift::{check_containment, LabeledGraph, ShiftError, ShiftKind, Subshift};

pub mod brute;
pub mod pair;

pub use brute::{brute_force_reference, brute_force_reference_pair, BruteLevels, BrutePairLevels};
pub use pair::{build_pair_lgs, PairLgs};

/// Hard ceiling on the number of context keys / candidate vertices a build
/// may materialize.  Exceeding it aborts the build with
/// [`BuildError::ResourceLimit`] instead of exhausting memory.
pub const KEY_BUDGET: u128 = 10_000_000;

/// Depth and horizon parameters shared by the builders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuilderConfig {
    /// Number of levels to emit (the built system spans levels `0..=levels`).
    pub levels: usize,
    /// Extra look-ahead levels used to certify survival in approximate mode.
    pub buffer: usize,
    /// Longest context word the word-enumeration fallback may examine.
    pub context_bound: usize,
    /// Prefer the exact key-based engine over word enumeration.
    pub exact: bool,
}

impl BuilderConfig {
    /// Defaults for a given depth: buffer equal to the depth, context bound
    /// `2·levels + 2`, exact mode.
    pub fn for_levels(levels: usize) -> Self {
        BuilderConfig {
            levels,
            buffer: levels,
            context_bound: 2 * levels + 2,
            exact: true,
        }
    }

    pub fn with_buffer(mut self, buffer: usize) -> Self {
        self.buffer = buffer;
        self
    }

    fn validate(&self) -> Result<(), BuildError> {
        if self.levels == 0 {
            return Err(BuildError::BadConfig(
                "at least one level is required".into(),
            ));
        }
        if self.context_bound < self.levels {
            return Err(BuildError::BadConfig(format!(
                "context bound {} is shorter than the requested depth {}",
                self.context_bound, self.levels
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Shannon(#[from] ShannonError),
    #[error("predicted working-set size {0} exceeds the budget of {KEY_BUDGET}")]
    ResourceLimit(u128),
    #[error("the two shifts use different alphabets ({0} vs {1})")]
    AlphabetMismatch(String, String),
    #[error("{sub} is not contained in {sup}: word {witness:?} is admissible only in the former")]
    NotContained {
        sub: String,
        sup: String,
        witness: Word,
    },
    #[error(
        "level {level}: a forgetful image fell outside the constructed vertex set; \
         increase the look-ahead buffer or context bound"
    )]
    HorizonTooSmall { level: usize },
    #[error("presentation is not forward separated: vertices {0} and {1} have equal follower sets")]
    NotSeparated(String, String),
    #[error("{0}")]
    BadConfig(String),
}

impl From<ShiftError> for BuildError {
    fn from(e: ShiftError) -> Self {
        match e {
            ShiftError::AlphabetMismatch(a, b) => BuildError::AlphabetMismatch(a, b),
            other => BuildError::BadConfig(other.to_string()),
        }
    }
}

/// One level of realizable context keys grouped into depth-equal classes.
///
/// Two keys land in the same class exactly when they admit the same words of
/// the level's length; the grouping is computed bottom-up, refining each
/// level by the one-symbol mask together with the class of every successor
/// one level down.
pub(crate) struct SideLevel {
    pub keys: Vec<Key>,
    pub class_of: Vec<usize>,
    pub class_repr: Vec<usize>,
    pub class_mask: Vec<u128>,
    /// Sorted `(symbol, class one level down)` successor lists per class.
    pub class_steps: Vec<Vec<(u32, usize)>>,
    /// Class one level down that each class forgets to.  Empty at level 0.
    pub class_iota: Vec<usize>,
    /// Inverse of `class_iota` on the level below: `iota_up[c]` lists the
    /// classes at this level whose forgetful image is `c`.
    pub iota_up: Vec<Vec<usize>>,
    /// `(class below, symbol) -> classes at this level stepping onto it`.
    pub rev_class: BTreeMap<(usize, u32), Vec<usize>>,
}

pub(crate) struct SideLevels {
    pub levels: Vec<SideLevel>,
}

impl SideLevels {
    pub fn build(oracle: &Oracle, top: usize) -> Result<SideLevels, BuildError> {
        let mut predicted: u128 = 0;
        for n in 0..=top {
            predicted = predicted.saturating_add(oracle.estimate_keys(n));
        }
        if predicted > KEY_BUDGET {
            return Err(BuildError::ResourceLimit(predicted));
        }

        let mut levels: Vec<SideLevel> = Vec::with_capacity(top + 1);
        levels.push(SideLevel {
            keys: vec![Key::Unit],
            class_of: vec![0],
            class_repr: vec![0],
            class_mask: vec![0],
            class_steps: vec![Vec::new()],
            class_iota: Vec::new(),
            iota_up: Vec::new(),
            rev_class: BTreeMap::new(),
        });

        for n in 1..=top {
            let keys = oracle.enumerate_keys(n);
            let below = &levels[n - 1];
            let below_index: BTreeMap<&Key, usize> =
                below.keys.iter().enumerate().map(|(i, k)| (k, i)).collect();

            let mut sig_to_class: BTreeMap<(u128, Vec<(u32, usize)>), usize> = BTreeMap::new();
            let mut class_of = vec![0usize; keys.len()];
            let mut class_repr = Vec::new();
            let mut class_mask = Vec::new();
            let mut class_steps: Vec<Vec<(u32, usize)>> = Vec::new();
            for (i, key) in keys.iter().enumerate() {
                let mask = oracle.key_mask(key, n);
                let mut steps = Vec::new();
                for sigma in oracle.alphabet().ids() {
                    if mask >> sigma & 1 == 1 {
                        let succ = oracle
                            .step_key(key, n, sigma)
                            .expect("a masked symbol always steps");
                        let j = *below_index
                            .get(&succ)
                            .expect("successors of realizable keys are realizable");
                        steps.push((sigma, below.class_of[j]));
                    }
                }
                let sig = (mask, steps);
                class_of[i] = match sig_to_class.get(&sig) {
                    Some(&c) => c,
                    None => {
                        let c = class_repr.len();
                        class_repr.push(i);
                        class_mask.push(sig.0);
                        class_steps.push(sig.1.clone());
                        sig_to_class.insert(sig, c);
                        c
                    }
                };
            }

            let mut class_iota = Vec::with_capacity(class_repr.len());
            for &repr in &class_repr {
                let down = oracle.iota_key(&keys[repr], n);
                let j = *below_index
                    .get(&down)
                    .expect("forgetting a realizable key is realizable");
                class_iota.push(below.class_of[j]);
            }
            let mut iota_up = vec![Vec::new(); below.class_repr.len()];
            for (c, &down) in class_iota.iter().enumerate() {
                iota_up[down].push(c);
            }
            let mut rev_class: BTreeMap<(usize, u32), Vec<usize>> = BTreeMap::new();
            for (c, steps) in class_steps.iter().enumerate() {
                for &(sigma, down) in steps {
                    rev_class.entry((down, sigma)).or_default().push(c);
                }
            }

            levels.push(SideLevel {
                keys,
                class_of,
                class_repr,
                class_mask,
                class_steps,
                class_iota,
                iota_up,
                rev_class,
            });
        }
        Ok(SideLevels { levels })
    }

    pub fn class_count(&self, n: usize) -> usize {
        self.levels[n].class_repr.len()
    }
}

/// Assemble the class structure of `side` into a leveled presentation.
pub(crate) fn assemble_canonical(
    oracle: &Oracle,
    side: &SideLevels,
    top: usize,
    name: String,
) -> LambdaGraphSystem {
    let mut levels = Vec::with_capacity(top + 1);
    for n in 0..=top {
        let sl = &side.levels[n];
        let vertex_names: Vec<String> = sl
            .class_repr
            .iter()
            .map(|&i| oracle.key_label(&sl.keys[i]))
            .collect();
        let iota = if n == 0 {
            Vec::new()
        } else {
            sl.class_iota.clone()
        };
        let mut edges = Vec::new();
        for (c, steps) in sl.class_steps.iter().enumerate() {
            for &(sigma, down) in steps {
                edges.push((c, sigma, down));
            }
        }
        levels.push(Level {
            vertex_names,
            iota,
            edges,
        });
    }
    LambdaGraphSystem {
        name,
        alphabet: oracle.alphabet().clone(),
        levels,
        approximate: false,
        certified_path_length: 0,
    }
}

/// Present levels by admissible words: level `n` has one vertex per
/// admissible word of length `n`, a single outgoing edge labeled with the
/// word's first symbol onto the word shortened at the front, and the
/// forgetful map shortens at the back.
pub fn build_word_lgs(shift: &Subshift, top: usize) -> Result<LambdaGraphSystem, BuildError> {
    if top == 0 {
        return Err(BuildError::BadConfig(
            "at least one level is required".into(),
        ));
    }
    let alpha = shift.alphabet().clone();
    let mut level_words: Vec<Vec<Word>> = vec![vec![Vec::new()]];
    let mut total: u128 = 1;
    for n in 1..=top {
        let projected = total.saturating_add(
            (level_words[n - 1].len() as u128).saturating_mul(alpha.len() as u128),
        );
        if projected > KEY_BUDGET {
            return Err(BuildError::ResourceLimit(projected));
        }
        let words = shift.words_of_length(n);
        total = total.saturating_add(words.len() as u128);
        level_words.push(words);
    }

    let mut levels = Vec::with_capacity(top + 1);
    let mut below_index: BTreeMap<Word, usize> = BTreeMap::new();
    below_index.insert(Vec::new(), 0);
    for (n, words) in level_words.iter().enumerate() {
        let vertex_names: Vec<String> = words
            .iter()
            .map(|w| {
                if w.is_empty() {
                    "e".to_string()
                } else {
                    alpha.format_word(w)
                }
            })
            .collect();
        let mut iota = Vec::new();
        let mut edges = Vec::new();
        if n > 0 {
            for (i, w) in words.iter().enumerate() {
                iota.push(below_index[&w[..n - 1]]);
                edges.push((i, w[0], below_index[&w[1..]]));
            }
        }
        below_index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        levels.push(Level {
            vertex_names,
            iota,
            edges,
        });
    }
    Ok(LambdaGraphSystem {
        name: format!("{}-words", shift.name()),
        alphabet: alpha,
        levels,
        approximate: false,
        certified_path_length: 0,
    })
}

/// Present levels by truncated follower sets.
///
/// In exact mode the vertices at level `n` are the depth-`n` classes of
/// realizable context keys, which stand in bijection with the truncated
/// follower sets of left-infinite histories.  In approximate mode the same
/// object is computed by the word-enumeration engine at depth
/// `levels + buffer` and truncated, and the result carries an `approximate`
/// marker together with the certified incoming-path length.
pub fn build_canonical_lgs(
    shift: &Subshift,
    config: &BuilderConfig,
) -> Result<LambdaGraphSystem, BuildError> {
    config.validate()?;
    if config.exact {
        let oracle = Oracle::from_subshift(shift)?;
        let side = SideLevels::build(&oracle, config.levels)?;
        Ok(assemble_canonical(
            &oracle,
            &side,
            config.levels,
            shift.name().to_string(),
        ))
    } else {
        brute::approximate_canonical(shift, config)
    }
}

/// The word/class pair presentation together with the follower presentation
/// it refines.
pub struct PairWordLgs {
    pub system: LambdaGraphSystem,
    pub canonical: LambdaGraphSystem,
    /// Per level, the `(word, follower class)` pair behind each vertex.
    pub pairs: Vec<Vec<(Word, usize)>>,
}

/// Pair admissible words with the follower classes whose context contains
/// them: level `n` has one vertex per pair `(a, C)` with `a` a length-`n`
/// word readable from `C`, one outgoing edge labeled `a_1` onto
/// `(a_2…a_n, τ_{a_1} C)`, and the componentwise forgetful map.
///
/// Every vertex has exactly one outgoing edge, so level-`n` vertices
/// correspond bijectively to the paths of the follower presentation from
/// level `n` down to level 0.
pub fn build_pair_word_lgs(shift: &Subshift, top: usize) -> Result<PairWordLgs, BuildError> {
    if top == 0 {
        return Err(BuildError::BadConfig(
            "at least one level is required".into(),
        ));
    }
    check_forward_separated(shift, top)?;
    let oracle = Oracle::from_subshift(shift)?;
    let side = SideLevels::build(&oracle, top)?;
    let canonical = assemble_canonical(&oracle, &side, top, shift.name().to_string());
    let predicted: u128 = canonical
        .path_counts()
        .iter()
        .fold(0u128, |a, &p| a.saturating_add(p));
    if predicted > KEY_BUDGET {
        return Err(BuildError::ResourceLimit(predicted));
    }

    // Context words per class, one level at a time: a word is readable from
    // a class exactly when its first symbol is allowed and the rest is
    // readable from the successor class.
    let alpha = shift.alphabet();
    let mut ctx: Vec<Vec<Vec<Word>>> = vec![vec![vec![Vec::new()]]];
    for n in 1..=top {
        let sl = &side.levels[n];
        let mut per_class = Vec::with_capacity(side.class_count(n));
        for steps in &sl.class_steps {
            let mut words = Vec::new();
            for &(sigma, down) in steps {
                for tail in &ctx[n - 1][down] {
                    let mut w = Vec::with_capacity(n);
                    w.push(sigma);
                    w.extend_from_slice(tail);
                    words.push(w);
                }
            }
            per_class.push(words);
        }
        ctx.push(per_class);
    }

    let mut levels = Vec::with_capacity(top + 1);
    let mut pairs: Vec<Vec<(Word, usize)>> = Vec::with_capacity(top + 1);
    let mut below_index: BTreeMap<(Word, usize), usize> = BTreeMap::new();
    for n in 0..=top {
        let sl = &side.levels[n];
        let mut level_pairs = Vec::new();
        for c in 0..side.class_count(n) {
            for w in &ctx[n][c] {
                level_pairs.push((w.clone(), c));
            }
        }
        let vertex_names: Vec<String> = level_pairs
            .iter()
            .map(|(w, c)| {
                let word = if w.is_empty() {
                    "e".to_string()
                } else {
                    alpha.format_word(w)
                };
                format!("{}|{}", word, canonical.levels[n].vertex_names[*c])
            })
            .collect();
        let mut iota = Vec::new();
        let mut edges = Vec::new();
        if n > 0 {
            for (i, (w, c)) in level_pairs.iter().enumerate() {
                iota.push(below_index[&(w[..n - 1].to_vec(), sl.class_iota[*c])]);
                let &(_, down) = sl
                    .class_steps[*c]
                    .iter()
                    .find(|&&(sigma, _)| sigma == w[0])
                    .expect("the first symbol of a context word is allowed");
                edges.push((i, w[0], below_index[&(w[1..].to_vec(), down)]));
            }
        }
        below_index = level_pairs
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        levels.push(Level {
            vertex_names,
            iota,
            edges,
        });
        pairs.push(level_pairs);
    }

    let system = LambdaGraphSystem {
        name: format!("{}-pairword", shift.name()),
        alphabet: alpha.clone(),
        levels,
        approximate: false,
        certified_path_length: 0,
    };
    Ok(PairWordLgs {
        system,
        canonical,
        pairs,
    })
}

/// Reject graph-presented shifts whose presentation conflates vertices: the
/// word/class pairing is only meaningful when distinct vertices have
/// distinct follower sets.
fn check_forward_separated(shift: &Subshift, depth: usize) -> Result<(), BuildError> {
    match shift.kind() {
        ShiftKind::Presented(graph) => {
            graph_forward_separated(graph, shift.alphabet().len(), depth.max(8))
        }
        ShiftKind::Product(factors) => {
            for f in factors {
                check_forward_separated(f, depth)?;
            }
            Ok(())
        }
        ShiftKind::Embedding { source, .. } => check_forward_separated(source, depth),
        _ => Ok(()),
    }
}

fn graph_forward_separated(
    graph: &LabeledGraph,
    symbols: usize,
    depth: usize,
) -> Result<(), BuildError> {
    let n = graph.vertex_names.len();
    for u in 0..n {
        for v in u + 1..n {
            let au: std::collections::BTreeSet<usize> = [u].into();
            let av: std::collections::BTreeSet<usize> = [v].into();
            if subsets_equivalent(graph, symbols, &au, &av, depth) {
                return Err(BuildError::NotSeparated(
                    graph.vertex_names[u].clone(),
                    graph.vertex_names[v].clone(),
                ));
            }
        }
    }
    Ok(())
}

fn subsets_equivalent(
    graph: &LabeledGraph,
    symbols: usize,
    a: &std::collections::BTreeSet<usize>,
    b: &std::collections::BTreeSet<usize>,
    depth: usize,
) -> bool {
    if depth == 0 || a == b {
        return true;
    }
    for sigma in 0..symbols as u32 {
        let sa = graph.step_subset(a, sigma);
        let sb = graph.step_subset(b, sigma);
        if sa.is_empty() != sb.is_empty() {
            return false;
        }
        if !sa.is_empty() && !subsets_equivalent(graph, symbols, &sa, &sb, depth - 1) {
            return false;
        }
    }
    true
}

/// Run the language-inclusion precheck and translate its outcome into build
/// errors.
pub(crate) fn require_contained(
    sub: &Subshift,
    sup: &Subshift,
    depth: usize,
) -> Result<(), BuildError> {
    match check_containment(sub, sup, depth)? {
        None => Ok(()),
        Some(witness) => Err(BuildError::NotContained {
            sub: sub.name().to_string(),
            sup: sup.name().to_string(),
            witness,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{dyck, even_shift, full_shift, golden_mean};

    #[test]
    fn word_system_counts_follow_the_language() {
        let gm = golden_mean();
        let sys = build_word_lgs(&gm, 6).unwrap();
        assert_eq!(sys.vertex_counts(), vec![1, 2, 3, 5, 8, 13, 21]);
        let f2 = full_shift(2);
        let sys = build_word_lgs(&f2, 4).unwrap();
        assert_eq!(sys.vertex_counts(), vec![1, 2, 4, 8, 16]);
    }

    #[test]
    fn word_system_edges_drop_the_front() {
        let gm = golden_mean();
        let sys = build_word_lgs(&gm, 3).unwrap();
        // Level 2 words in order: 00, 01, 10; the edge out of "01" reads "0"
        // and lands on "1".
        assert_eq!(sys.levels[2].vertex_names, vec!["0 0", "0 1", "1 0"]);
        assert_eq!(sys.levels[2].edges[1], (1, 0, 1));
        // Forgetting drops the back: "01" forgets to "0".
        assert_eq!(sys.levels[2].iota[1], 0);
        crate::lgs::validate_lgs(&sys).unwrap();
    }

    #[test]
    fn canonical_counts_on_the_standard_examples() {
        let gm = golden_mean();
        let sys = build_canonical_lgs(&gm, &BuilderConfig::for_levels(8)).unwrap();
        assert_eq!(sys.vertex_counts(), vec![1, 2, 2, 2, 2, 2, 2, 2, 2]);
        crate::lgs::validate_lgs(&sys).unwrap();

        let even = even_shift();
        let sys = build_canonical_lgs(&even, &BuilderConfig::for_levels(3)).unwrap();
        assert_eq!(sys.vertex_counts(), vec![1, 2, 3, 3]);

        let f2 = full_shift(2);
        let sys = build_canonical_lgs(&f2, &BuilderConfig::for_levels(5)).unwrap();
        assert_eq!(sys.vertex_counts(), vec![1; 6]);
    }

    #[test]
    fn canonical_dyck_counts_are_two_to_the_n_plus_one_minus_one() {
        let d2 = dyck(2);
        let sys = build_canonical_lgs(&d2, &BuilderConfig::for_levels(6)).unwrap();
        let expected: Vec<usize> = (0..=6).map(|n| (1usize << (n + 1)) - 1).collect();
        assert_eq!(sys.vertex_counts(), expected);
        crate::lgs::validate_lgs(&sys).unwrap();
    }

    #[test]
    fn pairword_counts_are_path_counts() {
        let gm = golden_mean();
        let built = build_pair_word_lgs(&gm, 6).unwrap();
        assert_eq!(built.system.vertex_counts(), vec![1, 3, 5, 8, 13, 21, 34]);
        let paths = built.canonical.path_counts();
        for (n, &c) in built.system.vertex_counts().iter().enumerate() {
            assert_eq!(c as u128, paths[n]);
        }
        crate::lgs::validate_lgs(&built.system).unwrap();

        let f2 = full_shift(2);
        let built = build_pair_word_lgs(&f2, 5).unwrap();
        assert_eq!(built.system.vertex_counts(), vec![1, 2, 4, 8, 16, 32]);
    }

    #[test]
    fn pairword_rejects_conflated_presentations() {
        // Two vertices with identical follower sets (a doubled full-shift
        // cover) must be refused.
        let graph = LabeledGraph::new(
            vec!["p".into(), "q".into()],
            vec![(0, 0, 1), (0, 1, 1), (1, 0, 0), (1, 1, 0)],
        );
        let alpha = crate::alphabet::Alphabet::new(["0", "1"]).unwrap();
        let shift = Subshift::sofic("doubled", alpha, graph).unwrap();
        match build_pair_word_lgs(&shift, 3) {
            Err(BuildError::NotSeparated(_, _)) => {}
            other => panic!("expected a separation error, got {:?}", other.map(|p| p.system)),
        }
    }

    #[test]
    fn config_validation_rejects_degenerate_depths() {
        let gm = golden_mean();
        let bad = BuilderConfig {
            levels: 0,
            buffer: 0,
            context_bound: 4,
            exact: true,
        };
        assert!(matches!(
            build_canonical_lgs(&gm, &bad),
            Err(BuildError::BadConfig(_))
        ));
        let bad = BuilderConfig {
            levels: 5,
            buffer: 2,
            context_bound: 3,
            exact: true,
        };
        assert!(matches!(
            build_canonical_lgs(&gm, &bad),
            Err(BuildError::BadConfig(_))
        ));
    }
}
