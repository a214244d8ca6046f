//! The named example shifts used by the command line tool and the test
//! suites: golden mean, even shift, full shifts, Dyck shifts and their
//! products, the three bracket-coded subsystems of those products, and the
//! wildcard extensions of the two-bracket Dyck shift.

use crate::alphabet::{Alphabet, SymbolId};
use crate::monoid::MonoidTable;
use crate::subshift::{LabeledGraph, Subshift};

/// Golden mean shift: binary sequences with no two adjacent `1`s.
pub fn golden_mean() -> Subshift {
    let alpha = Alphabet::new(["0", "1"]).unwrap();
    Subshift::sft("gm", alpha, &[vec![1, 1]]).unwrap()
}

/// Even shift: binary sequences in which maximal runs of `1` between two
/// `0`s have even length.
pub fn even_shift() -> Subshift {
    let alpha = Alphabet::new(["0", "1"]).unwrap();
    let graph = LabeledGraph::new(
        vec!["e".into(), "o".into()],
        vec![(0, 0, 0), (0, 1, 1), (1, 1, 0)],
    );
    Subshift::sofic("even", alpha, graph).unwrap()
}

/// Full shift on `n` symbols named `0..n-1`.
pub fn full_shift(n: usize) -> Subshift {
    let alpha = Alphabet::new((0..n).map(|i| i.to_string())).unwrap();
    Subshift::full(format!("full{n}"), alpha)
}

/// Dyck shift on `pairs` kinds of matched brackets.
pub fn dyck(pairs: usize) -> Subshift {
    Subshift::monoid(format!("dyck{pairs}"), MonoidTable::dyck(pairs))
}

/// `copies`-fold coordinatewise product of [`dyck`]`(pairs)`.
pub fn dyck_power(pairs: usize, copies: usize) -> Subshift {
    let factors = (0..copies).map(|_| dyck(pairs)).collect();
    Subshift::product(format!("dyck{pairs}x{copies}"), factors).unwrap()
}

/// Send a binary symbol to one of the two brackets of the first kind
/// (`false`) or of the second kind — the closers — (`true`)… more precisely:
/// the opener coding maps `0 ↦ (0`, `1 ↦ (1`; the closer coding maps
/// `0 ↦ )0`, `1 ↦ )1`.
fn bracket_coding(closers: bool) -> [SymbolId; 2] {
    if closers {
        [2, 3]
    } else {
        [0, 1]
    }
}

fn y_embedding(name: &str, closers: bool) -> Subshift {
    let source = Subshift::product(format!("{name}-source"), vec![dyck(2), full_shift(2)]).unwrap();
    let ambient = dyck_power(2, 2);
    let phi = bracket_coding(closers);
    let mut map = Vec::with_capacity(8);
    for s in 0..4u32 {
        for t in 0..2usize {
            map.push(s * 4 + phi[t]);
        }
    }
    Subshift::embedding(name, source, ambient.alphabet().clone(), map).unwrap()
}

/// Image of `D₂ × S₂` in `D₂ × D₂`: the second coordinate is coded by
/// openers.
pub fn y_minus() -> Subshift {
    y_embedding("yminus", false)
}

/// Image of `D₂ × S₂` in `D₂ × D₂`: the second coordinate is coded by
/// closers.
pub fn y_plus() -> Subshift {
    y_embedding("yplus", true)
}

/// Image of `D₂ × S₂ × S₂` in `D₂ × D₂ × D₂`: one full-shift coordinate
/// coded by openers, the other by closers.
pub fn y_triple() -> Subshift {
    let source = Subshift::product(
        "ytriple-source",
        vec![dyck(2), full_shift(2), full_shift(2)],
    )
    .unwrap();
    let ambient = dyck_power(2, 3);
    let minus = bracket_coding(false);
    let plus = bracket_coding(true);
    let mut map = Vec::with_capacity(16);
    for s in 0..4u32 {
        for t in 0..2usize {
            for u in 0..2usize {
                map.push(s * 16 + minus[t] * 4 + plus[u]);
            }
        }
    }
    Subshift::embedding("ytriple", source, ambient.alphabet().clone(), map).unwrap()
}

/// Two-bracket Dyck shift extended by `k` wildcard bracket kinds whose
/// openers also cancel the two plain closers.
pub fn gamma_shift(k: usize) -> Subshift {
    Subshift::monoid(format!("gamma{k}"), MonoidTable::gamma_extension(k))
}

/// The two-bracket Dyck shift embedded in [`gamma_shift`]`(k)` on the plain
/// (non-wildcard) brackets.
pub fn dyck_in_gamma(k: usize) -> Subshift {
    let ambient = gamma_shift(k);
    let map = vec![0, 1, (k + 2) as SymbolId, (k + 3) as SymbolId];
    Subshift::embedding(
        format!("dyck2-in-gamma{k}"),
        dyck(2),
        ambient.alphabet().clone(),
        map,
    )
    .unwrap()
}

/// A named builtin example: the shift itself, the subsystem/ambient pair
/// that subsystem commands operate on, and a default depth.
///
/// For plain shifts the pair is the diagonal (the shift inside itself); for
/// the coded subsystems it is the subsystem inside its ambient product; for
/// the wildcard extensions it is the embedded plain Dyck shift inside the
/// extension.
pub struct Builtin {
    pub shift: Subshift,
    pub sub: Subshift,
    pub sup: Subshift,
    pub default_levels: usize,
}

pub const BUILTIN_NAMES: &[&str] = &[
    "gm", "even", "full2", "dyck2", "dyck2x2", "dyck2x3", "yminus", "yplus", "ytriple",
    "gammaK=<k>",
];

/// Look up a builtin by name; `gammaK=<k>` selects the wildcard extension
/// with `k ≥ 1` wildcard kinds.
pub fn builtin(name: &str) -> Option<Builtin> {
    fn diagonal(shift: Subshift, default_levels: usize) -> Option<Builtin> {
        Some(Builtin {
            sub: shift.clone(),
            sup: shift.clone(),
            shift,
            default_levels,
        })
    }
    match name {
        "gm" => diagonal(golden_mean(), 8),
        "even" => diagonal(even_shift(), 8),
        "full2" => diagonal(full_shift(2), 8),
        "dyck2" => diagonal(dyck(2), 8),
        "dyck2x2" => diagonal(dyck_power(2, 2), 6),
        "dyck2x3" => diagonal(dyck_power(2, 3), 6),
        "yminus" => Some(Builtin {
            shift: y_minus(),
            sub: y_minus(),
            sup: dyck_power(2, 2),
            default_levels: 6,
        }),
        "yplus" => Some(Builtin {
            shift: y_plus(),
            sub: y_plus(),
            sup: dyck_power(2, 2),
            default_levels: 6,
        }),
        "ytriple" => Some(Builtin {
            shift: y_triple(),
            sub: y_triple(),
            sup: dyck_power(2, 3),
            default_levels: 6,
        }),
        _ => {
            let k: usize = name.strip_prefix("gammaK=")?.parse().ok()?;
            if k == 0 {
                return None;
            }
            Some(Builtin {
                shift: gamma_shift(k),
                sub: dyck_in_gamma(k),
                sup: gamma_shift(k),
                default_levels: 6,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coded_subsystems_land_in_their_ambient_products() {
        let ambient = dyck_power(2, 2);
        for shift in [y_minus(), y_plus()] {
            assert_eq!(shift.alphabet().names(), ambient.alphabet().names());
            for w in shift.words_of_length(3) {
                assert!(ambient.is_admissible(&w));
            }
        }
        let ambient = dyck_power(2, 3);
        let y = y_triple();
        assert_eq!(y.alphabet().names(), ambient.alphabet().names());
        for w in y.words_of_length(2) {
            assert!(ambient.is_admissible(&w));
        }
    }

    #[test]
    fn opener_and_closer_codings_differ() {
        // The second coordinate of yminus reads openers, of yplus closers.
        let minus = y_minus();
        let plus = y_plus();
        // Product symbol ((0, (0) has id 0; ((0, )0) has id 2.
        assert!(minus.is_admissible(&[0]));
        assert!(!minus.is_admissible(&[2]));
        assert!(plus.is_admissible(&[2]));
        assert!(!plus.is_admissible(&[0]));
    }

    #[test]
    fn dyck_in_gamma_matches_the_plain_brackets() {
        let k = 2;
        let inner = dyck_in_gamma(k);
        let gamma = gamma_shift(k);
        assert_eq!(inner.alphabet().names(), gamma.alphabet().names());
        // a- a+ is admissible both ways; a- b+ in neither; the wildcard g1-
        // is outside the image.
        let a_minus = 0;
        let a_plus = (k + 2) as SymbolId;
        let b_plus = (k + 3) as SymbolId;
        assert!(inner.is_admissible(&[a_minus, a_plus]));
        assert!(!inner.is_admissible(&[a_minus, b_plus]));
        assert!(!inner.is_admissible(&[2]));
        assert!(gamma.is_admissible(&[2]));
    }

    #[test]
    fn builtin_lookup_covers_the_published_names() {
        for name in ["gm", "even", "full2", "dyck2", "dyck2x2", "dyck2x3", "yminus", "yplus",
            "ytriple", "gammaK=1", "gammaK=3"]
        {
            assert!(builtin(name).is_some(), "missing builtin {name}");
        }
        assert!(builtin("gammaK=0").is_none());
        assert!(builtin("unknown").is_none());
    }
}
