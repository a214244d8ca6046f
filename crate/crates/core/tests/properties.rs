//! Randomized invariants for the algebraic building blocks: word reduction,
//! language closure, the eventual-image operation, depth-keyed context
//! classes, and the multiset matrix algebra.

use proptest::prelude::*;

use lgs_core::alphabet::SymbolId;
use lgs_core::fixtures;
use lgs_core::lgs::{symbolic_matmul, SymbolicMatrix};
use lgs_core::monoid::{monoid_reduce, MonoidTable, ReducedForm};
use lgs_core::shannon::follower_subset_graph;
use lgs_core::shannon::oracle::Oracle;
use lgs_core::sse::two_block_split;
use lgs_core::subshift::{ShiftKind, Subshift};

fn table_pool(choice: usize) -> MonoidTable {
    match choice % 5 {
        0 => MonoidTable::dyck(1),
        1 => MonoidTable::dyck(2),
        2 => MonoidTable::dyck(3),
        3 => MonoidTable::gamma_extension(1),
        _ => MonoidTable::gamma_extension(2),
    }
}

fn shift_pool(choice: usize) -> (Subshift, usize) {
    // Second component caps the word length so enumeration stays cheap.
    match choice % 7 {
        0 => (fixtures::golden_mean(), 6),
        1 => (fixtures::even_shift(), 6),
        2 => (fixtures::full_shift(2), 6),
        3 => (fixtures::dyck(2), 5),
        4 => (fixtures::gamma_shift(1), 4),
        5 => (fixtures::dyck_power(2, 2), 3),
        _ => (fixtures::y_plus(), 3),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn reducing_a_normal_form_changes_nothing(
        choice in 0usize..5,
        raw in prop::collection::vec(0u32..8, 0..14),
        extra in prop::collection::vec(0u32..8, 0..4),
    ) {
        let table = table_pool(choice);
        let n = table.alphabet.len() as SymbolId;
        let word: Vec<SymbolId> = raw.iter().map(|&s| s % n).collect();
        match monoid_reduce(&table, &word) {
            ReducedForm::Zero => {
                // Zero absorbs: no continuation revives the word.
                let mut longer = word.clone();
                longer.extend(extra.iter().map(|&s| s % n));
                prop_assert_eq!(monoid_reduce(&table, &longer), ReducedForm::Zero);
            }
            normal @ ReducedForm::Normal { .. } => {
                let ReducedForm::Normal { ref unmatched_closers, ref unmatched_openers } = normal
                    else { unreachable!() };
                let mut flat = unmatched_closers.clone();
                flat.extend_from_slice(unmatched_openers);
                prop_assert_eq!(monoid_reduce(&table, &flat), normal);
            }
        }
    }

    #[test]
    fn subwords_of_admissible_words_are_admissible(
        choice in 0usize..7,
        len in 1usize..=6,
        pick in any::<prop::sample::Index>(),
        lo in any::<prop::sample::Index>(),
        hi in any::<prop::sample::Index>(),
    ) {
        let (shift, cap) = shift_pool(choice);
        let len = len.min(cap);
        let words = shift.words_of_length(len);
        prop_assume!(!words.is_empty());
        let w = &words[pick.index(words.len())];
        let mut a = lo.index(len + 1);
        let mut b = hi.index(len + 1);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        prop_assert!(shift.is_admissible(&w[a..b]));
    }

    #[test]
    fn eventual_image_is_idempotent(
        symbols in 2usize..=3,
        forbidden in prop::collection::vec(prop::collection::vec(0u32..3, 1..=3), 0..=2),
    ) {
        let alpha = fixtures::full_shift(symbols).alphabet().clone();
        let words: Vec<Vec<SymbolId>> = forbidden
            .iter()
            .map(|w| w.iter().map(|&s| s % symbols as SymbolId).collect())
            .collect();
        let Ok(shift) = Subshift::sft("random", alpha.clone(), &words) else {
            // Everything forbidden; nothing to test.
            return Ok(());
        };
        let ShiftKind::Presented(graph) = shift.kind() else { unreachable!() };
        let subset = follower_subset_graph(&alpha, graph).unwrap();
        let image = subset.eventual_image().unwrap();
        let stable: Vec<usize> = image.eventual_image_vertices().unwrap().into_iter().collect();
        prop_assert_eq!(stable, (0..image.vertex_count()).collect::<Vec<_>>());
    }

    #[test]
    fn depth_keys_refine_with_depth(
        choice in 0usize..5,
        raw_u in prop::collection::vec(0u32..6, 1..=6),
        raw_v in prop::collection::vec(0u32..6, 1..=6),
        depth in 1usize..=5,
    ) {
        let (shift, _) = shift_pool(choice % 5);
        let n = shift.alphabet().len() as SymbolId;
        let u: Vec<SymbolId> = raw_u.iter().map(|&s| s % n).collect();
        let v: Vec<SymbolId> = raw_v.iter().map(|&s| s % n).collect();
        prop_assume!(shift.is_admissible(&u) && shift.is_admissible(&v));
        let oracle = Oracle::from_subshift(&shift).unwrap();
        let su = oracle.run(&u).unwrap();
        let sv = oracle.run(&v).unwrap();
        if oracle.level_key(&su, depth) == oracle.level_key(&sv, depth) {
            prop_assert_eq!(
                oracle.level_key(&su, depth - 1),
                oracle.level_key(&sv, depth - 1)
            );
        }
    }

    #[test]
    fn matrix_products_associate(
        dims in prop::collection::vec(1usize..=3, 4),
        entries in prop::collection::vec(
            (any::<prop::sample::Index>(), any::<prop::sample::Index>(),
             prop::collection::vec(0u32..4, 0..=2), 1usize..=2, 0usize..3),
            0..12,
        ),
    ) {
        let (p, q, r, s) = (dims[0], dims[1], dims[2], dims[3]);
        let mut mats = [
            SymbolicMatrix::zero(p, q),
            SymbolicMatrix::zero(q, r),
            SymbolicMatrix::zero(r, s),
        ];
        for (ri, ci, word, mult, which) in entries {
            let m = &mut mats[which];
            let (rows, cols) = (m.rows, m.cols);
            m.add_word(ri.index(rows), ci.index(cols), word, mult);
        }
        let [a, b, c] = mats;
        let left = symbolic_matmul(&symbolic_matmul(&a, &b).unwrap(), &c).unwrap();
        let right = symbolic_matmul(&a, &symbolic_matmul(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn half_symbol_coding_distributes_over_products(
        use_full in any::<bool>(),
        dims in prop::collection::vec(1usize..=3, 3),
        entries in prop::collection::vec(
            (any::<prop::sample::Index>(), any::<prop::sample::Index>(),
             prop::collection::vec(0u32..2, 0..=3), 1usize..=2, any::<bool>()),
            0..10,
        ),
    ) {
        let base = if use_full { fixtures::full_shift(2) } else { fixtures::golden_mean() };
        let (_, spec) = two_block_split(&base).unwrap();
        let offset = spec.delta.len() as SymbolId;
        let phi = |w: &Vec<SymbolId>| -> Vec<SymbolId> {
            w.iter()
                .flat_map(|&s| {
                    let (d, dt) = spec.phi[s as usize];
                    [d, offset + dt]
                })
                .collect()
        };
        let (p, q, r) = (dims[0], dims[1], dims[2]);
        let mut a = SymbolicMatrix::zero(p, q);
        let mut b = SymbolicMatrix::zero(q, r);
        for (ri, ci, word, mult, first) in entries {
            if first {
                a.add_word(ri.index(p), ci.index(q), word, mult);
            } else {
                b.add_word(ri.index(q), ci.index(r), word, mult);
            }
        }
        let mapped_product = symbolic_matmul(&a, &b).unwrap().map_words(phi);
        let product_of_maps = symbolic_matmul(&a.map_words(phi), &b.map_words(phi)).unwrap();
        prop_assert_eq!(mapped_product, product_of_maps);
    }
}
