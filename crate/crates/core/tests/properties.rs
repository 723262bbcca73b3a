mod common;

use common::{matrix, rel_close};
use hclocal::interchange::enumerate_moves;
use hclocal::linkage::agglomerate;
use hclocal::objective::{cost_pairwise, revenue_pairwise};
use hclocal::similarity::{gaussian_similarity, mean_pairwise_distance};
use hclocal::*;
use proptest::prelude::*;

/// A matrix with weights in (0, 1], plus a random tree over the same leaves.
fn instance(max_n: usize) -> impl Strategy<Value = (SimilarityMatrix, HcTree)> {
    (2..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..1.0, n * (n - 1) / 2),
            any::<u64>(),
        )
            .prop_map(move |(raw, seed)| {
                let upper: Vec<f64> = raw.iter().map(|x| 1.0 - x).collect();
                (matrix(n, &upper), HcTree::random(n, seed).unwrap())
            })
    })
}

/// Nonnegative weights with some exact zeros.
fn sparse_instance(max_n: usize) -> impl Strategy<Value = (SimilarityMatrix, HcTree)> {
    (3..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], n * (n - 1) / 2),
            any::<u64>(),
        )
            .prop_map(move |(upper, seed)| (matrix(n, &upper), HcTree::random(n, seed).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cost_plus_revenue_is_n_times_total((w, t) in instance(40)) {
        let s = score(&t, &w).unwrap();
        let target = t.n() as f64 * w.total_weight();
        prop_assert!((s.cost + s.revenue - target).abs() <= 1e-9 * target);
        prop_assert!(s.duality_ok(1e-9));
    }

    #[test]
    fn merge_and_pair_definitions_agree((w, t) in sparse_instance(24)) {
        prop_assert!(rel_close(revenue(&t, &w).unwrap(), revenue_pairwise(&t, &w).unwrap(), 1e-12));
        prop_assert!(rel_close(cost(&t, &w).unwrap(), cost_pairwise(&t, &w).unwrap(), 1e-12));
    }

    #[test]
    fn objectives_scale_linearly((w, t) in instance(24), c in 0.01f64..100.0) {
        let scaled = w.scaled(c).unwrap();
        prop_assert!(rel_close(revenue(&t, &scaled).unwrap(), c * revenue(&t, &w).unwrap(), 1e-12));
        prop_assert!(rel_close(cost(&t, &scaled).unwrap(), c * cost(&t, &w).unwrap(), 1e-12));
        if t.n() > 2 {
            prop_assert!(rel_close(
                normalized_revenue(&t, &scaled).unwrap(),
                normalized_revenue(&t, &w).unwrap(),
                1e-12
            ));
        }
    }

    #[test]
    fn normalized_revenue_is_a_fraction((w, t) in instance(40)) {
        if t.n() > 2 {
            let r = normalized_revenue(&t, &w).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn predicted_gains_match_recomputed_revenue((w, t) in sparse_instance(16)) {
        let table = WMatrix::build(&t, &w).unwrap();
        let before = revenue(&t, &w).unwrap();
        let moves = enumerate_moves(&t, &table);
        prop_assert_eq!(moves.len(), 2 * (t.n() - 2));
        for mv in moves {
            let mut after = t.clone();
            let mut after_table = table.clone();
            let realized = apply_move(&mut after, &mut after_table, &mv).unwrap();
            after.validate().unwrap();
            let scratch = revenue(&after, &w).unwrap() - before;
            let scale = w.total_weight() * t.n() as f64;
            prop_assert!((mv.gain - scratch).abs() <= 1e-9 * scale, "{} vs {}", mv.gain, scratch);
            prop_assert!((realized - scratch).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn incremental_table_matches_fresh_build((w, t) in instance(30), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..40)) {
        let mut tree = t;
        let mut table = WMatrix::build(&tree, &w).unwrap();
        for pick in picks {
            let moves = enumerate_moves(&tree, &table);
            if moves.is_empty() {
                break;
            }
            let mv = moves[pick.index(moves.len())];
            apply_move(&mut tree, &mut table, &mv).unwrap();
        }
        tree.validate().unwrap();
        let fresh = WMatrix::build(&tree, &w).unwrap();
        prop_assert!(table.max_rel_deviation(&fresh) <= 1e-9);
        prop_assert!(rel_close(table.revenue(&tree), revenue(&tree, &w).unwrap(), 1e-9));
    }

    #[test]
    fn canonical_text_round_trips(n in 2usize..60, seed in any::<u64>()) {
        let t = HcTree::random(n, seed).unwrap();
        let text = t.to_canonical();
        let back = HcTree::parse(&text).unwrap();
        prop_assert_eq!(back.to_canonical(), text);
        prop_assert!(back.same_topology(&t));
        back.validate().unwrap();
    }

    #[test]
    fn average_link_is_locally_optimal((w, _t) in instance(40)) {
        let t = agglomerate(&w, LinkageKind::Average).unwrap();
        let cert = certify_local_optimality(&t, &w).unwrap();
        prop_assert!(cert.locally_optimal, "{:?}", cert.violations);
    }

    #[test]
    fn local_optima_reach_a_third((w, t) in instance(32), seed in any::<u64>(), greedy in any::<bool>()) {
        prop_assume!(t.n() >= 4);
        let cfg = if greedy { SearchConfig::greedy() } else { SearchConfig::random(seed) };
        let (end, report) = search(t, &w, &cfg).unwrap();
        prop_assert!(report.converged);
        prop_assert!(report.certificate.locally_optimal);
        prop_assert!(report.final_revenue >= report.initial_revenue);
        prop_assert!(report.final_normalized.unwrap() >= 1.0 / 3.0 - 1e-9);
        prop_assert_eq!(end.to_canonical(), report.final_tree);
    }

    #[test]
    fn auto_sigma_ignores_row_order(rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 2..25), seed in any::<u64>()) {
        let data = Dataset::from_rows(rows.clone()).unwrap();
        prop_assume!(mean_pairwise_distance(&data) > 1e-9);
        let mut perm: Vec<usize> = (0..rows.len()).collect();
        let mut r = common::rng(seed);
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
        let shuffled = data.select_rows(&perm).unwrap();
        let a = gaussian_similarity(&data, Sigma::Auto).unwrap();
        let b = gaussian_similarity(&shuffled, Sigma::Auto).unwrap();
        prop_assert!(rel_close(a.sigma, b.sigma, 1e-12));
        for i in 0..perm.len() {
            for j in 0..perm.len() {
                prop_assert!(rel_close(b.matrix.get(i, j), a.matrix.get(perm[i], perm[j]), 1e-12));
            }
        }
    }
}

#[test]
fn integer_and_float_searches_agree() {
    let mut r = common::rng(99);
    for _ in 0..20 {
        let n = rand::Rng::random_range(&mut r, 4..30);
        let ints: Vec<i64> = (0..n * (n - 1) / 2)
            .map(|_| rand::Rng::random_range(&mut r, 0..20))
            .collect();
        let mut it = ints.iter();
        let exact = IntegerWeights::from_fn(n, |_, _| *it.next().unwrap()).unwrap();
        let float = matrix(n, &ints.iter().map(|&x| x as f64).collect::<Vec<_>>());
        let start = HcTree::random(n, rand::Rng::random(&mut r)).unwrap();
        let (a, ra) = search(start.clone(), &exact, &SearchConfig::greedy()).unwrap();
        let (b, rb) = search(start, &float, &SearchConfig::greedy()).unwrap();
        assert_eq!(a.to_canonical(), b.to_canonical());
        assert_eq!(ra.steps, rb.steps);
        assert_eq!(ra.final_revenue, rb.final_revenue);
    }
}

#[test]
fn random_trees_cover_every_shape_at_four_leaves() {
    let space = oracle::enumerate_trees(4).unwrap();
    let seen: std::collections::BTreeSet<String> = (0..2000)
        .map(|s| HcTree::random(4, s).unwrap().to_canonical())
        .collect();
    let all: std::collections::BTreeSet<String> = space.trees.into_iter().collect();
    assert_eq!(seen, all);
}
