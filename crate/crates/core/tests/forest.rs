//! Tree growth against a brute-force split search, plus forest determinism
//! and structural invariants.

use metablocks::forest::{best_split, gini, DecisionTree, ForestParams, Node, RandomForest};
use metablocks::nn::init::seeded_rng;
use proptest::prelude::*;
use rand::Rng;

/// Every (feature, threshold) pair over all distinct values, scored directly.
fn brute_force(x: &[Vec<f64>], y: &[usize], n_classes: usize, min_leaf: usize) -> Option<(usize, f64, f64)> {
    let n = x.len();
    let mut parent = vec![0; n_classes];
    y.iter().for_each(|&l| parent[l] += 1);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut values: Vec<f64> = x.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let mut l = vec![0; n_classes];
            let mut r = vec![0; n_classes];
            for (row, &label) in x.iter().zip(y) {
                if row[f] <= t {
                    l[label] += 1
                } else {
                    r[label] += 1
                }
            }
            let (nl, nr) = (l.iter().sum::<usize>(), r.iter().sum::<usize>());
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let dec = gini(&parent) - (nl as f64 * gini(&l) + nr as f64 * gini(&r)) / n as f64;
            if best.is_none_or(|b| dec > b.2 + 1e-12) {
                best = Some((f, t, dec));
            }
        }
    }
    best
}

fn dataset(seed: u64, n: usize, d: usize, n_classes: usize, levels: u32) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = seeded_rng(seed);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(0..levels) as f64 * 0.5).collect())
        .collect();
    let y = (0..n).map(|_| rng.random_range(0..n_classes)).collect();
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn root_split_matches_brute_force(seed in 0u64..10_000, n in 2usize..30, d in 1usize..5, min_leaf in 1usize..4) {
        let (x, y) = dataset(seed, n, d, 3, 5);
        let samples: Vec<usize> = (0..n).collect();
        let features: Vec<usize> = (0..d).collect();
        let got = best_split(&x, &y, &samples, &features, 3, min_leaf);
        let want = brute_force(&x, &y, 3, min_leaf);
        match (got, want) {
            (None, None) => {}
            (Some(g), Some((f, t, dec))) => {
                prop_assert_eq!(g.feature, f);
                prop_assert_eq!(g.threshold, t);
                prop_assert!((g.decrease - dec).abs() < 1e-12);
            }
            other => prop_assert!(false, "mismatch {:?}", other),
        }
    }

    #[test]
    fn tree_invariants(seed in 0u64..10_000, min_leaf in 1usize..4, max_depth in proptest::option::of(0usize..5)) {
        let (x, y) = dataset(seed, 40, 3, 3, 6);
        let params = ForestParams { min_samples_leaf: min_leaf, max_depth, max_features: Some(3), ..Default::default() };
        let tree = DecisionTree::fit(&x, &y, 3, &params, seed).unwrap();
        if let Some(m) = max_depth {
            prop_assert!(tree.depth() <= m);
        }
        for node in &tree.nodes {
            if let Node::Leaf { counts } = node {
                prop_assert!(counts.iter().sum::<usize>() >= min_leaf);
            }
        }
        let total: usize = tree.nodes.iter().map(|n| match n { Node::Leaf { counts } => counts.iter().sum(), _ => 0 }).sum();
        prop_assert_eq!(total, 40);
    }
}

#[test]
fn unbootstrapped_tree_fits_distinct_points() {
    let mut rng = seeded_rng(3);
    let x: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..4).map(|_| rng.random::<f64>()).collect())
        .collect();
    let y: Vec<usize> = (0..200).map(|_| rng.random_range(0..4)).collect();
    let tree = DecisionTree::fit(&x, &y, 4, &ForestParams::default(), 1).unwrap();
    for (row, &label) in x.iter().zip(&y) {
        assert_eq!(tree.predict(row), label);
    }
}

#[test]
fn forest_is_deterministic_across_thread_counts() {
    let (x, y) = dataset(4, 150, 10, 3, 8);
    let params = ForestParams {
        n_trees: 40,
        seed: 9,
        ..Default::default()
    };
    let fit_with = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| RandomForest::fit(&x, &y, 3, &params).unwrap())
    };
    let a = fit_with(1);
    assert_eq!(a, fit_with(4));
    let other = RandomForest::fit(&x, &y, 3, &ForestParams { seed: 10, ..params }).unwrap();
    assert_ne!(a, other);
}

#[test]
fn forest_learns_threshold_rule_and_round_trips() {
    let mut rng = seeded_rng(5);
    let x: Vec<Vec<f64>> = (0..300)
        .map(|_| (0..6).map(|_| rng.random::<f64>()).collect())
        .collect();
    let label = |r: &[f64]| usize::from(r[2] > 0.5) + usize::from(r[4] > 0.5);
    let y: Vec<usize> = x.iter().map(|r| label(r)).collect();
    let forest = RandomForest::fit(
        &x,
        &y,
        3,
        &ForestParams {
            n_trees: 60,
            ..Default::default()
        },
    )
    .unwrap();

    let test: Vec<Vec<f64>> = (0..300)
        .map(|_| (0..6).map(|_| rng.random::<f64>()).collect())
        .collect();
    let correct = test
        .iter()
        .filter(|r| forest.predict(r).unwrap().index == label(r))
        .count();
    assert!(correct as f64 / 300.0 > 0.85, "accuracy {correct}/300");

    let p = forest.predict(&test[0]).unwrap();
    assert!((p.votes.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(forest.predict(&[0.0; 5]).is_err());

    let back: RandomForest = serde_json::from_str(&serde_json::to_string(&forest).unwrap()).unwrap();
    assert_eq!(back, forest);
}

/// Walks the node array directly and takes the leaf majority (lowest index
/// on ties), independent of `DecisionTree::predict`.
fn walk(tree: &DecisionTree, v: &[f64]) -> usize {
    let mut at = 0;
    loop {
        match &tree.nodes[at] {
            Node::Leaf { counts } => {
                let top = *counts.iter().max().unwrap();
                return counts.iter().position(|&c| c == top).unwrap();
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                at = if v[*feature] <= *threshold { *left } else { *right };
            }
        }
    }
}

#[test]
fn vote_shares_match_per_tree_tally() {
    let mut rng = seeded_rng(41);
    let sample = |rng: &mut rand_chacha::ChaCha8Rng| {
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let label = usize::from(x[0] + 0.5 * x[1] > 0.0) + usize::from(x[2] > 1.0);
        (x, label)
    };
    let (x, y): (Vec<_>, Vec<_>) = (0..300).map(|_| sample(&mut rng)).unzip();
    let params = ForestParams {
        n_trees: 250,
        seed: 5,
        ..Default::default()
    };
    let forest = RandomForest::fit(&x, &y, 3, &params).unwrap();
    assert_eq!(forest.trees.len(), 250);
    for _ in 0..50 {
        let (v, _) = sample(&mut rng);
        let pred = forest.predict(&v).unwrap();
        let mut tally = [0usize; 3];
        forest.trees.iter().for_each(|t| tally[walk(t, &v)] += 1);
        for c in 0..3 {
            assert_eq!(pred.votes[c], tally[c] as f64 / 250.0);
        }
        assert!((pred.votes.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let top = *tally.iter().max().unwrap();
        assert_eq!(pred.index, tally.iter().position(|&c| c == top).unwrap());
    }
}

fn leaf_tree(counts: Vec<usize>) -> DecisionTree {
    DecisionTree {
        n_classes: counts.len(),
        nodes: vec![Node::Leaf { counts }],
        n_features: 1,
    }
}

#[test]
fn vote_ties_and_unanimity() {
    let forest = |trees| RandomForest {
        params: ForestParams::default(),
        n_classes: 2,
        n_features: 1,
        trees,
    };
    let split = forest(vec![leaf_tree(vec![0, 3]), leaf_tree(vec![3, 0])]);
    let p = split.predict(&[0.0]).unwrap();
    assert_eq!((p.index, p.votes.clone()), (0, vec![0.5, 0.5]));

    let agree = forest(vec![leaf_tree(vec![1, 4]); 3]);
    let p = agree.predict(&[0.0]).unwrap();
    assert_eq!((p.index, p.votes), (1, vec![0.0, 1.0]));
    assert!(agree.predict(&[0.0, 1.0]).is_err());
}
