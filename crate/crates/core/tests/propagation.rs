mod common;

use common::{propagate_brute_force, rng, uniform_matrix};
use kprop::{propagate_labels, FeatureMatrix, LabeledSets};
use rand::seq::SliceRandom;
use rand::Rng;

struct Instance {
    features: FeatureMatrix,
    support: Vec<Vec<usize>>,
    pool: Vec<usize>,
    extra: usize,
}

/// Up to 60 points and 5 classes; coordinates are small integers so exact
/// distance ties occur regularly.
fn random_instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let n = r.random_range(4..=60);
    let d = r.random_range(1..=4);
    let classes = r.random_range(1..=5.min(n / 2));
    let data = (0..n * d).map(|_| r.random_range(-6..=6) as f64).collect();
    let features = FeatureMatrix::new(n, d, data).unwrap();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut r);
    let mut support = vec![Vec::new(); classes];
    let mut cursor = 0;
    for s in support.iter_mut() {
        for _ in 0..r.random_range(1..=3) {
            if cursor < n / 2 {
                s.push(idx[cursor]);
                cursor += 1;
            }
        }
        if s.is_empty() {
            s.push(idx[cursor]);
            cursor += 1;
        }
    }
    let pool = idx[cursor..].iter().copied().filter(|_| r.random_bool(0.8)).collect();
    Instance { features, support, pool, extra: r.random_range(0..=5) }
}

#[test]
fn matches_brute_force_on_random_instances() {
    for seed in 0..100 {
        let inst = random_instance(seed);
        let got = propagate_labels(
            &inst.features,
            &LabeledSets::new(inst.support.clone()).unwrap(),
            &inst.pool,
            inst.extra,
        )
        .unwrap();
        let want = propagate_brute_force(&inst.features, &inst.support, &inst.pool, inst.extra);
        assert_eq!(got.claims.len(), want.len(), "seed {seed}");
        for (g, w) in got.claims.iter().zip(&want) {
            assert_eq!((g.class, g.claimed, g.source), (w.class, w.claimed, w.source), "seed {seed}");
            assert_eq!(g.distance, w.dist2.sqrt(), "seed {seed}");
        }
        let limit = (inst.support.len() * inst.extra).min(inst.pool.len());
        assert_eq!(got.claims.len(), limit, "seed {seed}");
    }
}

#[test]
fn power_of_two_scaling_leaves_claims_unchanged() {
    for seed in 0..30 {
        let mut r = rng(1000 + seed);
        let features = uniform_matrix(&mut r, 40, 3, 5.0);
        let support = vec![vec![0, 1], vec![2], vec![3, 4, 5]];
        let pool: Vec<usize> = (6..40).collect();
        let sets = LabeledSets::new(support).unwrap();
        let base = propagate_labels(&features, &sets, &pool, 5).unwrap();
        for exp in [-3i32, 4, 10] {
            let f = 2f64.powi(exp);
            let scaled =
                FeatureMatrix::new(40, 3, features.as_slice().iter().map(|v| v * f).collect()).unwrap();
            let other = propagate_labels(&scaled, &sets, &pool, 5).unwrap();
            assert_eq!(base.expanded, other.expanded);
            for (a, b) in base.claims.iter().zip(&other.claims) {
                assert_eq!((a.class, a.claimed, a.source), (b.class, b.claimed, b.source));
                assert_eq!(a.distance * f, b.distance);
            }
        }
    }
}

#[test]
fn one_dimensional_worked_example() {
    let features =
        FeatureMatrix::from_rows(&[[0.0], [10.0], [1.0], [2.0], [9.0], [8.5], [5.0]]).unwrap();
    let sets = LabeledSets::new(vec![vec![0], vec![1]]).unwrap();
    let result = propagate_labels(&features, &sets, &[2, 3, 4, 5, 6], 2).unwrap();
    let order: Vec<(usize, usize)> = result.claims.iter().map(|c| (c.class, c.claimed)).collect();
    assert_eq!(order, vec![(0, 2), (1, 4), (0, 3), (1, 5)]);
    assert_eq!(result.expanded.class(0), &[0, 2, 3]);
    assert_eq!(result.expanded.class(1), &[1, 4, 5]);
}

#[test]
fn pool_overlapping_support_is_rejected() {
    let features = FeatureMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
    let sets = LabeledSets::new(vec![vec![0], vec![1]]).unwrap();
    assert!(matches!(
        propagate_labels(&features, &sets, &[1, 2], 1),
        Err(kprop::Error::Disjointness(1))
    ));
}
