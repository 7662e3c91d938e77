//! Exact restricted isometry constants against independent computations.

mod common;

use lp_recovery::ric::*;
use lp_recovery::solver::{random_matrix, Ensemble};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gaussian(m: usize, n: usize, seed: u64) -> SensingMatrix {
    random_matrix(m, n, Ensemble::Gaussian, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn two_columns_match_inner_product() {
    for seed in 0..100 {
        let a = gaussian(5, 2, seed);
        let inner = a.matrix().column(0).dot(&a.matrix().column(1)).abs();
        let est = exact_ric(&a, 2).unwrap();
        assert!((est.delta - inner).abs() < 1e-10, "seed {seed}");
    }
}

#[test]
fn agrees_with_definition() {
    for seed in 0..20 {
        let a = gaussian(7, 10, 100 + seed);
        for k in 1..=3 {
            let est = exact_ric(&a, k).unwrap();
            let want = common::ric_by_definition(a.matrix(), k);
            if est.rip_fails {
                assert!(want >= 1.0 - 1e-9);
            } else {
                assert!((est.delta - want).abs() < 1e-12, "seed {seed} k {k}");
            }
        }
    }
}

#[test]
fn monotone_in_order() {
    for seed in 0..20 {
        let a = gaussian(6, 9, 200 + seed);
        let deltas: Vec<f64> = (1..=4).map(|k| exact_ric(&a, k).unwrap().delta).collect();
        assert!(deltas.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{deltas:?}");
    }
}

#[test]
fn sampled_never_exceeds_exact() {
    for seed in 0..10 {
        let a = gaussian(6, 12, 300 + seed);
        let exact = exact_ric(&a, 3).unwrap();
        let sampled = sampled_ric_lower_bound(&a, 3, 50, seed).unwrap();
        assert!(sampled.delta <= exact.delta + 1e-12);
        assert_eq!(sampled.kind, RicKind::SampledLowerBound);
        assert!(!sampled.is_upper_bound());
    }
}

#[test]
fn optimal_scaling_matches_rescaled_matrix() {
    let a = gaussian(8, 12, 5);
    let s = optimal_scaling(&a, 4, DEFAULT_ENUMERATION_CAP).unwrap();
    let direct = exact_ric(&a.scaled(s.scale).unwrap(), 4).unwrap();
    assert!((s.estimate.delta - direct.delta).abs() < 1e-12);
    assert!(s.estimate.delta <= exact_ric(&a, 4).unwrap().delta + 1e-12);
    // No other global scale does better.
    for c in [0.9, 0.99, 1.01, 1.1] {
        let other = exact_ric(&a.scaled(s.scale * c).unwrap(), 4).unwrap();
        assert!(other.delta >= s.estimate.delta - 1e-12);
    }
}

#[test]
fn cap_is_enforced() {
    let a = gaussian(4, 30, 1);
    assert!(matches!(
        exact_ric_with_cap(&a, 5, 1000),
        Err(lp_recovery::Error::EnumerationCap { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn invariant_under_column_permutation_and_sign(seed in 0u64..10_000, flip in 0u32..256) {
        let a = gaussian(5, 8, seed);
        let perm: Vec<usize> = (0..8).rev().collect();
        let b = DMatrix::from_fn(5, 8, |i, j| {
            let s = if flip >> j & 1 == 1 { -1.0 } else { 1.0 };
            s * a.matrix()[(i, perm[j])]
        });
        let b = SensingMatrix::new(b).unwrap();
        for k in 1..=3 {
            let (x, y) = (exact_ric(&a, k).unwrap(), exact_ric(&b, k).unwrap());
            prop_assert!((x.delta - y.delta).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_columns_give_zero_at_order_one(seed in 0u64..10_000) {
        let a = gaussian(4, 7, seed);
        prop_assert!(exact_ric(&a, 1).unwrap().delta < 1e-12);
    }

    #[test]
    fn estimate_in_unit_interval(seed in 0u64..10_000, k in 1usize..5) {
        let a = gaussian(4, 8, seed);
        let e = exact_ric(&a, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&e.delta));
        prop_assert_eq!(e.rip_fails, k > 4 || e.delta >= 1.0);
        prop_assert_eq!(e.argmax_subset.len(), k);
    }
}
