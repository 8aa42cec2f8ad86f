use std::collections::BTreeMap;

use catdep::primes::PrimeSieve;
use catdep::{build_tree, prime_partition, GeneratorSpec};
use proptest::prelude::*;

fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

/// Assigns α by literally building the blocks `{k p_m} \ ∪_{i<m} {k p_i}`.
fn partition_by_set_construction(limit: usize) -> BTreeMap<usize, usize> {
    let primes: Vec<usize> = (2..=limit).filter(|&n| is_prime(n)).collect();
    let mut claimed = vec![false; limit + 1];
    let mut alpha = BTreeMap::new();
    for (idx, &prime) in primes.iter().enumerate() {
        for multiple in (prime..=limit).step_by(prime) {
            if !claimed[multiple] {
                claimed[multiple] = true;
                alpha.insert(multiple, idx + 1);
            }
        }
    }
    alpha
}

#[test]
fn prime_partition_matches_set_construction() {
    let oracle = partition_by_set_construction(10_000);
    assert_eq!(oracle.len(), 9_999);
    let parents = GeneratorSpec::PrimePartition.parents(10_000).unwrap();
    for (&n, &m) in &oracle {
        assert_eq!(prime_partition(n).unwrap(), m, "n = {n}");
        assert_eq!(parents[n], m, "n = {n}");
    }
}

#[test]
fn prime_partition_block_is_least_prime_divisor() {
    let primes: Vec<usize> = (2..=10_000).filter(|&n| is_prime(n)).collect();
    for n in 2..=10_000 {
        let m = prime_partition(n).unwrap();
        assert_eq!(n % primes[m - 1], 0, "p_{m} must divide {n}");
        for &earlier in &primes[..m - 1] {
            assert_ne!(n % earlier, 0, "{earlier} divides {n} but block is {m}");
        }
    }
    // The trial-division oracle also fixes n = 25 in block 3.
    assert_eq!(prime_partition(25).unwrap(), 3);
    let sieve = PrimeSieve::new(1000);
    for n in 2..=1000 {
        assert_eq!(sieve.partition_index(n).unwrap(), prime_partition(n).unwrap());
    }
}

#[test]
fn builtins_are_valid_to_one_million() {
    for spec in GeneratorSpec::BUILTINS {
        let report = spec.validate(1_000_000);
        assert!(
            report.is_valid(),
            "{spec}: {:?}",
            &report.violations[..report.violations.len().min(5)]
        );
        assert!(report.near_boundary.is_empty(), "{spec}: {:?}", report.near_boundary);
    }
}

#[test]
fn sin_drift_exhaustive_range_check() {
    for n in 2..=10_000usize {
        let x = n as f64;
        let value = (x.sqrt() / 2.0 * x.sin() + x / 2.0).floor();
        assert!(value >= 1.0 && value <= (n - 1) as f64, "n = {n}: {value}");
        assert_eq!(GeneratorSpec::SinDrift.evaluate(n).unwrap(), value as usize);
    }
}

#[test]
fn sin_drift_matches_drawn_edges() {
    let drawn = [
        (2, 1),
        (3, 1),
        (4, 1),
        (5, 1),
        (6, 2),
        (7, 4),
        (8, 5),
        (9, 5),
        (10, 4),
        (11, 3),
        (12, 5),
        (13, 7),
    ];
    let tree = build_tree(&GeneratorSpec::SinDrift, 13).unwrap();
    assert_eq!(tree.edges().collect::<Vec<_>>(), drawn);
    let dot = tree.export_dot();
    let dot_edges: Vec<(usize, usize)> = dot
        .lines()
        .filter_map(|l| {
            let (a, b) = l.trim().trim_end_matches(';').split_once(" -> ")?;
            Some((a.parse().unwrap(), b.parse().unwrap()))
        })
        .collect();
    assert_eq!(dot_edges, drawn);
}

#[test]
fn floor_sqrt_matches_drawn_edges() {
    let tree = build_tree(&GeneratorSpec::FloorSqrt, 24).unwrap();
    let expected: Vec<(usize, usize)> = (2..=24)
        .map(|n| {
            let parent = match n {
                2..=3 => 1,
                4..=8 => 2,
                9..=15 => 3,
                _ => 4,
            };
            (n, parent)
        })
        .collect();
    assert_eq!(tree.edges().collect::<Vec<_>>(), expected);
}

#[test]
fn every_path_reaches_the_root() {
    for spec in GeneratorSpec::BUILTINS {
        let tree = build_tree(&spec, 10_000).unwrap();
        for n in 1..=10_000 {
            let path = tree.path_to_root(n).unwrap();
            assert!(path.len() <= n);
            assert_eq!(*path.last().unwrap(), 1);
            assert!(path.windows(2).all(|w| w[0] > w[1]));
            assert_eq!(path.len() - 1, tree.depth(n).unwrap());
        }
    }
}

#[test]
fn distance_special_cases() {
    let seq = build_tree(&GeneratorSpec::Sequential, 40).unwrap();
    let fk = build_tree(&GeneratorSpec::Fk, 40).unwrap();
    for m in 1..=40 {
        for n in 1..=40 {
            assert_eq!(seq.tree_distance(m, n).unwrap(), m.abs_diff(n));
            let want = match (m, n) {
                _ if m == n => 0,
                (1, _) | (_, 1) => 1,
                _ => 2,
            };
            assert_eq!(fk.tree_distance(m, n).unwrap(), want);
        }
    }
}

/// Distance by brute force: intersect the two root paths.
fn path_distance(tree: &catdep::DependencyTree, m: usize, n: usize) -> usize {
    let a = tree.path_to_root(m).unwrap();
    let b = tree.path_to_root(n).unwrap();
    let (ia, ib) = a
        .iter()
        .enumerate()
        .find_map(|(ia, x)| b.iter().position(|y| y == x).map(|ib| (ia, ib)))
        .unwrap();
    ia + ib
}

#[test]
fn floor_sqrt_distance_by_path_enumeration() {
    let tree = build_tree(&GeneratorSpec::FloorSqrt, 16).unwrap();
    assert_eq!(tree.tree_distance(9, 16).unwrap(), 5);
    for m in 1..=16 {
        for n in 1..=16 {
            assert_eq!(tree.tree_distance(m, n).unwrap(), path_distance(&tree, m, n));
        }
    }
}

fn any_builtin() -> impl Strategy<Value = GeneratorSpec> {
    prop::sample::select(GeneratorSpec::BUILTINS.to_vec())
}

proptest! {
    #[test]
    fn tree_distance_is_a_metric(spec in any_builtin(), a in 1usize..=500, b in 1usize..=500, c in 1usize..=500) {
        let tree = build_tree(&spec, 500).unwrap();
        let d = |x, y| tree.tree_distance(x, y).unwrap();
        prop_assert_eq!(d(a, b), d(b, a));
        prop_assert_eq!(d(a, b) == 0, a == b);
        prop_assert!(d(a, c) <= d(a, b) + d(b, c));
        prop_assert_eq!(d(a, b), path_distance(&tree, a, b));
    }

    #[test]
    fn json_tree_dump_round_trips(spec in any_builtin(), len in 1usize..60) {
        let tree = build_tree(&spec, len).unwrap();
        let parsed: BTreeMap<String, usize> = serde_json::from_str(&tree.to_json()).unwrap();
        prop_assert_eq!(parsed.len(), len - 1);
        for (n, parent) in tree.edges() {
            prop_assert_eq!(parsed[&n.to_string()], parent);
        }
    }
}
