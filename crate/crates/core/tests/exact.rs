use std::collections::HashSet;

use poset_mcmc::enumeration::{self, ExactObservable, SmallOrder, DEFAULT_BOUND};
use poset_mcmc::moves::{self, MoveMix};
use poset_mcmc::{Poset, RandomStream};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Down-closed subsets of `o`, by testing every subset.
fn ideals_by_subsets(o: &SmallOrder) -> u64 {
    let n = o.size();
    (0u32..1 << n)
        .filter(|&s| (0..n).all(|y| s >> y & 1 == 0 || o.past(y) & !s == 0))
        .count() as u64
}

#[test]
fn enumeration_agrees_with_brute_force() {
    for n in 1..=7 {
        let streamed = enumeration::enumerate(n, DEFAULT_BOUND, |_| {}).unwrap();
        let parallel = enumeration::count(n, DEFAULT_BOUND).unwrap();
        let brute = enumeration::brute_force_count(n).unwrap();
        assert_eq!(streamed, brute, "n = {n}");
        assert_eq!(parallel, brute, "n = {n}");
    }
}

#[test]
fn enumeration_satisfies_ideal_recursion() {
    for n in 2..=9 {
        let sum = enumeration::par_fold(
            n - 1,
            DEFAULT_BOUND,
            || 0u64,
            |acc, o| *acc += enumeration::order_ideals(&o.to_poset()),
            |a, b| a + b,
        )
        .unwrap();
        assert_eq!(enumeration::count(n, DEFAULT_BOUND).unwrap(), sum, "n = {n}");
    }
}

#[test]
fn ideal_counts_match_subset_test() {
    for n in 1..=6 {
        enumeration::enumerate(n, DEFAULT_BOUND, |o| {
            assert_eq!(enumeration::order_ideals(&o.to_poset()), ideals_by_subsets(o));
        })
        .unwrap();
    }
}

#[test]
fn visited_orders_are_distinct_and_valid() {
    for n in 1..=6 {
        let mut seen = HashSet::new();
        enumeration::enumerate(n, DEFAULT_BOUND, |o| {
            let p = o.to_poset();
            assert!(p.validate().is_empty());
            assert!(seen.insert(p.relations()));
        })
        .unwrap();
    }
}

#[test]
fn extremal_counts_are_self_dual() {
    for n in 1..=8 {
        let d = enumeration::exact_distributions(
            n,
            &[ExactObservable::MinimalCount, ExactObservable::MaximalCount],
            DEFAULT_BOUND,
        )
        .unwrap();
        assert_eq!(d[0].counts, d[1].counts, "n = {n}");
        assert_eq!(d[0].total, enumeration::count(n, DEFAULT_BOUND).unwrap());
    }
}

#[test]
fn exact_distributions_sum_to_total() {
    let obs = [
        ExactObservable::Height,
        ExactObservable::Relations,
        ExactObservable::MinimalCount,
        ExactObservable::Chi { h0: 6 },
    ];
    for n in 1..=7 {
        let total = enumeration::brute_force_count(n).unwrap();
        for d in enumeration::exact_distributions(n, &obs, DEFAULT_BOUND).unwrap() {
            assert_eq!(d.total, total);
            assert_eq!(
                d.counts.values().sum::<u64>(),
                total,
                "{} at n = {n}",
                d.observable.name()
            );
        }
    }
}

#[test]
fn nine_chain_is_the_only_order_with_all_relations() {
    let d = enumeration::exact_distribution(9, ExactObservable::Relations).unwrap();
    assert_eq!(d.counts.get(&36), Some(&1));
    assert_eq!(d.counts.keys().next_back(), Some(&36));
    assert_eq!(d.counts.get(&0), Some(&1));
}

#[test]
fn kernel_is_symmetric_connected_and_stochastic() {
    for n in 2..=5 {
        let k = moves::exact_kernel(n).unwrap();
        assert_eq!(k.len() as u64, enumeration::count(n, DEFAULT_BOUND).unwrap());
        assert!(k.max_asymmetry() <= 1e-12, "n = {n}");
        assert!(k.max_row_sum_error() <= 1e-12);
        assert!(k.uniform_stationarity_error() <= 1e-12);
        assert!(k.is_strongly_connected());
    }
}

#[test]
fn kernel_is_aperiodic_from_three_elements() {
    for n in 3..=5 {
        let k = moves::exact_kernel(n).unwrap();
        assert!(k.has_self_loop(), "n = {n}");
        assert_eq!(k.period(), 1);
    }
    // both move kinds toggle the only pair
    let k = moves::exact_kernel(2).unwrap();
    assert_eq!(k.period(), 2);
}

/// Equilibrium acceptance is one minus the mean holding probability.
fn exact_acceptance(n: usize) -> f64 {
    let k = moves::exact_kernel(n).unwrap();
    1.0 - (0..k.len()).map(|i| k.matrix[i][i]).sum::<f64>() / k.len() as f64
}

#[test]
fn chain_acceptance_matches_kernel() {
    for (n, seed) in [(3usize, 11u64), (4, 12), (5, 13)] {
        let exact = exact_acceptance(n);
        let mut rng = RandomStream::new(seed);
        let mut p = Poset::antichain(n).unwrap();
        moves::sweep(&mut p, &mut rng, 10_000).unwrap();
        let s = moves::sweep_with(&mut p, &mut rng, 400_000, MoveMix::Mixed).unwrap();
        assert!(
            (s.acceptance_rate() - exact).abs() < 0.005,
            "n = {n}: {} vs {exact}",
            s.acceptance_rate()
        );
    }
}

#[test]
fn chain_visits_orders_uniformly() {
    let n = 4;
    let all = enumeration::collect(n).unwrap();
    let mut counts = vec![0u64; all.len()];
    let mut rng = RandomStream::new(5);
    let mut p = Poset::antichain(n).unwrap();
    let samples = 40_000;
    for _ in 0..samples {
        moves::sweep(&mut p, &mut rng, moves::default_moves_per_sweep(n)).unwrap();
        counts[all.iter().position(|q| *q == p).unwrap()] += 1;
    }
    let expected = samples as f64 / all.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let limit = ChiSquared::new((all.len() - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < limit, "chi-square {stat} above {limit}");
}
