//! Randomized invariants of the split, metrics and resampling.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snapfilter::metrics::{esf, tve};
use snapfilter::network::library::{dimerization, isomerization};
use snapfilter::targeting::ResampleScheme;
use snapfilter::{ObservationSplit, Pmf, ReactionNetwork};

fn pmf(dim: usize, raw: &[(Vec<i64>, f64)]) -> Pmf {
    Pmf::normalized(dim, raw.iter().cloned()).unwrap()
}

fn states(dim: usize) -> impl Strategy<Value = Vec<(Vec<i64>, f64)>> {
    prop::collection::vec((prop::collection::vec(0i64..6, dim), 0.01f64..1.0), 1..12)
}

fn check_round_trip(net: &ReactionNetwork, free: Option<&[usize]>, counts: &[u64]) {
    let split = ObservationSplit::build(net, free).unwrap();
    let z0 = vec![50; net.n_species()];
    let z1 = net.apply_counts(&z0, counts);
    let dy: Vec<i64> = net
        .observe(&z1)
        .iter()
        .zip(net.observe(&z0))
        .map(|(a, b)| a - b)
        .collect();
    let k_free: Vec<u64> = split.free().iter().map(|&j| counts[j]).collect();
    let k_slaved = split
        .slaved_counts(&dy, &k_free)
        .unwrap()
        .expect("observed counts are feasible");
    assert_eq!(split.assemble(&k_free, &k_slaved), counts);
}

proptest! {
    #[test]
    fn split_recovers_counts_isomerization(a in 0u64..30, b in 0u64..30, free in 0usize..2) {
        check_round_trip(&isomerization(1.0, 1.5), Some(&[free]), &[a, b]);
    }

    #[test]
    fn split_recovers_counts_dimerization(k in prop::collection::vec(0u64..15, 4)) {
        check_round_trip(&dimerization([0.5, 1.0, 0.1, 1.0]), None, &k);
    }

    #[test]
    fn esf_is_scale_invariant(w in prop::collection::vec(0.0f64..10.0, 1..50), s in 1e-6f64..1e6) {
        prop_assume!(w.iter().any(|&x| x > 0.0));
        let scaled: Vec<f64> = w.iter().map(|x| x * s).collect();
        let (a, b) = (esf(&w).unwrap(), esf(&scaled).unwrap());
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(a > 0.0 && a <= 1.0 + 1e-12);
    }

    #[test]
    fn tve_is_a_symmetric_bounded_metric(p in states(2), q in states(2), r in states(2)) {
        let (p, q, r) = (pmf(2, &p), pmf(2, &q), pmf(2, &r));
        let pq = tve(&p, &q).unwrap();
        prop_assert!((pq - tve(&q, &p).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&pq));
        prop_assert!(tve(&p, &p).unwrap() < 1e-12);
        prop_assert!(pq <= tve(&p, &r).unwrap() + tve(&r, &q).unwrap() + 1e-12);
    }

    #[test]
    fn resampling_picks_positive_weights(w in prop::collection::vec(0.0f64..1.0, 1..40), n in 1usize..200, seed: u64) {
        prop_assume!(w.iter().any(|&x| x > 0.0));
        for scheme in [ResampleScheme::Multinomial, ResampleScheme::Systematic] {
            let idx = scheme.indices(&w, n, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(idx.len(), n);
            prop_assert!(idx.iter().all(|&i| w[i] > 0.0));
        }
    }
}
