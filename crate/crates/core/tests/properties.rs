//! Property tests for the structural invariants of each module.

mod common;

use std::collections::BTreeSet;

use common::{all_rankings, oracle_distance};
use mallows::augment::{constrained_leap, init_consistent, AssessorData, AugmentOptions};
use mallows::io::{SampleFile, SampleSet};
use mallows::mixture::{cluster_probabilities, run_mixture_chain, within_cluster_ss, MixtureOptions, MixturePriors};
use mallows::partition::{exact_log_partition, ExactPartition, LogPartition};
use mallows::rank::{is_consistent, transitive_closure, ItemCatalog, Metric, PreferencePair, Ranking};
use mallows::rng::stream_rng;
use mallows::sampler::{leap_and_shift, run_chain, sample_mallows, Priors, ProposalCorrection, Tuning};
use mallows::summary::{cp_ordering, dominance_matrix, hpdi, marginal_rank_matrix, preference_predictive};
use proptest::prelude::*;

const METRICS: [Metric; 3] = [Metric::Footrule, Metric::Spearman, Metric::Kendall];

fn ranking(n: usize) -> impl Strategy<Value = Ranking> {
    Just((1..=n).collect::<Vec<usize>>()).prop_shuffle().prop_map(|v| Ranking::new(v).unwrap())
}

fn sized_pair(max: usize) -> impl Strategy<Value = (Ranking, Ranking)> {
    (1..=max).prop_flat_map(|n| (ranking(n), ranking(n)))
}

fn small_tuning(seed: u64) -> Tuning {
    Tuning {
        leap: 1,
        sigma_alpha: 0.5,
        iterations: 600,
        burn_in: 100,
        thinning: 5,
        seed,
        alpha_init: 1.0,
        correction: ProposalCorrection::Symmetric,
    }
}

#[test]
fn distances_are_metrics_on_small_domains() {
    for n in 1..=5 {
        let all = all_rankings(n);
        for r in &all {
            for m in METRICS {
                assert_eq!(m.distance(r, r).unwrap(), 0);
            }
            for p in &all {
                for m in METRICS {
                    let d = m.distance(r, p).unwrap();
                    assert_eq!(d, m.distance(p, r).unwrap());
                    assert_eq!(d, oracle_distance(m, r, p));
                    assert_eq!(d == 0, r == p);
                }
                let k = Metric::Kendall.distance(r, p).unwrap();
                let f = Metric::Footrule.distance(r, p).unwrap();
                assert!(k <= f && f <= 2 * k, "{r} {p}: kendall {k}, footrule {f}");
            }
        }
    }
}

#[test]
fn distances_are_right_invariant_exhaustively() {
    for n in 1..=4 {
        let all = all_rankings(n);
        for r in &all {
            for p in &all {
                for s in &all {
                    for m in METRICS {
                        assert_eq!(
                            m.distance(&r.compose(s).unwrap(), &p.compose(s).unwrap()).unwrap(),
                            m.distance(r, p).unwrap()
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn partition_is_right_invariant_and_decreasing() {
    for n in 1..=5 {
        for m in METRICS {
            let id = ExactPartition::new(n, m).unwrap();
            for reference in all_rankings(n).iter().step_by(7) {
                let other = ExactPartition::with_reference(reference, m, 10).unwrap();
                for a in [0.0, 0.7, 3.0] {
                    assert!((other.log_z(a).unwrap() - id.log_z(a).unwrap()).abs() < 1e-12);
                }
            }
        }
    }
    let mut previous = f64::NEG_INFINITY;
    for n in 1..=8 {
        let z0 = exact_log_partition(n, 0.0, Metric::Footrule).unwrap();
        assert!(z0 >= previous);
        previous = z0;
    }
    for m in METRICS {
        let z = ExactPartition::new(6, m).unwrap();
        let values: Vec<f64> = (0..50).map(|i| z.log_z(i as f64 * 0.4).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn right_invariance_random((r, p) in sized_pair(12), seed in any::<u64>()) {
        let s = Ranking::random(r.len(), &mut stream_rng(seed, 0));
        for m in METRICS {
            prop_assert_eq!(
                m.distance(&r.compose(&s).unwrap(), &p.compose(&s).unwrap()).unwrap(),
                m.distance(&r, &p).unwrap()
            );
        }
    }

    #[test]
    fn leap_and_shift_yields_permutations(rho in (2usize..=12).prop_flat_map(ranking), leap in 1usize..=6, seed in any::<u64>()) {
        let leap = leap.min(rho.len().div_ceil(2));
        let mut rng = stream_rng(seed, 1);
        for _ in 0..20 {
            let step = leap_and_shift(&rho, leap, &mut rng);
            prop_assert!(Ranking::new(step.proposal.ranks().to_vec()).is_ok());
            prop_assert_ne!(&step.proposal, &rho);
            prop_assert!(step.new_rank.abs_diff(rho.rank(step.item)) <= 2 * leap);
        }
    }

    #[test]
    fn closure_is_fixed_point_and_acyclic(order in (2usize..=9).prop_flat_map(ranking), picks in prop::collection::vec((0usize..9, 0usize..9), 0..12)) {
        let n = order.len();
        let pairs: BTreeSet<PreferencePair> = picks
            .into_iter()
            .map(|(a, b)| (a % n, b % n))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| if order.rank(a) > order.rank(b) { PreferencePair::new(a, b).unwrap() } else { PreferencePair::new(b, a).unwrap() })
            .collect();
        let closed = transitive_closure(pairs.iter().copied()).unwrap();
        let again = transitive_closure(closed.pairs().iter().copied()).unwrap();
        prop_assert_eq!(closed.pairs(), again.pairs());
        prop_assert!(pairs.iter().all(|p| closed.contains(p.lower, p.upper)));
        prop_assert!(closed.pairs().iter().all(|p| !closed.contains(p.upper, p.lower)));
        prop_assert!(is_consistent(&order, &closed));
    }

    #[test]
    fn constrained_leap_stays_consistent(order in (2usize..=8).prop_flat_map(ranking), picks in prop::collection::vec((0usize..8, 0usize..8), 1..10), seed in any::<u64>()) {
        let n = order.len();
        let pairs: Vec<PreferencePair> = picks
            .into_iter()
            .map(|(a, b)| (a % n, b % n))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| if order.rank(a) > order.rank(b) { PreferencePair::new(a, b).unwrap() } else { PreferencePair::new(b, a).unwrap() })
            .collect();
        let closed = transitive_closure(pairs).unwrap();
        let mut rng = stream_rng(seed, 2);
        let mut state = init_consistent(&closed, n, &mut rng);
        prop_assert!(is_consistent(&state, &closed));
        for _ in 0..50 {
            state = constrained_leap(&state, &closed, &mut rng).unwrap();
            prop_assert!(is_consistent(&state, &closed));
        }
    }

    #[test]
    fn summaries_are_well_formed(draws in (2usize..=7).prop_flat_map(|n| prop::collection::vec(ranking(n), 1..40)), level in 0.05f64..0.99) {
        let n = draws[0].len();
        let m = marginal_rank_matrix(&draws).unwrap();
        for i in 0..n {
            let row: f64 = m.row(i).iter().sum();
            prop_assert!((row - 1.0).abs() < 1e-9);
            let col: f64 = (0..n).map(|k| m.probs[k][i]).sum();
            prop_assert!((col - 1.0).abs() < 1e-9);
            let set = hpdi(m.row(i), level).unwrap();
            prop_assert!(set.mass >= level - 1e-12);
            let smaller = hpdi(m.row(i), level * 0.5).unwrap();
            prop_assert!(smaller.ranks.len() <= set.ranks.len());
        }
        let cp: BTreeSet<usize> = cp_ordering(&m).iter().map(|e| e.item).collect();
        prop_assert_eq!(cp, (0..n).collect::<BTreeSet<_>>());

        // dominance flags form a DAG: peel off items that nobody dominates
        let dom = dominance_matrix(&draws).unwrap();
        let mut left: BTreeSet<usize> = (0..n).collect();
        while !left.is_empty() {
            let free: Vec<usize> = left.iter().copied().filter(|&j| !left.iter().any(|&i| dom.dominates[i][j])).collect();
            prop_assert!(!free.is_empty(), "dominance cycle");
            for j in free {
                left.remove(&j);
            }
        }

        let augmented: Vec<Vec<Ranking>> = draws.iter().map(|r| vec![r.clone()]).collect();
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    let p = preference_predictive(&augmented, 0, a, b).unwrap() + preference_predictive(&augmented, 0, b, a).unwrap();
                    prop_assert!((p - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cluster_probabilities_normalize_and_ignore_shifts(r in ranking(5), rho in prop::collection::vec(ranking(5), 3), a in prop::collection::vec(0.0f64..8.0, 3), shift in -50.0f64..50.0) {
        let z = ExactPartition::new(5, Metric::Footrule).unwrap();
        let tau = [0.2, 0.5, 0.3];
        let p = cluster_probabilities(&r, &tau, &rho, &a, Metric::Footrule, &z).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // scaling every tau multiplies each weight by the same factor
        let scaled: Vec<f64> = tau.iter().map(|t| t * shift.exp()).collect();
        let q = cluster_probabilities(&r, &scaled, &rho, &a, Metric::Footrule, &z).unwrap();
        for (x, y) in p.iter().zip(&q) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn mixture_invariants_hold_every_sweep() {
    let z = ExactPartition::new(5, Metric::Footrule).unwrap();
    let mut data = sample_mallows(&Ranking::identity(5), 4.0, Metric::Footrule, 10, 1);
    data.extend(sample_mallows(&Ranking::new(vec![5, 4, 3, 2, 1]).unwrap(), 4.0, Metric::Footrule, 10, 2));
    let assessors: Vec<AssessorData> = data.iter().map(AssessorData::complete).collect();
    let options = MixtureOptions { check_invariants: true, ..MixtureOptions::default() };
    for clusters in 1..=4 {
        let priors = MixturePriors::new(0.1, 2.0, clusters).unwrap();
        let s = run_mixture_chain(&assessors, Metric::Footrule, &priors, &small_tuning(clusters as u64), &z, &options)
            .unwrap();
        for (alpha, tau) in s.alpha.iter().zip(&s.tau) {
            assert!(alpha.windows(2).all(|w| w[0] < w[1]));
            assert!((tau.iter().sum::<f64>() - 1.0).abs() < 1e-12 && tau.iter().all(|&t| t >= 0.0));
        }
        // relabelling clusters leaves the within-cluster sum of squares unchanged
        let mut permuted = s.clone();
        for (rho, z) in permuted.rho.iter_mut().zip(permuted.z.iter_mut()) {
            rho.reverse();
            for label in z.iter_mut() {
                *label = clusters - 1 - *label;
            }
        }
        assert_eq!(within_cluster_ss(&s, &data), within_cluster_ss(&permuted, &data));
    }
}

#[test]
fn sample_files_round_trip_bit_exact() {
    let z = ExactPartition::new(5, Metric::Spearman).unwrap();
    let data = sample_mallows(&Ranking::identity(5), 2.0, Metric::Spearman, 8, 3);
    let s = run_chain(&data, Metric::Spearman, &Priors::new(0.25).unwrap(), &small_tuning(4), &z).unwrap();
    let catalog = ItemCatalog::new(["a", "b", "c", "d", "e"]).unwrap();
    let file = SampleFile { catalog: catalog.clone(), samples: SampleSet::Static(s) };
    assert_eq!(SampleFile::parse(&file.to_text()).unwrap(), file);

    let assessors: Vec<AssessorData> = data.iter().map(AssessorData::complete).collect();
    let options = MixtureOptions {
        augment: AugmentOptions { record_augmented: true, ..AugmentOptions::default() },
        ..MixtureOptions::default()
    };
    let priors = MixturePriors::new(0.25, 2.0, 2).unwrap();
    let m = run_mixture_chain(&assessors, Metric::Spearman, &priors, &small_tuning(5), &z, &options).unwrap();
    let file = SampleFile { catalog, samples: SampleSet::Mixture(m) };
    assert_eq!(SampleFile::parse(&file.to_text()).unwrap(), file);
}
