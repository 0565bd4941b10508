use std::collections::{BTreeSet, VecDeque};

use perfect_sampling::chain::{build_kernel, check_monotone, reverse_kernel};
use perfect_sampling::mtf::{bruhat_leq, move_to_front, mtf_impute, mtf_reverse_probs, weak_bruhat_leq};
use perfect_sampling::{
    ChainModel, FiniteStates, MtfModel, Permutation, SpinChainModel, Spins, SweepDir, ThreeStateModel, WeightVector,
};
use proptest::prelude::*;

fn perm(s: &str) -> Permutation {
    s.parse().unwrap()
}

/// Everything reachable from `z` by swapping an in-order pair of entries.
fn transposition_closure(z: &Permutation) -> BTreeSet<Vec<u32>> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([z.labels().to_vec()]);
    while let Some(v) = queue.pop_front() {
        if !seen.insert(v.clone()) {
            continue;
        }
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                if v[i] < v[j] {
                    let mut w = v.clone();
                    w.swap(i, j);
                    queue.push_back(w);
                }
            }
        }
    }
    seen
}

/// Inversion set as label pairs `(larger, smaller)` with the larger first.
fn inversion_set(z: &Permutation) -> BTreeSet<(u32, u32)> {
    let l = z.labels();
    let mut s = BTreeSet::new();
    for i in 0..l.len() {
        for j in i + 1..l.len() {
            if l[i] > l[j] {
                s.insert((l[i], l[j]));
            }
        }
    }
    s
}

#[test]
fn bruhat_matches_transposition_closure_on_s4() {
    let all = Permutation::all(4);
    for a in &all {
        let up = transposition_closure(a);
        for b in &all {
            assert_eq!(bruhat_leq(a, b), up.contains(b.labels()), "{a} vs {b}");
        }
    }
}

#[test]
fn weak_order_is_inversion_set_containment_on_s4() {
    let all = Permutation::all(4);
    for a in &all {
        for b in &all {
            assert_eq!(weak_bruhat_leq(a, b), inversion_set(a).is_subset(&inversion_set(b)), "{a} vs {b}");
        }
    }
}

#[test]
fn crossing_pair_is_bruhat_comparable_but_weak_incomparable() {
    let a = perm("2-1-4-3");
    let b = perm("3-4-1-2");
    assert!(transposition_closure(&a).contains(b.labels()));
    assert!(bruhat_leq(&a, &b));
    assert!(!bruhat_leq(&b, &a));
    assert!(!weak_bruhat_leq(&a, &b));
    assert!(!weak_bruhat_leq(&b, &a));
}

#[test]
fn orders_are_partial_orders_and_weak_refines_strong() {
    let all = Permutation::all(4);
    for leq in [weak_bruhat_leq as fn(&Permutation, &Permutation) -> bool, bruhat_leq] {
        for a in &all {
            assert!(leq(a, a));
            assert!(leq(&Permutation::identity(4), a));
            assert!(leq(a, &Permutation::reversal(4)));
            for b in &all {
                if a != b && leq(a, b) {
                    assert!(!leq(b, a));
                }
                for c in &all {
                    if leq(a, b) && leq(b, c) {
                        assert!(leq(a, c));
                    }
                }
            }
        }
    }
    for a in &all {
        for b in &all {
            if weak_bruhat_leq(a, b) {
                assert!(bruhat_leq(a, b));
            }
        }
    }
}

#[test]
fn mtf_reverse_probs_match_reversed_kernel() {
    let w = WeightVector::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
    let model = MtfModel::new(w.clone());
    let k = build_kernel(&model).unwrap();
    let rev = reverse_kernel(&k).unwrap();
    for y in model.states().unwrap() {
        let probs = mtf_reverse_probs(&w, &y).unwrap();
        let total: f64 = probs.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (x, p) in probs {
            assert!((rev.prob(&y, &x).unwrap() - p).abs() < 1e-12, "{y} -> {x}");
        }
    }
}

#[test]
fn mtf_kernel_stationary_law_matches_product_formula() {
    let w = WeightVector::new(vec![0.5, 0.25, 0.15, 0.1]).unwrap();
    let model = MtfModel::new(w);
    let k = build_kernel(&model).unwrap();
    assert!(k.row_sum_error() < 1e-12);
    assert!(k.stationarity_error() < 1e-12);
    for (i, z) in k.states().iter().enumerate() {
        assert!((k.stationary()[i] - model.stationary_prob(z).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn mtf_rule_is_monotone_up_to_five() {
    for n in 1..=5 {
        let w = WeightVector::from_unnormalized((1..=n).map(|i| 1.0 / i as f64).collect()).unwrap();
        assert!(check_monotone(&MtfModel::new(w)).unwrap().is_monotone(), "n = {n}");
    }
}

#[test]
fn three_state_chain_is_reversible_with_stated_law() {
    let model = ThreeStateModel::new(0.2).unwrap();
    let k = build_kernel(&model).unwrap();
    let pi = model.stationary();
    for (a, b) in k.stationary().iter().zip(pi) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(reverse_kernel(&k).unwrap().max_abs_diff(&k) < 1e-12);
}

#[test]
fn spin_kernel_preserves_gibbs_law_and_reverses_by_sweep_direction() {
    let model = SpinChainModel::new(4, 0.8, 0.3, 2.0, SweepDir::LeftToRight).unwrap();
    let k = build_kernel(&model).unwrap();
    let gibbs = model.gibbs_measure().unwrap();
    for (s, p) in &gibbs {
        let i = k.index_of(s).unwrap();
        assert!((k.stationary()[i] - p).abs() < 1e-10, "{s}");
    }
    let back = build_kernel(&model.reversed()).unwrap();
    assert!(reverse_kernel(&k).unwrap().max_abs_diff(&back) < 1e-10);
}

#[test]
fn spin_reverse_step_lands_on_predecessors() {
    use rand::SeedableRng;
    let model = SpinChainModel::new(5, 1.0, 0.5, 3.0, SweepDir::LeftToRight).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let y: Spins = "+-+-+".parse().unwrap();
    for _ in 0..200 {
        let x = model.reverse_step(&y, &mut rng);
        let u = model.impute(&x, &y, &mut rng).unwrap();
        assert_eq!(model.forward(&x, &u), y);
    }
}

fn weights_strategy() -> impl Strategy<Value = WeightVector> {
    prop::collection::vec(0.01f64..1.0, 2..=6).prop_map(|mut raw| {
        raw.sort_by(|a, b| b.total_cmp(a));
        WeightVector::from_unnormalized(raw).unwrap()
    })
}

fn weights_and_perm() -> impl Strategy<Value = (WeightVector, Permutation)> {
    weights_strategy().prop_flat_map(|w| {
        let n = w.len();
        (Just(w), Just((1..=n as u32).collect::<Vec<_>>()).prop_shuffle())
            .prop_map(|(w, labels)| (w, Permutation::new(labels).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 128,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn stationary_law_sums_to_one(w in weights_strategy()) {
        let model = MtfModel::new(w);
        let total: f64 = model.stationary_law().unwrap().iter().map(|(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn imputation_recovers_moved_label((w, z) in weights_and_perm(), pick in 0usize..6) {
        let label = (pick % w.len()) as u32 + 1;
        let next = move_to_front(&z, label).unwrap();
        prop_assert_eq!(next.front(), label);
        prop_assert_eq!(mtf_impute(&z, &next).unwrap(), label);
    }

    #[test]
    fn reverse_probs_are_a_law_over_predecessors((w, y) in weights_and_perm()) {
        let probs = mtf_reverse_probs(&w, &y).unwrap();
        let total: f64 = probs.iter().map(|(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        for (x, p) in probs {
            prop_assert!(p >= 0.0);
            prop_assert_eq!(move_to_front(&x, y.front()).unwrap(), y.clone());
        }
    }

    #[test]
    fn detailed_flow_balances((w, y) in weights_and_perm()) {
        let model = MtfModel::new(w.clone());
        let pi_y = model.stationary_prob(&y).unwrap();
        for (x, p) in mtf_reverse_probs(&w, &y).unwrap() {
            let forward = model.stationary_prob(&x).unwrap() * w.of(y.front());
            prop_assert!((pi_y * p - forward).abs() < 1e-12);
        }
    }

    #[test]
    fn weak_order_implies_bruhat((_, a) in weights_and_perm(), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut labels = a.labels().to_vec();
        labels.shuffle(&mut rng);
        let b = Permutation::new(labels).unwrap();
        if weak_bruhat_leq(&a, &b) {
            prop_assert!(bruhat_leq(&a, &b));
        }
        prop_assert_eq!(bruhat_leq(&a, &b) && bruhat_leq(&b, &a), a == b);
    }
}
