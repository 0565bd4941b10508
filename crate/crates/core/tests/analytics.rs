use perfect_sampling::analytics::{
    cftp_runtime_law, common_horizon, fmmr_runtime_law, id_runtime_law, rev_runtime_law, stochastic_leq,
    GeomConvolution,
};
use perfect_sampling::chain::{exact_coalescence_prob, CoalescenceTarget, DEFAULT_ENUMERATION_BUDGET};
use perfect_sampling::mtf::bruhat_leq;
use perfect_sampling::{MtfModel, Permutation, WeightVector};
use proptest::prelude::*;

fn weights(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = WeightVector> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|mut raw| {
        raw.sort_by(|a, b| b.total_cmp(a));
        WeightVector::from_unnormalized(raw).unwrap()
    })
}

#[test]
fn fmmr_law_matches_enumeration_from_every_start() {
    let w = WeightVector::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
    let model = MtfModel::new(w.clone());
    for z in Permutation::all(4) {
        let law = fmmr_runtime_law(&w, &z).unwrap();
        let pi = model.stationary_prob(&z).unwrap();
        for t in 0..=6u32 {
            let p =
                exact_coalescence_prob(&model, t, CoalescenceTarget::State(&z), DEFAULT_ENUMERATION_BUDGET).unwrap();
            assert!((p / pi - law.cdf(t as usize)).abs() < 1e-9, "{z} t={t}");
        }
    }
}

#[test]
fn cftp_law_matches_enumeration() {
    let w = WeightVector::new(vec![0.5, 0.3, 0.2]).unwrap();
    let model = MtfModel::new(w.clone());
    let law = cftp_runtime_law(&w, 60).unwrap();
    let cdf = law.cdf_prefix();
    for t in 0..=8u32 {
        let p = exact_coalescence_prob(&model, t, CoalescenceTarget::Any, DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert!((p - cdf[t as usize]).abs() < 1e-9, "t={t}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn extremes_bound_every_start(w in weights(2..=5), pick in any::<prop::sample::Index>()) {
        let all = Permutation::all(w.len());
        let z = &all[pick.index(all.len())];
        let law = fmmr_runtime_law(&w, z).unwrap();
        let rev = rev_runtime_law(&w);
        let id = id_runtime_law(&w);
        let h = common_horizon(&[&rev, &law, &id], 1e-12);
        prop_assert!(stochastic_leq(&rev, &law, h).unwrap());
        prop_assert!(stochastic_leq(&law, &id, h).unwrap());
    }

    #[test]
    fn runtime_decreases_up_the_bruhat_order(w in weights(3..=4), i in any::<prop::sample::Index>(), j in any::<prop::sample::Index>()) {
        let all = Permutation::all(w.len());
        let (a, b) = (&all[i.index(all.len())], &all[j.index(all.len())]);
        if bruhat_leq(a, b) {
            let ta = fmmr_runtime_law(&w, a).unwrap();
            let tb = fmmr_runtime_law(&w, b).unwrap();
            let h = common_horizon(&[&ta, &tb], 1e-12);
            prop_assert!(stochastic_leq(&tb, &ta, h).unwrap());
        }
    }

    #[test]
    fn convolution_pmf_is_a_law_with_the_stated_mean(params in prop::collection::vec(0.1f64..1.0, 1..6)) {
        let d = GeomConvolution::new(params.clone()).unwrap();
        let horizon = 2000;
        let pmf = d.pmf_prefix(horizon);
        let total: f64 = pmf.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let expect: f64 = params.iter().map(|q| 1.0 / q).sum();
        prop_assert!((mean - expect).abs() < 1e-6);
        prop_assert!((d.mean() - expect).abs() < 1e-9);
    }
}
