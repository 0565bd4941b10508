use perfect_sampling::harness::experiment::{replicate, replicate_all, Outcome};
use perfect_sampling::mtf::{incremental_sampler, weak_bruhat_leq};
use perfect_sampling::sampler::{cftp_observed, SetShape, TargetSet};
use perfect_sampling::stats::{gof_samples, DEFAULT_SIGNIFICANCE};
use perfect_sampling::{
    cftp, fmmr, fmmr_set, Coupling, Error, MtfModel, OrderedChain, Permutation, SamplerConfig, SpinChainModel,
    SweepDir, ThreeStateModel, WeightVector,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mtf(w: &[f64]) -> MtfModel {
    MtfModel::new(WeightVector::new(w.to_vec()).unwrap())
}

fn three_state_law(m: &ThreeStateModel) -> Vec<(u8, f64)> {
    m.stationary().iter().enumerate().map(|(i, &p)| (i as u8, p)).collect()
}

#[test]
fn cftp_reuses_innovations_across_windows() {
    let model = mtf(&[0.4, 0.3, 0.2, 0.1]);
    let coupling = Coupling::monotone(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut seen: Vec<Vec<u32>> = Vec::new();
    let rec = cftp_observed(&model, &coupling, &SamplerConfig::vanilla(10_000), &mut rng, |t, us| {
        assert_eq!(us.len() as u64, t);
        seen.push(us.to_vec());
    })
    .unwrap();
    assert_eq!(seen.len() as u64, rec.window);
    for pair in seen.windows(2) {
        assert_eq!(pair[1][..pair[0].len()], pair[0][..]);
    }
}

#[test]
fn monotone_and_all_states_couplings_agree_run_by_run() {
    let model = mtf(&[0.35, 0.3, 0.2, 0.15]);
    let mono = Coupling::monotone(&model);
    let all = Coupling::all_states(&model).unwrap();
    let cfg = SamplerConfig::vanilla(100_000);
    for seed in 0..200 {
        let a = cftp(&model, &mono, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = cftp(&model, &all, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!((a.window, &a.output), (b.window, &b.output));
        let z0 = model.top();
        let a = fmmr(&model, &mono, &z0, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = fmmr(&model, &all, &z0, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!((a.window, &a.output), (b.window, &b.output));
    }
}

#[test]
fn fmmr_from_middle_state_is_exact() {
    let model = mtf(&[0.5, 0.3, 0.2]);
    let law = model.stationary_law().unwrap();
    let coupling = Coupling::monotone(&model);
    let z0: Permutation = "2-1-3".parse().unwrap();
    let cfg = SamplerConfig::vanilla(1_000_000);
    let recs = replicate_all(50_000, 17, |rng| fmmr(&model, &coupling, &z0, &cfg, rng)).unwrap();
    let out: Vec<_> = recs.into_iter().map(|r| r.output).collect();
    let rep = gof_samples(&out, &law, DEFAULT_SIGNIFICANCE).unwrap();
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn fmmr_set_below_213_is_exact() {
    let model = mtf(&[0.5, 0.3, 0.2]);
    let law = model.stationary_law().unwrap();
    let apex: Permutation = "2-1-3".parse().unwrap();
    let member = |z: &Permutation| weak_bruhat_leq(z, &apex);
    let set = TargetSet::new(&member, SetShape::DownSet);
    let inside: Vec<(Permutation, f64)> = law.iter().filter(|(z, _)| member(z)).cloned().collect();
    let mass: f64 = inside.iter().map(|(_, p)| p).sum();
    let coupling = Coupling::monotone(&model);
    let cfg = SamplerConfig::vanilla(1_000_000);
    let draw = |rng: &mut ChaCha8Rng| {
        let mut u: f64 = rand::Rng::random::<f64>(rng) * mass;
        for (z, p) in &inside {
            if u < *p {
                return z.clone();
            }
            u -= p;
        }
        inside.last().unwrap().0.clone()
    };
    let recs = replicate_all(100_000, 23, |rng| fmmr_set(&model, &coupling, &set, draw, &cfg, rng)).unwrap();
    assert!(recs.iter().all(|r| r.window >= 1) && recs.iter().any(|r| !member(&r.output)));
    let out: Vec<_> = recs.into_iter().map(|r| r.output).collect();
    let rep = gof_samples(&out, &law, DEFAULT_SIGNIFICANCE).unwrap();
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn doubling_schedule_stays_exact_on_three_state_chain() {
    let model = ThreeStateModel::new(0.2).unwrap();
    let coupling = Coupling::all_states(&model).unwrap();
    for cfg in [SamplerConfig::vanilla(1_000_000), SamplerConfig::doubling(1 << 20)] {
        let recs = replicate_all(50_000, 5, |rng| cftp(&model, &coupling, &cfg, rng)).unwrap();
        if cfg == SamplerConfig::doubling(1 << 20) {
            assert!(recs.iter().all(|r| r.window.is_power_of_two()));
        }
        let out: Vec<u8> = recs.iter().map(|r| r.output).collect();
        let rep = gof_samples(&out, &three_state_law(&model), DEFAULT_SIGNIFICANCE).unwrap();
        assert!(rep.passed, "{cfg:?}: {rep:?}");
        let fmmr_recs = replicate_all(50_000, 6, |rng| fmmr(&model, &coupling, &1u8, &cfg, rng)).unwrap();
        let out: Vec<u8> = fmmr_recs.iter().map(|r| r.output).collect();
        let rep = gof_samples(&out, &three_state_law(&model), DEFAULT_SIGNIFICANCE).unwrap();
        assert!(rep.passed, "{cfg:?}: {rep:?}");
    }
}

#[test]
fn fmmr_output_is_exact_given_early_stop() {
    // Runs that finish within the cap are still exact draws from pi.
    let model = mtf(&[0.4, 0.35, 0.25]);
    let law = model.stationary_law().unwrap();
    let coupling = Coupling::monotone(&model);
    let cfg = SamplerConfig::vanilla(3);
    let reps = replicate(60_000, 31, |rng| fmmr(&model, &coupling, &model.bottom(), &cfg, rng)).unwrap();
    let done: Vec<Permutation> = reps
        .iter()
        .filter_map(|r| match &r.outcome {
            Outcome::Done(rec) => Some(rec.output.clone()),
            Outcome::TimedOut { .. } => None,
        })
        .collect();
    let timeouts = reps.len() - done.len();
    assert!(timeouts > 1000 && done.len() > 1000);
    let rep = gof_samples(&done, &law, DEFAULT_SIGNIFICANCE).unwrap();
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn timeout_then_retry_with_fresh_randomness() {
    let model = mtf(&[0.25; 4]);
    let coupling = Coupling::monotone(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let err = fmmr(&model, &coupling, &model.bottom(), &SamplerConfig::vanilla(1), &mut rng).unwrap_err();
    assert!(matches!(err, Error::Timeout { max_window: 1, .. }));
    let rec = fmmr(&model, &coupling, &model.bottom(), &SamplerConfig::vanilla(1_000_000), &mut rng).unwrap();
    assert!(rec.window >= 3);
}

#[test]
fn incremental_sampler_matches_stationary_law() {
    let model = mtf(&[0.4, 0.3, 0.2, 0.1]);
    let law = model.stationary_law().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let out: Vec<Permutation> = (0..50_000).map(|_| incremental_sampler(model.weights(), &mut rng)).collect();
    let rep = gof_samples(&out, &law, DEFAULT_SIGNIFICANCE).unwrap();
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn three_state_fmmr_from_zero_finishes_in_one_step() {
    let model = ThreeStateModel::new(0.1).unwrap();
    let coupling = Coupling::all_states(&model).unwrap();
    let recs = replicate_all(2_000, 8, |rng| fmmr(&model, &coupling, &0u8, &SamplerConfig::vanilla(10), rng)).unwrap();
    assert!(recs.iter().all(|r| r.window == 1));
}

#[test]
fn spin_chain_cftp_is_exact_on_small_chain() {
    let model = SpinChainModel::new(5, 1.0, 0.3, 3.0, SweepDir::LeftToRight).unwrap();
    let law = model.gibbs_measure().unwrap();
    let coupling = Coupling::monotone(&model);
    let cfg = SamplerConfig::vanilla(1_000_000);
    let recs = replicate_all(40_000, 12, |rng| cftp(&model, &coupling, &cfg, rng)).unwrap();
    let out: Vec<_> = recs.into_iter().map(|r| r.output).collect();
    let rep = gof_samples(&out, &law, DEFAULT_SIGNIFICANCE).unwrap();
    assert!(rep.passed, "{rep:?}");
    let recs = replicate_all(40_000, 13, |rng| fmmr(&model, &coupling, &model.bottom(), &cfg, rng)).unwrap();
    let out: Vec<_> = recs.into_iter().map(|r| r.output).collect();
    let rep = gof_samples(&out, &law, DEFAULT_SIGNIFICANCE).unwrap();
    assert!(rep.passed, "{rep:?}");
}
