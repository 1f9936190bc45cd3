mod common;

use common::*;
use insdiff::denoiser::{ContextModel, ContextShape, UniformDenoiser};
use insdiff::objective::{
    corpus_elbo, entropy, kl_divergence, prior_kl_estimate, target_distribution, windowed_distribution,
    DeletionDistribution,
};
use insdiff::schedule::{InsertionDistribution, RateSchedule};
use insdiff::seqcore::toy_corpus;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn target_matches_brute_force_ratio() {
    for x0 in all_sequences(2, 3) {
        for xt in all_sequences(2, 6) {
            let total = brute_alignments(&x0, &xt);
            if xt.len() <= x0.len() || total == 0 {
                continue;
            }
            let m = (xt.len() - x0.len()) as f64;
            let p = target_distribution(&seq(&x0), &seq(&xt)).unwrap().probs();
            for (l, pl) in p.iter().enumerate() {
                let want = brute_alignments(&x0, &delete_at(&xt, l)) as f64 / (m * total as f64);
                assert!((pl - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn prior_kl_uniform_pi_matches_enumeration() {
    let pi = InsertionDistribution::uniform(2);
    let mut rng = rng(41);
    for m in 1..=3usize {
        let exact = exhaustive_prior_kl(&[0, 1], m, &[0.5, 0.5]);
        let est = prior_kl_estimate(&seq(&[0, 1]), m as u64, &pi, 20_000, &mut rng).unwrap();
        assert!((est.mean - exact).abs() <= 3.0 * est.std_error, "m={m}: {} vs {exact}", est.mean);
    }
}

#[test]
fn random_model_perplexity_near_alphabet_size() {
    // An untrained model is close to uniform deletion, whose bound sits near K = 3.
    let mut rng = rng(42);
    let corpus = toy_corpus(100, 20, &mut rng).unwrap();
    let pi = InsertionDistribution::uniform(3);
    let sched = RateSchedule::default();
    let model = ContextModel::new(ContextShape::toy_default(3), &mut rng).unwrap();
    let random = corpus_elbo(&corpus, &model, &sched, &pi, 10, Some(64), &mut rng).unwrap();
    let uniform = corpus_elbo(&corpus, &UniformDenoiser, &sched, &pi, 10, Some(64), &mut rng).unwrap();
    assert!(uniform.perplexity > 2.5 && uniform.perplexity < 4.0, "{}", uniform.perplexity);
    assert!(random.perplexity > 2.5, "{}", random.perplexity);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn target_is_a_distribution(x0 in prop::collection::vec(0u8..2, 0..5), extra in prop::collection::vec(0u8..2, 1..6), seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut xt = x0.clone();
        for c in extra {
            let at = r.random_range(0..=xt.len());
            xt.insert(at, c);
        }
        let p = target_distribution(&seq(&x0), &seq(&xt)).unwrap();
        let probs = p.probs();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(probs.iter().all(|&v| (0.0..=1.0 + 1e-15).contains(&v)));
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-12);
        prop_assert!(kl_divergence(&p, &DeletionDistribution::uniform(xt.len())).unwrap() >= -1e-12);
        prop_assert!(entropy(&p) <= (xt.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn windowed_output_is_normalized(raw in prop::collection::vec(-5.0f64..5.0, 1..10), pad in 0usize..10, seed in any::<u64>()) {
        let w = raw.len();
        let full = w + pad;
        let start = rng(seed).random_range(0..=pad);
        let d = DeletionDistribution::from_scores(&raw).unwrap();
        let out = windowed_distribution(&d, start, w, full).unwrap().probs();
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (i, p) in out.iter().enumerate() {
            if i < start || i >= start + w {
                prop_assert!((p - 1.0 / full as f64).abs() < 1e-15);
            }
        }
    }
}
