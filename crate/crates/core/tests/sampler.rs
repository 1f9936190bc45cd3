mod common;

use std::collections::HashMap;

use common::*;
use insdiff::denoiser::{ContextModel, ContextShape, Denoiser, UniformDenoiser};
use insdiff::sampler::{generate, k_gillespie_deletions, shrink, shrink_k_gillespie, ShrinkMode};
use insdiff::schedule::{InsertionDistribution, RateSchedule};
use insdiff::stats::{chi_square_gof, chi_square_two_sample};
use proptest::prelude::*;
use rand::Rng;

fn perturbed_model(seed: u64) -> ContextModel {
    let mut r = rng(seed);
    let mut model = ContextModel::new(ContextShape::toy_default(3), &mut r).unwrap();
    for p in model.params_mut() {
        *p += r.random_range(-0.5..0.5);
    }
    model
}

#[test]
fn uniform_shrink_keeps_every_subset_equally_likely() {
    // Sequential uniform deletions leave each C(6,2) kept pair with equal probability.
    let x = seq(&[0, 1, 2, 0, 1, 2]);
    let mut r = rng(61);
    let n = 30_000;
    let mut trace_kept: HashMap<(usize, usize), u64> = HashMap::new();
    for _ in 0..n {
        let (_, trace) = shrink(&x, 4, &UniformDenoiser, ShrinkMode::Sample, None, &mut r).unwrap();
        let mut alive: Vec<usize> = (0..6).collect();
        for s in &trace.steps {
            alive.remove(s.position);
        }
        *trace_kept.entry((alive[0], alive[1])).or_default() += 1;
    }
    let observed: Vec<u64> = trace_kept.values().copied().collect();
    assert_eq!(observed.len(), 15);
    let chi = chi_square_gof(&observed, &[1.0 / 15.0; 15], 0);
    assert!(chi.p_value > 0.001, "p={}", chi.p_value);
}

#[test]
fn greedy_ignores_seed() {
    let model = perturbed_model(62);
    let x = toy("ABCABCBACBA");
    let (a, _) = shrink(&x, 5, &model, ShrinkMode::Greedy, Some(4), &mut rng(1)).unwrap();
    let (b, _) = shrink(&x, 5, &model, ShrinkMode::Greedy, Some(4), &mut rng(2)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn one_deletion_per_call_matches_shrink_step() {
    let model = perturbed_model(63);
    let x = toy("ABCAB");
    let n = 20_000;
    let mut a = vec![0u64; 5];
    let mut b = vec![0u64; 5];
    let mut r = rng(64);
    for _ in 0..n {
        a[k_gillespie_deletions(&x, 1, &model, 1, None, &mut r).unwrap()[0]] += 1;
        let (_, trace) = shrink(&x, 1, &model, ShrinkMode::Sample, None, &mut r).unwrap();
        b[trace.steps[0].position] += 1;
    }
    assert!(chi_square_two_sample(&a, &b).p_value > 0.001);
    let q = model.predict(&x, 1).unwrap().probs();
    assert!(chi_square_gof(&a, &q, 0).p_value > 0.001);
}

#[test]
fn full_budget_in_one_call() {
    let model = perturbed_model(65);
    let x = toy("ABABCABAB");
    let (y, calls) = shrink_k_gillespie(&x, 4, &model, 4, None, &mut rng(3)).unwrap();
    assert_eq!(calls, 1);
    assert_eq!(y.len(), 5);
    assert!(y.is_subsequence_of(&x));
    let (_, calls) = shrink_k_gillespie(&x, 5, &model, 2, None, &mut rng(3)).unwrap();
    assert_eq!(calls, 3);
}

#[test]
fn single_letter_generation_is_constant() {
    let pi = InsertionDistribution::uniform(1);
    let mut r = rng(66);
    for _ in 0..20 {
        let g = generate(4, &UniformDenoiser, &RateSchedule::default(), &pi, 0, None, &mut r).unwrap();
        assert_eq!(g.sequence.letters(), &[0, 0, 0, 0]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn shrink_returns_subsequence(len in 2usize..30, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let model = perturbed_model(67);
        let mut r = rng(seed);
        let x = seq(&random_letters(3, len, &mut r));
        let m = ((frac * len as f64) as usize).clamp(1, len - 1);
        let (y, trace) = shrink(&x, m, &model, ShrinkMode::Sample, Some(8), &mut r).unwrap();
        prop_assert_eq!(y.len(), len - m);
        prop_assert!(y.is_subsequence_of(&x));
        prop_assert_eq!(trace.replay().unwrap(), y);
    }

    #[test]
    fn k_gillespie_positions_distinct(len in 3usize..20, seed in any::<u64>()) {
        let model = perturbed_model(68);
        let mut r = rng(seed);
        let x = seq(&random_letters(3, len, &mut r));
        let k = r.random_range(1..len);
        let mut p = k_gillespie_deletions(&x, k as u64, &model, k, None, &mut r).unwrap();
        p.sort_unstable();
        p.dedup();
        prop_assert_eq!(p.len(), k);
    }

    #[test]
    fn generated_length_exact(len in 1usize..15, correctors in 0usize..3, seed in any::<u64>()) {
        let model = perturbed_model(69);
        let g = generate(len, &model, &RateSchedule::default(), &InsertionDistribution::uniform(3), correctors, Some(16), &mut rng(seed)).unwrap();
        prop_assert_eq!(g.sequence.len(), len);
    }
}
