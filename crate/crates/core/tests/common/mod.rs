//! Independent oracles shared by the integration tests. Nothing here calls
//! the library routine it is used to check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use insdiff::config::RunConfig;
use insdiff::denoiser::{train, ContextModel, Denoiser, TrainOutcome};
use insdiff::schedule::{InsertionDistribution, RateSchedule};
use insdiff::seqcore::{toy_corpus, Corpus, Sequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn seq(letters: &[u8]) -> Sequence {
    Sequence::from_letters(letters.to_vec())
}

/// `"ABCA"` to toy indices.
pub fn toy(s: &str) -> Sequence {
    Sequence::from_letters(s.bytes().map(|b| b - b'A').collect())
}

/// Every sequence over `k` letters with length in `0..=max_len`.
pub fn all_sequences(k: u8, max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    let mut layer: Vec<Vec<u8>> = vec![vec![]];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s| {
                (0..k).map(move |c| {
                    let mut t = s.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

pub fn random_letters(k: u8, len: usize, rng: &mut impl Rng) -> Vec<u8> {
    (0..len).map(|_| rng.random_range(0..k)).collect()
}

/// Embeddings of `x` in `y` counted over every position subset of `y`.
pub fn brute_alignments(x: &[u8], y: &[u8]) -> u64 {
    if x.len() > y.len() {
        return 0;
    }
    (0u64..1 << y.len())
        .filter(|mask| mask.count_ones() as usize == x.len())
        .filter(|mask| {
            (0..y.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| y[i])
                .eq(x.iter().copied())
        })
        .count() as u64
}

/// Textbook distinct-subsequence recurrence over `u128`.
pub fn recurrence_alignments(x: &[u8], y: &[u8]) -> u128 {
    let mut row = vec![0u128; x.len() + 1];
    row[0] = 1;
    for &c in y {
        for i in (1..=x.len()).rev() {
            if x[i - 1] == c {
                row[i] += row[i - 1];
            }
        }
    }
    row[x.len()]
}

pub fn delete_at(y: &[u8], l: usize) -> Vec<u8> {
    let mut v = y.to_vec();
    v.remove(l);
    v
}

/// Exact law of the sequence after inserting `m` letters one at a time at
/// uniform gaps, merging equal strings after every step.
pub fn insertion_law(x0: &[u8], m: usize, pi: &[f64]) -> BTreeMap<Vec<u8>, f64> {
    let mut law: BTreeMap<Vec<u8>, f64> = BTreeMap::from([(x0.to_vec(), 1.0)]);
    for _ in 0..m {
        let mut next = BTreeMap::new();
        for (s, p) in &law {
            let gaps = s.len() + 1;
            for g in 0..gaps {
                for (c, &pc) in pi.iter().enumerate() {
                    let mut t = s.clone();
                    t.insert(g, c as u8);
                    *next.entry(t).or_default() += p * pc / gaps as f64;
                }
            }
        }
        law = next;
    }
    law
}

/// `KL(p(X₁|x0, m) ‖ π^{⊗(L+m)})` from [`insertion_law`].
pub fn exhaustive_prior_kl(x0: &[u8], m: usize, pi: &[f64]) -> f64 {
    insertion_law(x0, m, pi)
        .iter()
        .map(|(s, &p)| {
            let q: f64 = s.iter().map(|&c| pi[c as usize]).product();
            p * (p / q).ln()
        })
        .sum()
}

pub fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

/// Probability of deleting exactly the original `positions` from `x`,
/// summed over every order, using only the model's raw scores.
pub fn brute_set_probability(x: &[u8], positions: &[usize], model: &dyn Denoiser) -> f64 {
    let m = positions.len();
    permutations(positions)
        .iter()
        .map(|order| {
            // Track original indices of the letters still present.
            let mut alive: Vec<usize> = (0..x.len()).collect();
            let mut p = 1.0;
            for (step, orig) in order.iter().enumerate() {
                let cur: Vec<u8> = alive.iter().map(|&i| x[i]).collect();
                let probs = softmax(&model.scores(&cur, (m - step) as u64));
                let idx = alive.iter().position(|i| i == orig).unwrap();
                p *= probs[idx];
                alive.remove(idx);
            }
            p
        })
        .sum()
}

/// Alternating over {A, B}: the toy validity rule, restated.
pub fn valid_toy(letters: &[u8]) -> bool {
    !letters.is_empty() && letters.iter().all(|&c| c < 2) && letters.windows(2).all(|w| w[0] != w[1])
}

pub fn alternating(len: usize, start: u8) -> Sequence {
    Sequence::from_letters((0..len).map(|j| start ^ (j as u8 & 1)).collect())
}

/// The toy training run used by the acceptance suite.
pub struct ToyRun {
    pub outcome: TrainOutcome,
    pub train: Corpus,
    pub validation: Corpus,
    pub schedule: RateSchedule,
    pub pi: InsertionDistribution,
    pub window: usize,
}

pub fn train_toy(seed: u64, steps: Option<usize>) -> ToyRun {
    let mut config = RunConfig::toy();
    config.seed = seed;
    if let Some(s) = steps {
        config.train.steps = s;
    }
    let mut rng = config.rng();
    let train_corpus = toy_corpus(10_000, 20, &mut rng).unwrap();
    let validation = toy_corpus(200, 20, &mut rng).unwrap();
    let alphabet = config.resolve_alphabet().unwrap();
    let pi = config.resolve_pi(&alphabet, Some(&train_corpus)).unwrap();
    let model = ContextModel::new(config.model.shape(alphabet.size()), &mut rng).unwrap();
    let outcome = train(&train_corpus, &config.schedule, &pi, &config.train, model, &mut rng, None).unwrap();
    ToyRun {
        outcome,
        train: train_corpus,
        validation,
        schedule: config.schedule,
        pi,
        window: config.window(),
    }
}
