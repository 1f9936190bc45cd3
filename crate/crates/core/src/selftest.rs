//! Oracle suite behind the `selftest` subcommand. Each check compares a
//! library routine against an independent brute-force or simulation oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::{alignments_all_deletions_exact, count_alignments, count_alignments_exact};
use crate::denoiser::{gradient_check, BatchItem, ContextModel, ContextShape};
use crate::error::Result;
use crate::forward::{insertion_path_given_m, sample_xt, simulate_pure_birth, NoisedSample};
use crate::objective::{prior_kl_estimate, target_distribution};
use crate::schedule::{InsertionDistribution, RateSchedule};
use crate::seqcore::Sequence;
use crate::stats::{chi_square_two_sample, total_variation};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Check {
            name,
            passed,
            detail,
        }
    }
}

/// Every sequence over `k` letters with length in `0..=max_len`.
fn all_sequences(k: u8, max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    let mut layer = vec![vec![]];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s: &Vec<u8>| {
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

/// Embeddings of `x` in `y` by trying every subset of positions of `y`.
fn brute_alignments(x: &[u8], y: &[u8]) -> u64 {
    if x.len() > y.len() {
        return 0;
    }
    (0u32..1 << y.len())
        .filter(|mask| mask.count_ones() as usize == x.len())
        .filter(|mask| {
            let picked = (0..y.len()).filter(|i| mask >> i & 1 == 1).map(|i| y[i]);
            picked.eq(x.iter().copied())
        })
        .count() as u64
}

fn check_alignment() -> Result<Check> {
    let shorts = all_sequences(2, 3);
    let longs = all_sequences(2, 6);
    let mut pairs = 0;
    let mut bad = 0;
    for x0 in &shorts {
        for xt in &longs {
            let want = brute_alignments(x0, xt);
            let exact: u64 = count_alignments_exact(x0, xt)?.try_into().unwrap_or(u64::MAX);
            let log = count_alignments(x0, xt);
            let log_ok = if want == 0 {
                log.is_zero()
            } else {
                ((log.ln() - (want as f64).ln()).abs()) < 1e-12
            };
            let mut ok = exact == want && log_ok;
            if xt.len() > x0.len() {
                let dels = alignments_all_deletions_exact(x0, xt)?;
                let mut sum = 0u64;
                for (l, d) in dels.iter().enumerate() {
                    let mut y = xt.clone();
                    y.remove(l);
                    let w = brute_alignments(x0, &y);
                    ok &= *d == w.into();
                    sum += w;
                }
                ok &= sum == (xt.len() - x0.len()) as u64 * want;
            }
            pairs += 1;
            if !ok {
                bad += 1;
            }
        }
    }
    Ok(Check::new(
        "alignment brute force",
        bad == 0,
        format!("{pairs} pairs, {bad} mismatches"),
    ))
}

fn check_forward() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sched = RateSchedule::default();
    let pi = InsertionDistribution::uniform(2);
    let x0 = Sequence::from_letters(vec![0, 1]);
    let t = 0.5;
    let n = 20_000;
    let cap = 30;
    let mut a = vec![0u64; cap + 1];
    let mut b = vec![0u64; cap + 1];
    for _ in 0..n {
        let fast = sample_xt(&x0, t, &sched, &pi, &mut rng)?;
        let (slow, _) = simulate_pure_birth(&x0, t, &sched, &pi, &mut rng)?;
        a[(fast.m_t as usize).min(cap)] += 1;
        b[(slow.m_t as usize).min(cap)] += 1;
    }
    let chi = chi_square_two_sample(&a, &b);
    Ok(Check::new(
        "forward simulator",
        chi.p_value > 1e-3,
        format!("M_t two-sample chi-square p = {:.4}", chi.p_value),
    ))
}

fn check_posterior() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let pi = InsertionDistribution::uniform(2);
    let x0 = Sequence::from_letters(vec![0, 1]);
    let xt = Sequence::from_letters(vec![0, 1, 0, 1]);
    let want = 3000;
    let mut counts = vec![0u64; xt.len()];
    let mut accepted = 0;
    while accepted < want {
        let (end, steps) = insertion_path_given_m(&x0, 2, &pi, &mut rng);
        if end == xt {
            counts[steps.last().expect("two steps").0] += 1;
            accepted += 1;
        }
    }
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / want as f64).collect();
    let tv = total_variation(&empirical, &target_distribution(&x0, &xt)?.probs());
    Ok(Check::new(
        "target posterior",
        tv <= 0.05,
        format!("TV = {tv:.4} over {want} accepted paths"),
    ))
}

fn check_gradient() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut model = ContextModel::new(ContextShape::toy_default(3), &mut rng)?;
    for p in model.params_mut() {
        *p += rng.random_range(-0.3..0.3);
    }
    let item = BatchItem::new(
        NoisedSample {
            x0: Sequence::from_letters(vec![0, 1, 0]),
            x_t: Sequence::from_letters(vec![2, 0, 1, 1, 0, 2]),
            m_t: 3,
            t: 0.5,
            gap_sizes: None,
        },
        1.7,
    );
    let worst = gradient_check(&model, &item, 60, &mut rng)?;
    Ok(Check::new(
        "gradient check",
        worst <= 1e-4,
        format!("max relative error {worst:.2e} over 60 coordinates"),
    ))
}

/// `KL(p(X₁|x0,m) ‖ π^{⊗(L+m)})` by enumerating every insertion path.
fn exhaustive_prior_kl(x0: &[u8], m: usize, pi: &[f64]) -> f64 {
    let mut paths: Vec<(Vec<u8>, f64)> = vec![(x0.to_vec(), 1.0)];
    for _ in 0..m {
        let mut next = Vec::new();
        for (s, p) in &paths {
            let gaps = s.len() + 1;
            for g in 0..gaps {
                for (c, &pc) in pi.iter().enumerate() {
                    let mut t = s.clone();
                    t.insert(g, c as u8);
                    next.push((t, p * pc / gaps as f64));
                }
            }
        }
        paths = next;
    }
    let mut law: std::collections::BTreeMap<Vec<u8>, f64> = Default::default();
    for (s, p) in paths {
        *law.entry(s).or_default() += p;
    }
    law.iter()
        .map(|(s, &p)| {
            let q: f64 = s.iter().map(|&c| pi[c as usize]).product();
            p * (p / q).ln()
        })
        .sum()
}

fn check_prior_kl() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let pi = InsertionDistribution::new(vec![0.3, 0.7])?;
    let x0 = Sequence::from_letters(vec![0, 1]);
    let mut worst_z: f64 = 0.0;
    let mut ok = true;
    for m in 1..=3u64 {
        let exact = exhaustive_prior_kl(x0.letters(), m as usize, pi.probs());
        let est = prior_kl_estimate(&x0, m, &pi, 20_000, &mut rng)?;
        let z = (est.mean - exact).abs() / est.std_error.max(1e-12);
        worst_z = worst_z.max(z);
        ok &= z <= 3.0;
    }
    Ok(Check::new(
        "prior KL oracle",
        ok,
        format!("worst deviation {worst_z:.2} standard errors"),
    ))
}

/// Runs every check; the suite uses fixed internal seeds.
pub fn run() -> Result<Vec<Check>> {
    Ok(vec![
        check_alignment()?,
        check_forward()?,
        check_posterior()?,
        check_gradient()?,
        check_prior_kl()?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_counts() {
        assert_eq!(brute_alignments(&[0, 1], &[0, 1, 0, 1]), 3);
        assert_eq!(brute_alignments(&[], &[1, 1]), 1);
        assert_eq!(brute_alignments(&[1, 1, 1], &[1, 1]), 0);
        assert_eq!(all_sequences(2, 2).len(), 7);
    }

    #[test]
    fn exhaustive_kl_single_letter_is_zero() {
        assert!(exhaustive_prior_kl(&[0, 0], 3, &[1.0]).abs() < 1e-12);
    }

    #[test]
    fn suite_passes() {
        for c in run().unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
