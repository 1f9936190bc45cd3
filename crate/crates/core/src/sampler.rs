//! Generation from long random sequences and deletion-only shrinking.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::denoiser::{predict_windowed, Denoiser};
use crate::error::{Error, Result};
use crate::objective::DeletionDistribution;
use crate::schedule::{sample_insertion_count, InsertionDistribution, RateSchedule};
use crate::seqcore::Sequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShrinkMode {
    Sample,
    Greedy,
}

impl std::str::FromStr for ShrinkMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(ShrinkMode::Sample),
            "greedy" => Ok(ShrinkMode::Greedy),
            other => Err(Error::Config(format!("unknown shrink mode {other:?}"))),
        }
    }
}

fn predict(
    model: &dyn Denoiser,
    x: &Sequence,
    m: u64,
    window: Option<usize>,
    rng: &mut impl Rng,
) -> Result<DeletionDistribution> {
    match window {
        Some(w) => predict_windowed(model, x, m, w, rng),
        None => model.predict(x, m),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub sequence: Sequence,
    /// Insertions in the starting random sequence.
    pub initial_m: u64,
    pub model_calls: u64,
}

/// Samples `M ~ NB(L+1, α(1))`, starts from `L + M` i.i.d. `π` letters and
/// deletes back down to `L`. Before each net deletion, `correctors` rounds of
/// delete-then-insert (uniform position, `π` letter) keep the length fixed.
pub fn generate<R: Rng>(
    len: usize,
    model: &dyn Denoiser,
    sched: &RateSchedule,
    pi: &InsertionDistribution,
    correctors: usize,
    window: Option<usize>,
    rng: &mut R,
) -> Result<Generated> {
    if len == 0 {
        return Err(Error::Domain("target length must be >= 1".into()));
    }
    let mut m = sample_insertion_count(len as u64 + 1, sched.alpha(1.0)?, rng)?;
    let initial_m = m;
    let letters = pi.sampler();
    let mut x: Vec<u8> = (0..len as u64 + m).map(|_| letters.sample(rng)).collect();
    let mut calls = 0u64;
    while x.len() > len {
        for _ in 0..correctors {
            let q = predict(model, &Sequence::from_letters(x.clone()), m, window, rng)?;
            calls += 1;
            x.remove(q.sample(rng));
            let pos = rng.random_range(0..=x.len());
            x.insert(pos, letters.sample(rng));
        }
        let q = predict(model, &Sequence::from_letters(x.clone()), m, window, rng)?;
        calls += 1;
        x.remove(q.sample(rng));
        m -= 1;
    }
    Ok(Generated {
        sequence: Sequence::from_letters(x),
        initial_m,
        model_calls: calls,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkStep {
    /// Position in the sequence as it was before this deletion.
    pub position: usize,
    pub letter: u8,
    pub log_prob: f64,
}

/// Audit record of a shrink run.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkTrace {
    pub initial: Sequence,
    pub steps: Vec<ShrinkStep>,
    pub result: Sequence,
}

impl ShrinkTrace {
    /// Re-applies the recorded deletions to `initial`.
    pub fn replay(&self) -> Result<Sequence> {
        let mut x = self.initial.letters().to_vec();
        for s in &self.steps {
            if s.position >= x.len() || x[s.position] != s.letter {
                return Err(Error::Domain(format!(
                    "trace step deletes {} at {} which does not match",
                    s.letter, s.position
                )));
            }
            x.remove(s.position);
        }
        Ok(Sequence::from_letters(x))
    }
}

/// Deletes `m` letters one at a time, conditioning the model on the remaining
/// budget `m, m−1, …, 1`. The result is always a subsequence of `x`.
///
/// Greedy mode takes the most likely position (lowest index on ties) and
/// always scores the whole sequence, so it never consumes randomness.
pub fn shrink<R: Rng>(
    x: &Sequence,
    m: usize,
    model: &dyn Denoiser,
    mode: ShrinkMode,
    window: Option<usize>,
    rng: &mut R,
) -> Result<(Sequence, ShrinkTrace)> {
    if m == 0 || m >= x.len() {
        return Err(Error::Domain(format!(
            "deletion count {m} must satisfy 1 <= m < |x| = {}",
            x.len()
        )));
    }
    let mut cur = x.letters().to_vec();
    let mut steps = Vec::with_capacity(m);
    for remaining in (1..=m as u64).rev() {
        let seq = Sequence::from_letters(cur.clone());
        let (q, pos) = match mode {
            ShrinkMode::Greedy => {
                let q = model.predict(&seq, remaining)?;
                let pos = q.argmax();
                (q, pos)
            }
            ShrinkMode::Sample => {
                let q = predict(model, &seq, remaining, window, rng)?;
                let pos = q.sample(rng);
                (q, pos)
            }
        };
        steps.push(ShrinkStep {
            position: pos,
            letter: cur[pos],
            log_prob: q.log_probs()[pos],
        });
        cur.remove(pos);
    }
    let result = Sequence::from_letters(cur);
    let trace = ShrinkTrace {
        initial: x.clone(),
        steps,
        result: result.clone(),
    };
    Ok((result, trace))
}

/// `k` distinct positions drawn without replacement from one prediction
/// `q(· | x, m_remaining)`.
pub fn k_gillespie_deletions<R: Rng>(
    x: &Sequence,
    m_remaining: u64,
    model: &dyn Denoiser,
    k: usize,
    window: Option<usize>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let limit = (m_remaining as usize).min(x.len().saturating_sub(1));
    if k == 0 || k > limit {
        return Err(Error::Domain(format!(
            "k = {k} must lie in 1..={limit} (remaining budget {m_remaining}, length {})",
            x.len()
        )));
    }
    let q = predict(model, x, m_remaining, window, rng)?;
    Ok(sample_without_replacement(&q.probs(), k, rng))
}

fn sample_without_replacement<R: Rng + ?Sized>(probs: &[f64], k: usize, rng: &mut R) -> Vec<usize> {
    let mut weights = probs.to_vec();
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = weights.iter().sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut choice = None;
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if w > 0.0 && u < acc {
                choice = Some(i);
                break;
            }
        }
        // Rounding fallthrough, or all remaining weight is zero: take the last open slot.
        let i = choice
            .or_else(|| weights.iter().rposition(|&w| w > 0.0))
            .unwrap_or_else(|| (0..weights.len()).rev().find(|i| !picked.contains(i)).unwrap());
        picked.push(i);
        weights[i] = 0.0;
    }
    picked
}

/// Shrink by `m` deletions taking up to `k` per model call.
pub fn shrink_k_gillespie<R: Rng>(
    x: &Sequence,
    m: usize,
    model: &dyn Denoiser,
    k: usize,
    window: Option<usize>,
    rng: &mut R,
) -> Result<(Sequence, u64)> {
    if m == 0 || m >= x.len() {
        return Err(Error::Domain(format!(
            "deletion count {m} must satisfy 1 <= m < |x| = {}",
            x.len()
        )));
    }
    if k == 0 {
        return Err(Error::Domain("k must be >= 1".into()));
    }
    let mut cur = x.clone();
    let mut remaining = m;
    let mut calls = 0;
    while remaining > 0 {
        let step = k.min(remaining);
        let mut positions = k_gillespie_deletions(&cur, remaining as u64, model, step, window, rng)?;
        calls += 1;
        positions.sort_unstable_by(|a, b| b.cmp(a));
        let mut letters = cur.into_letters();
        for p in positions {
            letters.remove(p);
        }
        cur = Sequence::from_letters(letters);
        remaining -= step;
    }
    Ok((cur, calls))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::UniformDenoiser;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_letter_generation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pi = InsertionDistribution::uniform(1);
        for correctors in [0usize, 2] {
            let g = generate(4, &UniformDenoiser, &RateSchedule::default(), &pi, correctors, None, &mut rng)
                .unwrap();
            assert_eq!(g.sequence.letters(), &[0, 0, 0, 0]);
            assert_eq!(g.model_calls, g.initial_m * (correctors as u64 + 1));
        }
    }

    #[test]
    fn generated_length_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pi = InsertionDistribution::uniform(3);
        for len in [1usize, 5, 12] {
            let g = generate(len, &UniformDenoiser, &RateSchedule::default(), &pi, 1, Some(16), &mut rng)
                .unwrap();
            assert_eq!(g.sequence.len(), len);
        }
        assert!(generate(0, &UniformDenoiser, &RateSchedule::default(), &pi, 0, None, &mut rng).is_err());
    }

    #[test]
    fn shrink_is_subsequence_and_replays() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Sequence::from_letters(vec![0, 1, 2, 0, 1, 2, 0, 1]);
        for mode in [ShrinkMode::Sample, ShrinkMode::Greedy] {
            let (y, trace) = shrink(&x, 3, &UniformDenoiser, mode, Some(4), &mut rng).unwrap();
            assert_eq!(y.len(), 5);
            assert!(y.is_subsequence_of(&x));
            assert_eq!(trace.replay().unwrap(), y);
            assert_eq!(trace.result, y);
        }
        assert!(shrink(&x, 8, &UniformDenoiser, ShrinkMode::Sample, None, &mut rng).is_err());
        assert!(shrink(&x, 0, &UniformDenoiser, ShrinkMode::Sample, None, &mut rng).is_err());
    }

    #[test]
    fn greedy_ties_break_low() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Sequence::from_letters(vec![0, 1, 2, 0]);
        let (y, trace) = shrink(&x, 2, &UniformDenoiser, ShrinkMode::Greedy, None, &mut rng).unwrap();
        assert_eq!(y.letters(), &[2, 0]);
        assert!(trace.steps.iter().all(|s| s.position == 0));
    }

    #[test]
    fn k_gillespie_positions_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Sequence::from_letters(vec![0; 10]);
        for _ in 0..200 {
            let mut p = k_gillespie_deletions(&x, 9, &UniformDenoiser, 9, None, &mut rng).unwrap();
            p.sort_unstable();
            p.dedup();
            assert_eq!(p.len(), 9);
        }
        assert!(k_gillespie_deletions(&x, 3, &UniformDenoiser, 4, None, &mut rng).is_err());
        assert!(k_gillespie_deletions(&x, 3, &UniformDenoiser, 0, None, &mut rng).is_err());
        let (y, calls) = shrink_k_gillespie(&x, 7, &UniformDenoiser, 3, None, &mut rng).unwrap();
        assert_eq!(y.len(), 3);
        assert_eq!(calls, 3);
    }

    #[test]
    fn without_replacement_respects_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p = sample_without_replacement(&[0.0, 0.5, 0.0, 0.5], 2, &mut rng);
            let mut s = p.clone();
            s.sort_unstable();
            assert_eq!(s, vec![1, 3]);
        }
    }
}
