//! Pure-birth insertion noising.
//!
//! Each of the `n + 1` gaps of a length-`n` sequence gains a `Cat(π)` letter
//! at rate `β(t)`. [`sample_xt`] draws `X_t` in closed form (negative-binomial
//! total, then every way of splitting it over the `L + 1` original gaps
//! equally likely);
//! [`simulate_pure_birth`] runs the process event by event and serves as the
//! reference it is tested against.

use rand::seq::index::sample;
use rand::Rng;

use crate::align::count_alignments;
use crate::error::{Error, Result};
use crate::numerics::ln_binomial;
use crate::schedule::{
    sample_insertion_count, sample_positive_insertion_count, InsertionDistribution, RateSchedule,
};
use crate::seqcore::Sequence;

/// A clean sequence together with a noised version of it.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisedSample {
    pub x0: Sequence,
    pub x_t: Sequence,
    /// Number of insertions, `|x_t| − |x0|`.
    pub m_t: u64,
    pub t: f64,
    /// Insertions in each of the `|x0| + 1` original gaps, when known.
    pub gap_sizes: Option<Vec<u64>>,
}

impl NoisedSample {
    /// Checks the length bookkeeping and, if present, that the gap sizes rebuild `x_t`.
    pub fn validate(&self) -> Result<()> {
        if self.x_t.len() < self.x0.len() || (self.x_t.len() - self.x0.len()) as u64 != self.m_t {
            return Err(Error::Shape(format!(
                "m_t = {} but |x_t| − |x0| = {} − {}",
                self.m_t,
                self.x_t.len(),
                self.x0.len()
            )));
        }
        if let Some(gaps) = &self.gap_sizes {
            if gaps.len() != self.x0.len() + 1 || gaps.iter().sum::<u64>() != self.m_t {
                return Err(Error::Shape("gap sizes inconsistent with m_t".into()));
            }
            let mut pos = 0usize;
            for (g, &size) in gaps.iter().enumerate() {
                pos += size as usize;
                if g < self.x0.len() {
                    if self.x_t.letters()[pos] != self.x0.letters()[g] {
                        return Err(Error::Shape("gap sizes do not interleave x0 into x_t".into()));
                    }
                    pos += 1;
                }
            }
        }
        Ok(())
    }
}

fn interleave(x0: &[u8], gap_sizes: &[u64], mut next_letter: impl FnMut() -> u8) -> Vec<u8> {
    let total: u64 = gap_sizes.iter().sum();
    let mut out = Vec::with_capacity(x0.len() + total as usize);
    for (g, &size) in gap_sizes.iter().enumerate() {
        for _ in 0..size {
            out.push(next_letter());
        }
        if let Some(&l) = x0.get(g) {
            out.push(l);
        }
    }
    out
}

/// Exactly `m` insertions over the `|x0| + 1` gaps, each of the
/// `C(L+m, L)` gap-size vectors equally likely (i.i.d. geometric gaps
/// conditioned on their sum). Drawn by choosing which `L` of the `L + m`
/// output slots keep the letters of `x0`.
pub fn sample_xt_given_m<R: Rng + ?Sized>(
    x0: &Sequence,
    m: u64,
    pi: &InsertionDistribution,
    rng: &mut R,
) -> NoisedSample {
    let l = x0.len();
    let mut kept = sample(rng, l + m as usize, l).into_vec();
    kept.sort_unstable();
    let mut gap_sizes = Vec::with_capacity(l + 1);
    let mut prev = 0;
    for &slot in &kept {
        gap_sizes.push((slot - prev) as u64);
        prev = slot + 1;
    }
    gap_sizes.push((l + m as usize - prev) as u64);
    let letters = pi.sampler();
    let x_t = interleave(x0.letters(), &gap_sizes, || letters.sample(rng));
    NoisedSample {
        x0: x0.clone(),
        x_t: Sequence::from_letters(x_t),
        m_t: m,
        t: f64::NAN,
        gap_sizes: Some(gap_sizes),
    }
}

/// Closed-form draw of `X_t`: `M_t ~ NB(L+1, α(t))`, then [`sample_xt_given_m`].
pub fn sample_xt<R: Rng + ?Sized>(
    x0: &Sequence,
    t: f64,
    sched: &RateSchedule,
    pi: &InsertionDistribution,
    rng: &mut R,
) -> Result<NoisedSample> {
    if x0.is_empty() {
        return Err(Error::Domain("x0 must be nonempty".into()));
    }
    let alpha = sched.alpha(t)?;
    let m = sample_insertion_count(x0.len() as u64 + 1, alpha, rng)?;
    let mut sample = sample_xt_given_m(x0, m, pi, rng);
    sample.t = t;
    Ok(sample)
}

/// [`sample_xt`] conditioned on `M_t ≥ 1`, with `P(M_t ≥ 1)` alongside.
pub fn sample_xt_nonempty<R: Rng + ?Sized>(
    x0: &Sequence,
    t: f64,
    sched: &RateSchedule,
    pi: &InsertionDistribution,
    rng: &mut R,
) -> Result<(NoisedSample, f64)> {
    if x0.is_empty() {
        return Err(Error::Domain("x0 must be nonempty".into()));
    }
    let alpha = sched.alpha(t)?;
    let (m, positive) = sample_positive_insertion_count(x0.len() as u64 + 1, alpha, rng)?;
    let mut sample = sample_xt_given_m(x0, m, pi, rng);
    sample.t = t;
    Ok((sample, positive))
}

/// One insertion of an explicit path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthEvent {
    pub time: f64,
    /// Index of the new letter in the sequence right after insertion.
    pub position: usize,
    pub letter: u8,
}

/// Event-level pure-birth path, tracking which original gap each insertion lands in.
struct BirthPath {
    letters: Vec<u8>,
    /// `true` for letters of the clean sequence.
    original: Vec<bool>,
    gap_sizes: Vec<u64>,
}

impl BirthPath {
    fn new(x0: &Sequence) -> Self {
        BirthPath {
            letters: x0.letters().to_vec(),
            original: vec![true; x0.len()],
            gap_sizes: vec![0; x0.len() + 1],
        }
    }

    /// Inserts at a uniformly chosen gap of the current sequence; returns its index.
    fn insert<R: Rng + ?Sized>(&mut self, letter: u8, rng: &mut R) -> usize {
        let pos = rng.random_range(0..=self.letters.len());
        let gap = self.original[..pos].iter().filter(|&&o| o).count();
        self.gap_sizes[gap] += 1;
        self.letters.insert(pos, letter);
        self.original.insert(pos, false);
        pos
    }
}

/// Runs the pure-birth process up to time `t` by time rescaling: in
/// `τ = ∫β` coordinates every gap fires at unit rate, so waiting times are
/// `Exp(n + 1)` for a length-`n` sequence.
pub fn simulate_pure_birth<R: Rng + ?Sized>(
    x0: &Sequence,
    t: f64,
    sched: &RateSchedule,
    pi: &InsertionDistribution,
    rng: &mut R,
) -> Result<(NoisedSample, Vec<BirthEvent>)> {
    if x0.is_empty() {
        return Err(Error::Domain("x0 must be nonempty".into()));
    }
    let tau_end = sched.integrated_rate(t)?;
    let letters = pi.sampler();
    let mut path = BirthPath::new(x0);
    let mut events = Vec::new();
    let mut tau = 0.0;
    loop {
        let rate = (path.letters.len() + 1) as f64;
        let u: f64 = 1.0 - rng.random::<f64>();
        tau += -u.ln() / rate;
        if tau > tau_end {
            break;
        }
        let letter = letters.sample(rng);
        let position = path.insert(letter, rng);
        events.push(BirthEvent {
            time: sched.time_at_integrated_rate(tau),
            position,
            letter,
        });
    }
    let m_t = events.len() as u64;
    Ok((
        NoisedSample {
            x0: x0.clone(),
            x_t: Sequence::from_letters(path.letters),
            m_t,
            t,
            gap_sizes: Some(path.gap_sizes),
        },
        events,
    ))
}

/// The jump chain of the process conditioned on exactly `m` insertions:
/// each step picks a uniform gap of the current sequence. Returns the final
/// sequence and, per step, `(position, letter)`.
pub fn insertion_path_given_m<R: Rng + ?Sized>(
    x0: &Sequence,
    m: u64,
    pi: &InsertionDistribution,
    rng: &mut R,
) -> (Sequence, Vec<(usize, u8)>) {
    let letters = pi.sampler();
    let mut path = BirthPath::new(x0);
    let steps = (0..m)
        .map(|_| {
            let letter = letters.sample(rng);
            (path.insert(letter, rng), letter)
        })
        .collect();
    (Sequence::from_letters(path.letters), steps)
}

/// `P(|Y_l| = n) = α(t)(1 − α(t))ⁿ`: size of one gap's insertion run.
pub fn gap_size_pmf(sched: &RateSchedule, t: f64, n: u64) -> Result<f64> {
    let a = sched.alpha(t)?;
    Ok(a * (1.0 - a).powf(n as f64))
}

/// `log p(xt | x0, M_t)`: `−log C(L+M, L) + log ali(x0, xt) + Σ log π(b)` over
/// the inserted letters (the multiset difference `xt − x0`).
pub fn forward_log_likelihood(
    x0: &Sequence,
    xt: &Sequence,
    m_t: u64,
    pi: &InsertionDistribution,
) -> Result<f64> {
    if xt.len() < x0.len() || (xt.len() - x0.len()) as u64 != m_t {
        return Err(Error::Shape(format!(
            "m_t = {m_t} does not match |xt| − |x0| = {} − {}",
            xt.len(),
            x0.len()
        )));
    }
    let k = pi.len();
    let mut diff: Vec<i64> = xt.letter_counts(k).iter().map(|&c| c as i64).collect();
    for (d, c) in diff.iter_mut().zip(x0.letter_counts(k)) {
        *d -= c as i64;
    }
    if diff.iter().any(|&d| d < 0) {
        return Ok(f64::NEG_INFINITY);
    }
    let ali = count_alignments(x0.letters(), xt.letters());
    if ali.is_zero() {
        return Ok(f64::NEG_INFINITY);
    }
    let inserted: f64 = diff
        .iter()
        .enumerate()
        .map(|(b, &d)| if d == 0 { 0.0 } else { d as f64 * pi.log_prob(b as u8) })
        .sum();
    Ok(ali.ln() - ln_binomial(xt.len() as u64, x0.len() as u64) + inserted)
}

pub fn forward_likelihood(
    x0: &Sequence,
    xt: &Sequence,
    m_t: u64,
    pi: &InsertionDistribution,
) -> Result<f64> {
    forward_log_likelihood(x0, xt, m_t, pi).map(f64::exp)
}
