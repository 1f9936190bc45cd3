//! Noise schedule: insertion rate β(t), survival α(t), the ELBO loss weight,
//! the insertion letter distribution π and the negative-binomial count sampler.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqcore::Corpus;

pub const DEFAULT_GAMMA: f64 = 1.1;
pub const DEFAULT_T_MAX: f64 = 0.9;
/// Additive smoothing applied to corpus letter counts.
pub const PI_SMOOTHING: f64 = 1e-6;

/// `β(t) = γ / (1 − t_max·t)`, so `α(t) = (1 − t_max·t)^(γ/t_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSchedule {
    pub gamma: f64,
    pub t_max: f64,
}

impl Default for RateSchedule {
    fn default() -> Self {
        RateSchedule {
            gamma: DEFAULT_GAMMA,
            t_max: DEFAULT_T_MAX,
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, 1]")));
    }
    Ok(())
}

impl RateSchedule {
    pub fn new(gamma: f64, t_max: f64) -> Result<Self> {
        let s = RateSchedule { gamma, t_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.t_max > 0.0 && self.t_max < 1.0) {
            return Err(Error::Domain(format!(
                "t_max must lie in (0, 1), got {}",
                self.t_max
            )));
        }
        Ok(())
    }

    pub fn beta(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.gamma / (1.0 - self.t_max * t))
    }

    pub fn alpha(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.alpha_unchecked(t))
    }

    pub(crate) fn alpha_unchecked(&self, t: f64) -> f64 {
        (1.0 - self.t_max * t).powf(self.gamma / self.t_max)
    }

    /// Integrated rate `∫₀ᵗ β = −ln α(t)`.
    pub fn integrated_rate(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(-(self.gamma / self.t_max) * (-self.t_max * t).ln_1p())
    }

    /// Inverse of [`RateSchedule::integrated_rate`]; maps elapsed unit-rate
    /// time back to schedule time.
    pub fn time_at_integrated_rate(&self, tau: f64) -> f64 {
        -(-tau * self.t_max / self.gamma).exp_m1() / self.t_max
    }

    /// `m·β(t)/(1−α(t))`, exactly zero when `m = 0`.
    pub fn loss_weight(&self, m: u64, t: f64) -> Result<f64> {
        check_time(t)?;
        if m == 0 {
            return Ok(0.0);
        }
        if t == 0.0 {
            return Err(Error::SingularWeight);
        }
        let one_minus_alpha = -((self.gamma / self.t_max) * (-self.t_max * t).ln_1p()).exp_m1();
        Ok(m as f64 * self.gamma / (1.0 - self.t_max * t) / one_minus_alpha)
    }
}

/// Categorical distribution over inserted letters; entries strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct InsertionDistribution {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

impl InsertionDistribution {
    /// Normalizes `weights`; every entry must be positive and finite.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain("insertion distribution is empty".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Domain(
                "insertion probabilities must be strictly positive".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Ok(InsertionDistribution { probs, log_probs })
    }

    pub fn uniform(k: usize) -> Self {
        InsertionDistribution::new(vec![1.0; k.max(1)]).expect("uniform weights are valid")
    }

    /// Smoothed empirical letter frequencies.
    pub fn from_corpus(corpus: &Corpus) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Domain("cannot estimate pi from an empty corpus".into()));
        }
        let k = corpus.alphabet.size();
        let mut counts = vec![0u64; k];
        for seq in &corpus.sequences {
            for &l in seq.letters() {
                counts[l as usize] += 1;
            }
        }
        let total: u64 = counts.iter().sum();
        let weights = counts
            .iter()
            .map(|&c| {
                let freq = if total == 0 { 0.0 } else { c as f64 / total as f64 };
                freq + PI_SMOOTHING
            })
            .collect();
        InsertionDistribution::new(weights)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_prob(&self, letter: u8) -> f64 {
        self.log_probs[letter as usize]
    }

    pub fn sampler(&self) -> LetterSampler {
        LetterSampler(WeightedIndex::new(&self.probs).expect("validated probabilities"))
    }
}

impl TryFrom<Vec<f64>> for InsertionDistribution {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        InsertionDistribution::new(value)
    }
}

impl From<InsertionDistribution> for Vec<f64> {
    fn from(value: InsertionDistribution) -> Self {
        value.probs
    }
}

/// Draws i.i.d. letters from an [`InsertionDistribution`].
#[derive(Debug, Clone)]
pub struct LetterSampler(WeightedIndex<f64>);

impl LetterSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        self.0.sample(rng) as u8
    }
}

/// Number of failures before the first success, by inversion.
pub fn sample_geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<u64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("success probability {p} outside (0, 1]")));
    }
    if p == 1.0 {
        return Ok(0);
    }
    // 1 - U lies in (0, 1], so the log is finite.
    let u: f64 = 1.0 - rng.random::<f64>();
    let g = (u.ln() / (-p).ln_1p()).floor();
    Ok(if g >= u64::MAX as f64 { u64::MAX } else { g as u64 })
}

/// Failures before `r` successes with success probability `p`, as a sum of
/// `r` geometric draws.
pub fn sample_insertion_count<R: Rng + ?Sized>(r: u64, p: f64, rng: &mut R) -> Result<u64> {
    if r == 0 {
        return Err(Error::Domain("negative binomial needs r >= 1".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("success probability {p} outside (0, 1]")));
    }
    if p == 1.0 {
        return Ok(0);
    }
    let mut total = 0u64;
    for _ in 0..r {
        total = total.saturating_add(sample_geometric(p, rng)?);
    }
    Ok(total)
}

/// Draws `M ~ NB(r, p)` conditioned on `M ≥ 1` and returns it with
/// `P(M ≥ 1)`. Rejection when that probability is at least one half, a
/// direct walk up the pmf otherwise, so the cost stays bounded as `p → 1`.
pub fn sample_positive_insertion_count<R: Rng + ?Sized>(
    r: u64,
    p: f64,
    rng: &mut R,
) -> Result<(u64, f64)> {
    if r == 0 {
        return Err(Error::Domain("negative binomial needs r >= 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "success probability {p} outside (0, 1); M >= 1 needs p < 1"
        )));
    }
    let ln_p0 = r as f64 * p.ln();
    let positive = -ln_p0.exp_m1();
    if positive >= 0.5 {
        loop {
            let m = sample_insertion_count(r, p, rng)?;
            if m > 0 {
                return Ok((m, positive));
            }
        }
    }
    let u = rng.random::<f64>() * positive;
    let mut pmf = ln_p0.exp();
    let mut acc = 0.0;
    let mut k = 0u64;
    loop {
        pmf *= (r + k) as f64 / (k + 1) as f64 * (1.0 - p);
        k += 1;
        acc += pmf;
        if u < acc || pmf == 0.0 {
            return Ok((k, positive));
        }
    }
}
