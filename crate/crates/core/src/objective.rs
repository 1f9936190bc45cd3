//! Training target, ELBO terms and perplexity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::align::{all_deletion_counts, count_alignments, LogCount};
use crate::denoiser::{predict_windowed, Denoiser};
use crate::error::{Error, Result};
use crate::forward::{sample_xt, sample_xt_given_m, NoisedSample};
use crate::numerics::{ln_binomial, log_softmax, log_sum_exp};
use crate::schedule::{sample_insertion_count, InsertionDistribution, RateSchedule};
use crate::seqcore::{Corpus, Sequence};
use crate::stats::mean_and_stderr;

/// Tolerance on `logsumexp(log_probs) = 0`.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Normalized distribution over the positions of a sequence: which letter to delete.
#[derive(Debug, Clone, PartialEq)]
pub struct DeletionDistribution {
    log_probs: Vec<f64>,
}

impl DeletionDistribution {
    pub fn from_log_probs(log_probs: Vec<f64>) -> Result<Self> {
        if log_probs.is_empty() {
            return Err(Error::Shape("deletion distribution over zero positions".into()));
        }
        if log_probs.iter().any(|v| v.is_nan() || *v > 1e-12) {
            return Err(Error::Domain("log-probabilities must be <= 0".into()));
        }
        let z = log_sum_exp(&log_probs);
        if z.abs() > NORMALIZATION_TOL {
            return Err(Error::Domain(format!("log-probabilities sum to exp({z})")));
        }
        Ok(DeletionDistribution { log_probs })
    }

    /// Softmax of raw scores.
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Shape("deletion distribution over zero positions".into()));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Domain("non-finite denoiser score".into()));
        }
        Ok(DeletionDistribution {
            log_probs: log_softmax(scores),
        })
    }

    pub fn uniform(n: usize) -> Self {
        DeletionDistribution {
            log_probs: vec![-(n as f64).ln(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|v| v.exp()).collect()
    }

    /// Most likely position; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.log_probs.iter().enumerate() {
            if v > self.log_probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &v) in self.log_probs.iter().enumerate() {
            acc += v.exp();
            if u < acc {
                return i;
            }
        }
        // Rounding left a sliver of mass past the end; give it to the last supported position.
        self.log_probs
            .iter()
            .rposition(|v| *v > f64::NEG_INFINITY)
            .unwrap_or(self.log_probs.len() - 1)
    }
}

/// Distribution over which position of `xt` was inserted last, given `x0`:
/// `p(delete l) = ali(x0, xt⁽⁻ˡ⁾) / (M · ali(x0, xt))`.
pub fn target_distribution(x0: &Sequence, xt: &Sequence) -> Result<DeletionDistribution> {
    if xt.len() <= x0.len() {
        return Err(Error::Domain(format!(
            "target needs at least one insertion, |x0| = {}, |xt| = {}",
            x0.len(),
            xt.len()
        )));
    }
    let m = (xt.len() - x0.len()) as f64;
    let counts = all_deletion_counts::<LogCount>(x0.letters(), xt.letters());
    if counts.full.is_zero() {
        return Err(Error::NoAlignment);
    }
    let norm = m.ln() + counts.full.ln();
    let log_probs = counts
        .per_position
        .iter()
        .map(|c| if c.is_zero() { f64::NEG_INFINITY } else { (c.ln() - norm).min(0.0) })
        .collect();
    Ok(DeletionDistribution { log_probs })
}

/// `KL(p‖q)` with the `0·log 0 = 0` convention; `+inf` if `q` misses support of `p`.
pub fn kl_divergence(p: &DeletionDistribution, q: &DeletionDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!(
            "distributions over {} and {} positions",
            p.len(),
            q.len()
        )));
    }
    let kl = p
        .log_probs
        .iter()
        .zip(&q.log_probs)
        .filter(|(lp, _)| **lp > f64::NEG_INFINITY)
        .map(|(lp, lq)| lp.exp() * (lp - lq))
        .sum::<f64>();
    Ok(kl.max(0.0))
}

/// `−Σ p log q`.
pub fn cross_entropy(p: &DeletionDistribution, q: &DeletionDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!(
            "distributions over {} and {} positions",
            p.len(),
            q.len()
        )));
    }
    Ok(-p
        .log_probs
        .iter()
        .zip(&q.log_probs)
        .filter(|(lp, _)| **lp > f64::NEG_INFINITY)
        .map(|(lp, lq)| lp.exp() * lq)
        .sum::<f64>())
}

pub fn entropy(p: &DeletionDistribution) -> f64 {
    -p.log_probs
        .iter()
        .filter(|lp| **lp > f64::NEG_INFINITY)
        .map(|lp| lp.exp() * lp)
        .sum::<f64>()
}

/// KL between the alignment target and a model prediction for one noised sample.
pub fn denoising_kl_against(sample: &NoisedSample, prediction: &DeletionDistribution) -> Result<f64> {
    if sample.m_t == 0 {
        return Err(Error::NothingToDenoise);
    }
    if prediction.len() != sample.x_t.len() {
        return Err(Error::Shape(format!(
            "model returned {} positions for a sequence of length {}",
            prediction.len(),
            sample.x_t.len()
        )));
    }
    let target = target_distribution(&sample.x0, &sample.x_t)?;
    kl_divergence(&target, prediction)
}

pub fn denoising_kl(sample: &NoisedSample, model: &dyn Denoiser) -> Result<f64> {
    let prediction = model.predict(&sample.x_t, sample.m_t)?;
    denoising_kl_against(sample, &prediction)
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

/// One draw of `log p(X₁|x0,m1) − log q(X₁)` at `X₁ ~ p(·|x0, m1)`:
/// `log ali(x0, X₁) − log C(m1+L, L) − Σ log π(x0⁽ⁱ⁾)`.
pub fn prior_log_ratio(
    x0: &Sequence,
    x1: &Sequence,
    pi: &InsertionDistribution,
) -> f64 {
    let ali = count_alignments(x0.letters(), x1.letters());
    let clean: f64 = x0.letters().iter().map(|&b| pi.log_prob(b)).sum();
    ali.ln() - ln_binomial(x1.len() as u64, x0.len() as u64) - clean
}

/// `KL(p(X₁|x0, m1) ‖ q(X₁|L+m1))` estimated from `n_samples` draws of `X₁`,
/// where `q` samples every letter i.i.d. from `π`.
pub fn prior_kl_estimate<R: Rng + ?Sized>(
    x0: &Sequence,
    m1: u64,
    pi: &InsertionDistribution,
    n_samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if n_samples == 0 {
        return Err(Error::Domain("n_samples must be >= 1".into()));
    }
    let draws: Vec<f64> = (0..n_samples)
        .map(|_| prior_log_ratio(x0, &sample_xt_given_m(x0, m1, pi, rng).x_t, pi))
        .collect();
    let (mean, std_error) = mean_and_stderr(&draws);
    Ok(Estimate {
        mean,
        std_error,
        n: n_samples,
    })
}

/// Bound on `−log q(x0 | L)` split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboReport {
    pub prior_kl: f64,
    pub denoising_term: f64,
    pub nll_per_token: f64,
    pub perplexity: f64,
    pub n_samples: usize,
}

impl ElboReport {
    fn from_terms(prior_kl: f64, denoising_term: f64, tokens: f64, n_samples: usize) -> Self {
        let nll_per_token = (prior_kl + denoising_term) / tokens;
        ElboReport {
            prior_kl,
            denoising_term,
            nll_per_token,
            perplexity: nll_per_token.exp(),
            n_samples,
        }
    }
}

/// Raw ELBO terms for one sequence, not yet divided by length.
fn elbo_terms<R: Rng + ?Sized>(
    x0: &Sequence,
    model: &dyn Denoiser,
    sched: &RateSchedule,
    pi: &InsertionDistribution,
    n_samples: usize,
    window: Option<usize>,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n_samples == 0 {
        return Err(Error::Domain("n_samples must be >= 1".into()));
    }
    if x0.is_empty() {
        return Err(Error::Domain("cannot evaluate an empty sequence".into()));
    }
    let r = x0.len() as u64 + 1;
    let alpha1 = sched.alpha(1.0)?;
    let mut prior = 0.0;
    for _ in 0..n_samples {
        let m1 = sample_insertion_count(r, alpha1, rng)?;
        let x1 = sample_xt_given_m(x0, m1, pi, rng).x_t;
        prior += prior_log_ratio(x0, &x1, pi);
    }
    let mut denoise = 0.0;
    for _ in 0..n_samples {
        // t ∈ (0, 1]; draws with M_t = 0 carry zero weight and are skipped.
        let t = 1.0 - rng.random::<f64>();
        let sample = sample_xt(x0, t, sched, pi, rng)?;
        if sample.m_t == 0 {
            continue;
        }
        let weight = sched.loss_weight(sample.m_t, t)?;
        let prediction = match window {
            Some(w) => predict_windowed(model, &sample.x_t, sample.m_t, w, rng)?,
            None => model.predict(&sample.x_t, sample.m_t)?,
        };
        denoise += weight * denoising_kl_against(&sample, &prediction)?;
    }
    Ok((prior / n_samples as f64, denoise / n_samples as f64))
}

/// ELBO of one sequence with `n_samples` draws for each term. `window`
/// routes long noised sequences through [`predict_windowed`].
pub fn elbo<R: Rng + ?Sized>(
    x0: &Sequence,
    model: &dyn Denoiser,
    sched: &RateSchedule,
    pi: &InsertionDistribution,
    n_samples: usize,
    window: Option<usize>,
    rng: &mut R,
) -> Result<ElboReport> {
    let (prior, denoise) = elbo_terms(x0, model, sched, pi, n_samples, window, rng)?;
    Ok(ElboReport::from_terms(prior, denoise, x0.len() as f64, n_samples))
}

/// Corpus-level bound: terms summed over sequences, divided by the total letter count.
pub fn corpus_elbo<R: Rng + ?Sized>(
    corpus: &Corpus,
    model: &dyn Denoiser,
    sched: &RateSchedule,
    pi: &InsertionDistribution,
    n_samples: usize,
    window: Option<usize>,
    rng: &mut R,
) -> Result<ElboReport> {
    if corpus.is_empty() {
        return Err(Error::Domain("empty evaluation corpus".into()));
    }
    let mut prior = 0.0;
    let mut denoise = 0.0;
    for x0 in &corpus.sequences {
        let (p, d) = elbo_terms(x0, model, sched, pi, n_samples, window, rng)?;
        prior += p;
        denoise += d;
    }
    Ok(ElboReport::from_terms(
        prior,
        denoise,
        corpus.total_letters() as f64,
        n_samples,
    ))
}

/// Embeds a prediction made on `window_len` positions starting at
/// `window_start` into a sequence of `full_len`: in-window mass is scaled by
/// `window_len / full_len`, every outside position gets `1 / full_len`.
pub fn windowed_distribution(
    raw: &DeletionDistribution,
    window_start: usize,
    window_len: usize,
    full_len: usize,
) -> Result<DeletionDistribution> {
    if raw.len() != window_len {
        return Err(Error::Shape(format!(
            "window prediction has {} positions, window length is {window_len}",
            raw.len()
        )));
    }
    if window_len == 0 || window_len > full_len || window_start + window_len > full_len {
        return Err(Error::Domain(format!(
            "window [{window_start}, {}) outside sequence of length {full_len}",
            window_start + window_len
        )));
    }
    let outside = -(full_len as f64).ln();
    let scale = (window_len as f64).ln() + outside;
    let mut log_probs = vec![outside; full_len];
    for (dst, &lp) in log_probs[window_start..window_start + window_len]
        .iter_mut()
        .zip(&raw.log_probs)
    {
        *dst = lp + scale;
    }
    Ok(DeletionDistribution { log_probs })
}
