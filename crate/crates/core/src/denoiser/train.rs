//! Rao-Blackwellized training: every noised sample is scored against the
//! exact alignment target over all insertion paths, weighted by `w(M_t, t)`.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::context::ContextModel;
use super::sample_window_start;
use crate::error::{Error, Result};
use crate::forward::{sample_xt, sample_xt_nonempty, NoisedSample};
use crate::objective::target_distribution;
use crate::schedule::{InsertionDistribution, RateSchedule};
use crate::seqcore::Corpus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub sub_batch_size: usize,
    pub learning_rate: f64,
    /// Cosine-annealed learning rate ends at this fraction of `learning_rate`;
    /// 1.0 keeps it constant.
    pub final_lr_fraction: f64,
    /// Window size W: longest noised sequence passed to the model whole.
    pub window: usize,
    /// Steps between checkpoints; 0 disables intermediate checkpoints.
    pub checkpoint_interval: usize,
    /// Draw `M_t` conditioned on `M_t ≥ 1` and scale the weight by
    /// `P(M_t ≥ 1)`. Same expected loss; without it the weight grows like
    /// `1/t` near 0 and the gradient estimate has unbounded variance.
    pub condition_on_insertion: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            batch_size: 64,
            sub_batch_size: 16,
            learning_rate: 1e-3,
            final_lr_fraction: 1.0,
            window: 64,
            checkpoint_interval: 0,
            condition_on_insertion: true,
        }
    }
}

impl TrainConfig {
    /// Learning rate used at `step` (1-based).
    pub fn learning_rate_at(&self, step: usize) -> f64 {
        let progress = (step.saturating_sub(1)) as f64 / (self.steps.max(2) - 1) as f64;
        let cos = 0.5 * (1.0 + (std::f64::consts::PI * progress.min(1.0)).cos());
        self.learning_rate * (self.final_lr_fraction + (1.0 - self.final_lr_fraction) * cos)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0
            || self.batch_size == 0
            || self.sub_batch_size == 0
            || self.window == 0
            || !(self.learning_rate > 0.0 && self.learning_rate.is_finite())
            || !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0)
        {
            return Err(Error::Config(format!(
                "train config values must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// One training example: a noised sample with its loss weight and, for long
/// sequences, the window the model sees.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub sample: NoisedSample,
    pub weight: f64,
    pub window: Option<(usize, usize)>,
}

impl BatchItem {
    pub fn new(sample: NoisedSample, weight: f64) -> Self {
        BatchItem {
            sample,
            weight,
            window: None,
        }
    }
}

fn item_loss_and_gradient(model: &ContextModel, item: &BatchItem) -> Result<(f64, Vec<f64>)> {
    let target = target_distribution(&item.sample.x0, &item.sample.x_t)?;
    let g = model.loss_and_gradient(
        item.sample.x_t.letters(),
        item.sample.m_t,
        &target.probs(),
        item.weight,
        item.window,
    )?;
    Ok((g.loss, g.grad))
}

/// Mean weighted cross-entropy over `items` and its gradient. Items are
/// processed in the given order, so the reduction is deterministic.
pub fn loss_on_batch(model: &ContextModel, items: &[BatchItem]) -> Result<(f64, Vec<f64>)> {
    if items.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    let mut grad = vec![0.0; model.params().len()];
    let mut loss = 0.0;
    for item in items {
        if item.sample.m_t == 0 {
            return Err(Error::NothingToDenoise);
        }
        let (l, g) = item_loss_and_gradient(model, item)?;
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    let scale = 1.0 / items.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}

/// Largest relative error between the analytic gradient and central
/// differences (step `1e-5`) over `n_coords` random parameter coordinates.
pub fn gradient_check<R: Rng + ?Sized>(
    model: &ContextModel,
    item: &BatchItem,
    n_coords: usize,
    rng: &mut R,
) -> Result<f64> {
    const EPS: f64 = 1e-5;
    let (_, grad) = item_loss_and_gradient(model, item)?;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..n_coords {
        let c = rng.random_range(0..grad.len());
        let orig = probe.params()[c];
        probe.params_mut()[c] = orig + EPS;
        let (up, _) = item_loss_and_gradient(&probe, item)?;
        probe.params_mut()[c] = orig - EPS;
        let (down, _) = item_loss_and_gradient(&probe, item)?;
        probe.params_mut()[c] = orig;
        let numeric = (up - down) / (2.0 * EPS);
        let denom = grad[c].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((grad[c] - numeric).abs() / denom);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTraceRow {
    pub step: usize,
    pub loss: f64,
    pub wallclock_secs: f64,
}

pub struct TrainOutcome {
    pub model: ContextModel,
    pub trace: Vec<LossTraceRow>,
}

/// Adam with the usual defaults (β₁ = 0.9, β₂ = 0.999, ε = 1e−8).
struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + Self::EPS);
        }
    }
}

/// Draws one batch: `t ~ U(0,1]`, `X_t` by the closed-form sampler, `M_t = 0`
/// draws dropped (or never drawn, see [`TrainConfig::condition_on_insertion`]).
/// Items are sorted by `|X_t|`.
fn draw_batch<R: Rng + ?Sized>(
    corpus: &Corpus,
    sched: &RateSchedule,
    pi: &InsertionDistribution,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<BatchItem>> {
    let mut items = Vec::with_capacity(config.batch_size);
    for _ in 0..config.batch_size {
        let x0 = &corpus.sequences[rng.random_range(0..corpus.len())];
        let t = 1.0 - rng.random::<f64>();
        let (sample, scale) = if config.condition_on_insertion {
            sample_xt_nonempty(x0, t, sched, pi, rng)?
        } else {
            (sample_xt(x0, t, sched, pi, rng)?, 1.0)
        };
        if sample.m_t == 0 {
            continue;
        }
        let weight = scale * sched.loss_weight(sample.m_t, t)?;
        let n = sample.x_t.len();
        let window = if n > config.window {
            Some((sample_window_start(n, config.window, rng), config.window))
        } else {
            None
        };
        items.push(BatchItem {
            sample,
            weight,
            window,
        });
    }
    items.sort_by_key(|it| it.sample.x_t.len());
    Ok(items)
}

/// Trains `model` in place of a fresh copy and returns it with the loss trace.
/// `on_checkpoint` is called every `checkpoint_interval` steps and at the end.
pub fn train<R: Rng + ?Sized>(
    corpus: &Corpus,
    sched: &RateSchedule,
    pi: &InsertionDistribution,
    config: &TrainConfig,
    model: ContextModel,
    rng: &mut R,
    mut on_checkpoint: Option<&mut dyn FnMut(usize, &ContextModel) -> Result<()>>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Domain("training corpus is empty".into()));
    }
    if corpus.sequences.iter().any(|s| s.is_empty()) {
        return Err(Error::Domain("training corpus contains an empty sequence".into()));
    }
    if pi.len() != model.shape().k || corpus.alphabet.size() != model.shape().k {
        return Err(Error::Shape("alphabet size mismatch between corpus, pi and model".into()));
    }
    let mut model = model;
    let mut adam = Adam::new(model.params().len(), config.learning_rate);
    let mut trace = Vec::with_capacity(config.steps);
    let started = Instant::now();
    for step in 1..=config.steps {
        let items = draw_batch(corpus, sched, pi, config, rng)?;
        if items.is_empty() {
            trace.push(LossTraceRow {
                step,
                loss: 0.0,
                wallclock_secs: started.elapsed().as_secs_f64(),
            });
            continue;
        }
        let mut grad = vec![0.0; model.params().len()];
        let mut loss = 0.0;
        for chunk in items.chunks(config.sub_batch_size) {
            let (l, g) = loss_on_batch(&model, chunk)?;
            let w = chunk.len() as f64 / items.len() as f64;
            loss += w * l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += w * b;
            }
        }
        adam.lr = config.learning_rate_at(step);
        adam.step(model.params_mut(), &grad);
        trace.push(LossTraceRow {
            step,
            loss,
            wallclock_secs: started.elapsed().as_secs_f64(),
        });
        if let Some(cb) = on_checkpoint.as_deref_mut() {
            if (config.checkpoint_interval > 0 && step % config.checkpoint_interval == 0)
                || step == config.steps
            {
                cb(step, &model)?;
            }
        }
    }
    Ok(TrainOutcome { model, trace })
}
