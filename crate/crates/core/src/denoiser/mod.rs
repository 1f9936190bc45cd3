//! Denoisers: maps `(X, M)` to a distribution over which letter of `X` to delete.

mod checkpoint;
mod context;
mod train;

use rand::Rng;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use context::{ContextModel, ContextShape, SampleGradient};
pub use train::{
    gradient_check, loss_on_batch, train, BatchItem, LossTraceRow, TrainConfig, TrainOutcome,
};

use crate::error::{Error, Result};
use crate::objective::{windowed_distribution, DeletionDistribution};
use crate::seqcore::Sequence;

/// A reverse-process factor `q(prev(X) | X, M)`.
pub trait Denoiser {
    /// Unnormalized per-position scores for `x` with `m` insertions left to undo.
    fn scores(&self, x: &[u8], m: u64) -> Vec<f64>;

    fn predict(&self, x: &Sequence, m: u64) -> Result<DeletionDistribution> {
        if m == 0 {
            return Err(Error::NothingToDenoise);
        }
        if x.is_empty() {
            return Err(Error::Domain("cannot denoise an empty sequence".into()));
        }
        DeletionDistribution::from_scores(&self.scores(x.letters(), m))
    }
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn scores(&self, x: &[u8], m: u64) -> Vec<f64> {
        (**self).scores(x, m)
    }
}

/// Deletes uniformly at random.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformDenoiser;

impl Denoiser for UniformDenoiser {
    fn scores(&self, x: &[u8], _m: u64) -> Vec<f64> {
        vec![0.0; x.len()]
    }
}

/// Uniform window start for a sequence of length `len` and window `window`.
pub fn sample_window_start<R: Rng + ?Sized>(len: usize, window: usize, rng: &mut R) -> usize {
    if len <= window {
        0
    } else {
        rng.random_range(0..=len - window)
    }
}

/// Predicts on a uniformly drawn window of `window` letters when `x` is
/// longer than that, spreading the remaining mass uniformly outside it.
pub fn predict_windowed<R: Rng + ?Sized>(
    model: &dyn Denoiser,
    x: &Sequence,
    m: u64,
    window: usize,
    rng: &mut R,
) -> Result<DeletionDistribution> {
    if window == 0 {
        return Err(Error::Domain("window size must be positive".into()));
    }
    if x.len() <= window {
        return model.predict(x, m);
    }
    let start = sample_window_start(x.len(), window, rng);
    let view = Sequence::from_letters(x.letters()[start..start + window].to_vec());
    let raw = model.predict(&view, m)?;
    windowed_distribution(&raw, start, window, x.len())
}
