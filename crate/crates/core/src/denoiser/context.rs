//! Windowed feed-forward scorer conditioned on the number of remaining insertions.
//!
//! For position `i` the input is the concatenation of the letter embeddings
//! at offsets `-r..=r` (zero outside the sequence), an embedding of the
//! bucket of `M` (see [`ContextShape::bucket`]) and the scalar `1/M`. One
//! tanh hidden layer, then a linear read-out gives the score; scores are
//! softmaxed over positions.
//!
//! With `global > 0` a second tanh layer sees each position's hidden vector,
//! the mean hidden vector over the whole input and `M / (M + |x|)`, and adds
//! its own read-out to the score. A purely local scorer cannot tell whether a
//! defect elsewhere in the sequence already claims one of the `M` deletions.
//!
//! Small `M` get their own buckets: the right answer at `M = 1` and `M = 2`
//! can be very different (on an alternating sequence only the ends are
//! deletable at `M = 1`, while at `M = 2` any adjacent pair is).
//!
//! All parameters live in one flat vector so the optimizer, checkpoints and
//! finite-difference checks share a single view.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Denoiser;
use crate::error::{Error, Result};
use crate::numerics::log_softmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextShape {
    /// Alphabet size.
    pub k: usize,
    /// Embedding width.
    pub d: usize,
    /// Number of M buckets.
    pub buckets: usize,
    /// Hidden units.
    pub hidden: usize,
    /// Context radius.
    pub radius: usize,
    /// Units of the pooled second layer; 0 disables it.
    #[serde(default)]
    pub global: usize,
}

impl ContextShape {
    pub fn toy_default(k: usize) -> Self {
        ContextShape {
            k,
            d: 16,
            buckets: 8,
            hidden: 64,
            radius: 3,
            global: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 || self.buckets == 0 || self.hidden == 0 {
            return Err(Error::Config(format!("degenerate model shape {self:?}")));
        }
        Ok(())
    }

    pub fn slots(&self) -> usize {
        2 * self.radius + 1
    }

    /// Width of the first layer's input.
    pub fn input_dim(&self) -> usize {
        (self.slots() + 1) * self.d + 1
    }

    fn layout(&self) -> Layout {
        let emb = 0;
        let m_emb = emb + self.k * self.d;
        let w1 = m_emb + self.buckets * self.d;
        let b1 = w1 + self.hidden * self.input_dim();
        let w2 = b1 + self.hidden;
        let ga = w2 + self.hidden;
        let gb = ga + self.global * self.hidden;
        let gc = gb + self.global * self.hidden;
        let gr = gc + self.global;
        let gv = gr + self.global;
        let end = gv + self.global;
        Layout {
            emb,
            m_emb,
            w1,
            b1,
            w2,
            ga,
            gb,
            gc,
            gr,
            gv,
            end,
        }
    }

    pub fn num_params(&self) -> usize {
        self.layout().end
    }

    /// `M` itself below 4, then `2 + ⌊log₂ M⌋`, capped at `B − 1`.
    pub fn bucket(&self, m: u64) -> usize {
        let b = if m < 4 {
            m as usize
        } else {
            2 + (u64::BITS - m.leading_zeros() - 1) as usize
        };
        b.min(self.buckets - 1)
    }

    /// Scalar M input; `M = 0` never reaches a prediction and maps to 0.
    pub fn m_feature(m: u64) -> f64 {
        if m == 0 {
            0.0
        } else {
            1.0 / m as f64
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    emb: usize,
    m_emb: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    /// Second layer: per-position weights, pooled weights, bias, density weight, read-out.
    ga: usize,
    gb: usize,
    gc: usize,
    gr: usize,
    gv: usize,
    end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextModel {
    shape: ContextShape,
    params: Vec<f64>,
}

/// Per-position activations kept for the backward pass.
struct Forward {
    /// `hidden` activations per position, row-major.
    hidden: Vec<f64>,
    /// Second-layer activations per position, row-major (empty without it).
    upper: Vec<f64>,
    pooled: Vec<f64>,
    density: f64,
    scores: Vec<f64>,
}

/// Loss gradient for one sequence.
pub struct SampleGradient {
    pub loss: f64,
    pub grad: Vec<f64>,
}

impl ContextModel {
    /// Output layers zero, so predictions start uniform.
    pub fn new<R: Rng + ?Sized>(shape: ContextShape, rng: &mut R) -> Result<Self> {
        shape.validate()?;
        let lay = shape.layout();
        let mut params = vec![0.0; lay.end];
        for p in &mut params[lay.emb..lay.w1] {
            *p = rng.random_range(-1.0..1.0);
        }
        let limit = (6.0 / (shape.input_dim() + shape.hidden) as f64).sqrt();
        for p in &mut params[lay.w1..lay.b1] {
            *p = rng.random_range(-limit..limit);
        }
        let limit = (6.0 / (2 * shape.hidden + shape.global) as f64).sqrt();
        for p in &mut params[lay.ga..lay.gc] {
            *p = rng.random_range(-limit..limit);
        }
        Ok(ContextModel { shape, params })
    }

    pub fn zeros(shape: ContextShape) -> Result<Self> {
        shape.validate()?;
        Ok(ContextModel {
            shape,
            params: vec![0.0; shape.num_params()],
        })
    }

    pub fn from_params(shape: ContextShape, params: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if params.len() != shape.num_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                shape.num_params(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("non-finite parameter".into()));
        }
        Ok(ContextModel { shape, params })
    }

    pub fn shape(&self) -> &ContextShape {
        &self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `proj[slot][letter]`: first-layer pre-activation contributed by `letter` at `slot`.
    fn slot_projections(&self) -> Vec<f64> {
        let s = &self.shape;
        let lay = s.layout();
        let dim = s.input_dim();
        let mut proj = vec![0.0; s.slots() * s.k * s.hidden];
        for slot in 0..s.slots() {
            for c in 0..s.k {
                let emb = &self.params[lay.emb + c * s.d..lay.emb + (c + 1) * s.d];
                let out = &mut proj[(slot * s.k + c) * s.hidden..(slot * s.k + c + 1) * s.hidden];
                for (h, o) in out.iter_mut().enumerate() {
                    let row = &self.params[lay.w1 + h * dim + slot * s.d..][..s.d];
                    *o = row.iter().zip(emb).map(|(w, e)| w * e).sum();
                }
            }
        }
        proj
    }

    /// Pre-activation shared by every position: `b1 + W1_M · [m_emb[bucket], 1/M]`.
    fn shared_preactivation(&self, m: u64) -> Vec<f64> {
        let s = &self.shape;
        let lay = s.layout();
        let dim = s.input_dim();
        let m_emb = &self.params[lay.m_emb + s.bucket(m) * s.d..][..s.d];
        let f = ContextShape::m_feature(m);
        (0..s.hidden)
            .map(|h| {
                let row = &self.params[lay.w1 + h * dim + s.slots() * s.d..][..s.d + 1];
                self.params[lay.b1 + h]
                    + row[..s.d].iter().zip(m_emb).map(|(w, e)| w * e).sum::<f64>()
                    + row[s.d] * f
            })
            .collect()
    }

    fn forward(&self, x: &[u8], m: u64) -> Forward {
        let s = &self.shape;
        let lay = s.layout();
        let proj = self.slot_projections();
        let shared = self.shared_preactivation(m);
        let w2 = &self.params[lay.w2..lay.ga];
        let n = x.len();
        let r = s.radius as isize;
        let mut hidden = vec![0.0; n * s.hidden];
        let mut scores = vec![0.0; n];
        for i in 0..n {
            let act = &mut hidden[i * s.hidden..(i + 1) * s.hidden];
            act.copy_from_slice(&shared);
            for slot in 0..s.slots() {
                let pos = i as isize + slot as isize - r;
                if pos < 0 || pos >= n as isize {
                    continue;
                }
                let c = x[pos as usize] as usize;
                let p = &proj[(slot * s.k + c) * s.hidden..][..s.hidden];
                for (a, v) in act.iter_mut().zip(p) {
                    *a += v;
                }
            }
            for a in act.iter_mut() {
                *a = a.tanh();
            }
            scores[i] = act.iter().zip(w2).map(|(a, w)| a * w).sum();
        }
        let mut pooled = vec![0.0; s.hidden];
        let density = m as f64 / (m as f64 + n as f64);
        let mut upper = vec![0.0; n * s.global];
        if s.global > 0 && n > 0 {
            for row in hidden.chunks(s.hidden) {
                for (p, a) in pooled.iter_mut().zip(row) {
                    *p += a / n as f64;
                }
            }
            let base: Vec<f64> = (0..s.global)
                .map(|g| {
                    let wb = &self.params[lay.gb + g * s.hidden..][..s.hidden];
                    self.params[lay.gc + g]
                        + self.params[lay.gr + g] * density
                        + wb.iter().zip(&pooled).map(|(w, p)| w * p).sum::<f64>()
                })
                .collect();
            let gv = &self.params[lay.gv..lay.end];
            for i in 0..n {
                let act = &hidden[i * s.hidden..(i + 1) * s.hidden];
                let z = &mut upper[i * s.global..(i + 1) * s.global];
                for g in 0..s.global {
                    let wa = &self.params[lay.ga + g * s.hidden..][..s.hidden];
                    let pre = base[g] + wa.iter().zip(act).map(|(w, a)| w * a).sum::<f64>();
                    z[g] = pre.tanh();
                }
                scores[i] += z.iter().zip(gv).map(|(z, v)| z * v).sum::<f64>();
            }
        }
        Forward {
            hidden,
            upper,
            pooled,
            density,
            scores,
        }
    }

    /// `weight · CE(target, softmax(scores))` and its gradient, optionally on a
    /// window of the input. `target_probs` covers the whole of `x`; when
    /// `window = Some((start, len))` only `x[start..start+len]` is scored, the
    /// positions outside get `1/|x|` each and in-window mass is scaled by `len/|x|`.
    pub fn loss_and_gradient(
        &self,
        x: &[u8],
        m: u64,
        target_probs: &[f64],
        weight: f64,
        window: Option<(usize, usize)>,
    ) -> Result<SampleGradient> {
        let n = x.len();
        if target_probs.len() != n {
            return Err(Error::Shape(format!(
                "target has {} positions, sequence has {n}",
                target_probs.len()
            )));
        }
        let (start, len) = window.unwrap_or((0, n));
        if len == 0 || start + len > n {
            return Err(Error::Domain("window outside sequence".into()));
        }
        let view = &x[start..start + len];
        let target_in = &target_probs[start..start + len];
        let fwd = self.forward(view, m);
        let log_q = log_softmax(&fwd.scores);
        let scale = (len as f64 / n as f64).ln();
        let outside = -(n as f64).ln();
        let mut ce = 0.0;
        for (i, &p) in target_probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let lq = if i >= start && i < start + len {
                log_q[i - start] + scale
            } else {
                outside
            };
            ce -= p * lq;
        }
        let mass_in: f64 = target_in.iter().sum();
        // d/ds_j of −Σ_in p log softmax(s) = mass_in·q_j − p_j
        let dscores: Vec<f64> = log_q
            .iter()
            .zip(target_in)
            .map(|(lq, p)| weight * (mass_in * lq.exp() - p))
            .collect();
        let grad = self.backward(view, m, &fwd, &dscores);
        Ok(SampleGradient {
            loss: weight * ce,
            grad,
        })
    }

    fn backward(&self, x: &[u8], m: u64, fwd: &Forward, dscores: &[f64]) -> Vec<f64> {
        let s = &self.shape;
        let lay = s.layout();
        let dim = s.input_dim();
        let bucket = s.bucket(m);
        let w2 = &self.params[lay.w2..lay.ga];
        let n = x.len();
        let r = s.radius as isize;
        let mut grad = vec![0.0; lay.end];

        // Second layer: gradients of its pre-activations, their sum, and the
        // share every hidden vector receives through the mean.
        let mut dz = vec![0.0; n * s.global];
        let mut dpooled = vec![0.0; s.hidden];
        if s.global > 0 && n > 0 {
            let mut dsum = vec![0.0; s.global];
            for i in 0..n {
                let g = dscores[i];
                if g == 0.0 {
                    continue;
                }
                let act = &fwd.hidden[i * s.hidden..(i + 1) * s.hidden];
                let z = &fwd.upper[i * s.global..(i + 1) * s.global];
                for u in 0..s.global {
                    grad[lay.gv + u] += g * z[u];
                    let d = g * self.params[lay.gv + u] * (1.0 - z[u] * z[u]);
                    dz[i * s.global + u] = d;
                    dsum[u] += d;
                    for (gw, a) in grad[lay.ga + u * s.hidden..][..s.hidden].iter_mut().zip(act) {
                        *gw += d * a;
                    }
                }
            }
            for u in 0..s.global {
                grad[lay.gc + u] = dsum[u];
                grad[lay.gr + u] = dsum[u] * fwd.density;
                let wb = &self.params[lay.gb + u * s.hidden..][..s.hidden];
                for h in 0..s.hidden {
                    grad[lay.gb + u * s.hidden + h] = dsum[u] * fwd.pooled[h];
                    dpooled[h] += dsum[u] * wb[h] / n as f64;
                }
            }
        }
        let coupled = dpooled.iter().any(|&d| d != 0.0);

        // Pre-activation gradients summed per (slot, letter) and over all positions.
        let mut by_slot = vec![0.0; s.slots() * s.k * s.hidden];
        let mut total = vec![0.0; s.hidden];
        let mut da = vec![0.0; s.hidden];
        for i in 0..n {
            let g = dscores[i];
            if g == 0.0 && !coupled {
                continue;
            }
            let act = &fwd.hidden[i * s.hidden..(i + 1) * s.hidden];
            for h in 0..s.hidden {
                grad[lay.w2 + h] += g * act[h];
                da[h] = g * w2[h] + dpooled[h];
            }
            for u in 0..s.global {
                let d = dz[i * s.global + u];
                if d == 0.0 {
                    continue;
                }
                let wa = &self.params[lay.ga + u * s.hidden..][..s.hidden];
                for (x, w) in da.iter_mut().zip(wa) {
                    *x += d * w;
                }
            }
            for h in 0..s.hidden {
                da[h] *= 1.0 - act[h] * act[h];
                total[h] += da[h];
            }
            for slot in 0..s.slots() {
                let pos = i as isize + slot as isize - r;
                if pos < 0 || pos >= n as isize {
                    continue;
                }
                let c = x[pos as usize] as usize;
                let acc = &mut by_slot[(slot * s.k + c) * s.hidden..][..s.hidden];
                for (a, d) in acc.iter_mut().zip(&da) {
                    *a += d;
                }
            }
        }

        for h in 0..s.hidden {
            grad[lay.b1 + h] = total[h];
        }
        for slot in 0..s.slots() {
            for c in 0..s.k {
                let acc = &by_slot[(slot * s.k + c) * s.hidden..][..s.hidden];
                let emb_off = lay.emb + c * s.d;
                for h in 0..s.hidden {
                    if acc[h] == 0.0 {
                        continue;
                    }
                    let row = lay.w1 + h * dim + slot * s.d;
                    for e in 0..s.d {
                        grad[row + e] += acc[h] * self.params[emb_off + e];
                        grad[emb_off + e] += acc[h] * self.params[row + e];
                    }
                }
            }
        }
        let m_off = lay.m_emb + bucket * s.d;
        let f = ContextShape::m_feature(m);
        for h in 0..s.hidden {
            let row = lay.w1 + h * dim + s.slots() * s.d;
            for e in 0..s.d {
                grad[row + e] += total[h] * self.params[m_off + e];
                grad[m_off + e] += total[h] * self.params[row + e];
            }
            grad[row + s.d] += total[h] * f;
        }
        grad
    }
}

impl Denoiser for ContextModel {
    fn scores(&self, x: &[u8], m: u64) -> Vec<f64> {
        self.forward(x, m).scores
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::Sequence;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn buckets() {
        let s = ContextShape::toy_default(3);
        let got: Vec<usize> = [0u64, 1, 2, 3, 4, 7, 8, 15, 16, 31, 32, 1000]
            .iter()
            .map(|&m| s.bucket(m))
            .collect();
        assert_eq!(got, vec![0, 1, 2, 3, 4, 4, 5, 5, 6, 6, 7, 7]);
        assert_eq!(s.bucket(u64::MAX), 7);
        assert_eq!(ContextShape::m_feature(0), 0.0);
        assert_eq!(ContextShape::m_feature(4), 0.25);
    }

    #[test]
    fn zero_output_layer_predicts_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = ContextModel::new(ContextShape::toy_default(3), &mut rng).unwrap();
        let x = Sequence::from_letters(vec![0, 1, 2, 0, 1, 1, 2]);
        let d = model.predict(&x, 4).unwrap();
        for lp in d.log_probs() {
            assert!((lp + (7f64).ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn from_params_checks_length() {
        let shape = ContextShape::toy_default(3);
        assert!(ContextModel::from_params(shape, vec![0.0; 3]).is_err());
        assert!(ContextModel::from_params(shape, vec![0.0; shape.num_params()]).is_ok());
    }

    #[test]
    fn full_window_equals_plain_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model = ContextModel::new(ContextShape::toy_default(3), &mut rng).unwrap();
        for p in model.params_mut() {
            *p += rng.random_range(-0.1..0.1);
        }
        let x = [0u8, 1, 2, 2, 1, 0];
        let target = [0.1, 0.2, 0.3, 0.1, 0.2, 0.1];
        let a = model.loss_and_gradient(&x, 3, &target, 2.0, None).unwrap();
        let b = model
            .loss_and_gradient(&x, 3, &target, 2.0, Some((0, 6)))
            .unwrap();
        assert_eq!(a.loss, b.loss);
        assert_eq!(a.grad, b.grad);
    }
}
