//! Checkpoint file: one line of JSON header, then the parameters as
//! little-endian `f64`s in layout order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::context::{ContextModel, ContextShape};
use crate::error::{Error, Result};
use crate::schedule::{InsertionDistribution, RateSchedule};
use crate::seqcore::Alphabet;

pub const CHECKPOINT_FORMAT: &str = "insdiff-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    step: usize,
    alphabet: Alphabet,
    schedule: RateSchedule,
    pi: InsertionDistribution,
    window: usize,
    shape: ContextShape,
    n_params: usize,
}

/// A trained model with everything needed to sample and score with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    pub alphabet: Alphabet,
    pub schedule: RateSchedule,
    pub pi: InsertionDistribution,
    pub window: usize,
    pub model: ContextModel,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            step: self.step,
            alphabet: self.alphabet.clone(),
            schedule: self.schedule,
            pi: self.pi.clone(),
            window: self.window,
            shape: *self.model.shape(),
            n_params: self.model.params().len(),
        };
        let mut out = serde_json::to_vec(&header)?;
        out.push(b'\n');
        out.reserve(8 * header.n_params);
        for p in self.model.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
        let header: Header = serde_json::from_slice(&bytes[..nl])?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format {:?}", header.format)));
        }
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                header.version
            )));
        }
        let body = &bytes[nl + 1..];
        if body.len() != 8 * header.n_params {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter bytes, found {}",
                8 * header.n_params,
                body.len()
            )));
        }
        if header.alphabet.size() != header.shape.k || header.pi.len() != header.shape.k {
            return Err(Error::Checkpoint("alphabet size disagrees with model shape".into()));
        }
        header.schedule.validate()?;
        let params = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Checkpoint {
            step: header.step,
            alphabet: header.alphabet,
            schedule: header.schedule,
            pi: header.pi,
            window: header.window,
            model: ContextModel::from_params(header.shape, params)?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_checkpoint() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut model = ContextModel::new(ContextShape::toy_default(3), &mut rng).unwrap();
        model.params_mut()[0] = f64::MIN_POSITIVE;
        model.params_mut()[1] = -0.1;
        Checkpoint {
            step: 12,
            alphabet: Alphabet::toy(),
            schedule: RateSchedule::default(),
            pi: InsertionDistribution::new(vec![0.2, 0.3, 0.5]).unwrap(),
            window: 64,
            model,
        }
    }

    #[test]
    fn bit_exact_round_trip() {
        let ck = sample_checkpoint();
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        for (a, b) in back.model.params().iter().zip(ck.model.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_truncation_and_bad_header() {
        let bytes = sample_checkpoint().to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(Checkpoint::from_bytes(b"{}\n").is_err());
        let text = String::from_utf8_lossy(&bytes[..bytes.iter().position(|&b| b == b'\n').unwrap()])
            .replace("\"version\":1", "\"version\":9");
        let mut bad = text.into_bytes();
        bad.push(b'\n');
        bad.extend_from_slice(&bytes[bytes.iter().position(|&b| b == b'\n').unwrap() + 1..]);
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Checkpoint(_))));
    }
}
