//! Run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::denoiser::{ContextShape, TrainConfig};
use crate::error::{Error, Result};
use crate::sampler::ShrinkMode;
use crate::schedule::{InsertionDistribution, RateSchedule};
use crate::seqcore::{Alphabet, Corpus};

/// Where the insertion distribution comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PiSource {
    /// Smoothed letter frequencies of the training corpus.
    #[default]
    Corpus,
    Uniform,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub d: usize,
    pub buckets: usize,
    pub hidden: usize,
    pub radius: usize,
    pub global: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let s = ContextShape::toy_default(1);
        ModelConfig {
            d: s.d,
            buckets: s.buckets,
            hidden: s.hidden,
            radius: s.radius,
            global: s.global,
        }
    }
}

impl ModelConfig {
    pub fn shape(&self, k: usize) -> ContextShape {
        ContextShape {
            k,
            d: self.d,
            buckets: self.buckets,
            hidden: self.hidden,
            radius: self.radius,
            global: self.global,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Corrector rounds before each net deletion during generation.
    pub correctors: usize,
    /// Deletions taken per model call.
    pub k: usize,
    pub mode: ShrinkMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            correctors: 0,
            k: 1,
            mode: ShrinkMode::Sample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// `"toy"`, `"amino"`, or the symbols themselves in order.
    pub alphabet: String,
    pub schedule: RateSchedule,
    pub pi: PiSource,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub sampler: SamplerConfig,
    /// Monte-Carlo draws per sequence for ELBO estimates.
    pub elbo_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            alphabet: "amino".into(),
            schedule: RateSchedule::default(),
            pi: PiSource::Corpus,
            train: TrainConfig::default(),
            model: ModelConfig::default(),
            sampler: SamplerConfig::default(),
            elbo_samples: 10,
        }
    }
}

impl RunConfig {
    /// Settings for the alternating toy data: uniform insertions over
    /// {A,B,C} and a shorter, annealed high learning rate run.
    pub fn toy() -> Self {
        RunConfig {
            alphabet: "toy".into(),
            pi: PiSource::Uniform,
            train: TrainConfig {
                steps: 8000,
                learning_rate: 1e-2,
                final_lr_fraction: 0.1,
                ..TrainConfig::default()
            },
            ..RunConfig::default()
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        let alphabet = self.resolve_alphabet()?;
        if let PiSource::Explicit(w) = &self.pi {
            if w.len() != alphabet.size() {
                return Err(Error::Config(format!(
                    "explicit pi has {} entries for an alphabet of {}",
                    w.len(),
                    alphabet.size()
                )));
            }
            InsertionDistribution::new(w.clone())?;
        }
        self.train.validate()?;
        self.model.shape(alphabet.size()).validate()?;
        if self.sampler.k == 0 {
            return Err(Error::Config("sampler.k must be >= 1".into()));
        }
        if self.elbo_samples == 0 {
            return Err(Error::Config("elbo_samples must be >= 1".into()));
        }
        Ok(())
    }

    pub fn resolve_alphabet(&self) -> Result<Alphabet> {
        match self.alphabet.as_str() {
            "toy" => Ok(Alphabet::toy()),
            "amino" => Ok(Alphabet::amino_acids()),
            symbols => Alphabet::new(symbols),
        }
    }

    /// `corpus` is required when the source is [`PiSource::Corpus`].
    pub fn resolve_pi(&self, alphabet: &Alphabet, corpus: Option<&Corpus>) -> Result<InsertionDistribution> {
        match &self.pi {
            PiSource::Uniform => Ok(InsertionDistribution::uniform(alphabet.size())),
            PiSource::Explicit(w) => InsertionDistribution::new(w.clone()),
            PiSource::Corpus => {
                let corpus = corpus
                    .ok_or_else(|| Error::Config("pi = corpus needs a training corpus".into()))?;
                InsertionDistribution::from_corpus(corpus)
            }
        }
    }

    /// The config with alphabet and `π` spelled out, as echoed next to outputs.
    pub fn resolved(&self, alphabet: &Alphabet, pi: &InsertionDistribution) -> RunConfig {
        RunConfig {
            alphabet: alphabet.as_string(),
            pi: PiSource::Explicit(pi.probs().to_vec()),
            ..self.clone()
        }
    }

    pub fn window(&self) -> usize {
        self.train.window
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// `<output>.config.json`.
pub fn echo_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".config.json");
    PathBuf::from(name)
}

pub fn write_echo(output: &Path, config: &RunConfig) -> Result<PathBuf> {
    let path = echo_path(output);
    let mut text = config.to_json()?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
