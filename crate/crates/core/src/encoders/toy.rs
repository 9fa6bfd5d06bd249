use super::{BackendKind, Encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::ingest::{VideoEntry, VideoSource};
use crate::numerics::{l2_normalize, Matrix};
use crate::rng::{fnv1a, splitmix64};

/// Lowercased alphanumeric runs; apostrophes stay inside words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Frame scale that gives synthetic videos sharp attention over the corpus.
pub const SMOKE_FRAME_SCALE: f64 = 16.0;

/// Deterministic hashed bag-of-tokens encoder.
///
/// Each token hashes (with the seed) to a pseudo-random unit vector. A text
/// is its sequence of token vectors; a frame descriptor is embedded like a
/// text, pooled, and multiplied by `frame_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    dim: usize,
    seed: u64,
    frame_scale: f64,
    config: EncoderConfig,
}

impl ToyEncoder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig(
                "embedding dimension must be positive".into(),
            ));
        }
        Ok(Self {
            dim,
            seed,
            frame_scale: 1.0,
            config: EncoderConfig::default(),
        })
    }

    pub fn with_config(mut self, config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        self.config = config;
        Ok(self)
    }

    /// Magnitude of frame embeddings. Text and prompt vectors stay unit-norm.
    pub fn with_frame_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "frame scale must be positive, got {scale}"
            )));
        }
        self.frame_scale = scale;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn frame_scale(&self) -> f64 {
        self.frame_scale
    }

    /// Unit vector for one token.
    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut state = self.seed ^ fnv1a(token.as_bytes());
        let mut v = Vec::with_capacity(self.dim);
        while v.len() < self.dim {
            // Box-Muller on two 53-bit uniforms in (0, 1]
            let u1 = ((splitmix64(&mut state) >> 11) + 1) as f64 / (1u64 << 53) as f64;
            let u2 = (splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64;
            let r = (-2.0 * u1.ln()).sqrt();
            let theta = std::f64::consts::TAU * u2;
            v.push(r * theta.cos());
            if v.len() < self.dim {
                v.push(r * theta.sin());
            }
        }
        // a zero draw has probability 0; fall back to a basis vector anyway
        l2_normalize(&v).unwrap_or_else(|_| {
            let mut e = vec![0.0; self.dim];
            e[0] = 1.0;
            e
        })
    }

    fn frame_vector(&self, descriptor: &str) -> Result<Vec<f64>> {
        let pooled = self.encode_text(descriptor)?.pooled;
        let pooled = if self.config.normalize_pooled {
            pooled
        } else {
            l2_normalize(&pooled)?
        };
        Ok(pooled.into_iter().map(|x| x * self.frame_scale).collect())
    }
}

impl Encoder for ToyEncoder {
    fn kind(&self) -> BackendKind {
        BackendKind::ToyDeterministic
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn config(&self) -> &EncoderConfig {
        &self.config
    }

    fn frame_embeddings(&self, video: &VideoEntry) -> Result<Matrix> {
        match &video.source {
            VideoSource::Frames(descriptors) => {
                let rows = descriptors
                    .iter()
                    .map(|d| self.frame_vector(d))
                    .collect::<Result<Vec<_>>>()?;
                Matrix::from_rows(&rows)
            }
            VideoSource::FeatureFile { .. } => Err(Error::UnknownId(format!(
                "{} (feature-file video needs the precomputed backend)",
                video.id
            ))),
        }
    }

    fn token_embeddings(&self, text: &str) -> Result<Matrix> {
        let rows: Vec<Vec<f64>> = tokenize(text)
            .iter()
            .map(|t| self.token_vector(t))
            .collect();
        if rows.is_empty() {
            return Err(Error::EmptyCaption);
        }
        Matrix::from_rows(&rows)
    }
}
