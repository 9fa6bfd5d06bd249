//! Frozen feature encoders.
//!
//! Two interchangeable backends sit behind [`Encoder`]: [`ToyEncoder`], a
//! deterministic hashed bag-of-tokens model, and [`PrecomputedEncoder`],
//! which serves embeddings exported by an external model.

mod precomputed;
mod toy;

pub use precomputed::PrecomputedEncoder;
pub use toy::{tokenize, ToyEncoder, SMOKE_FRAME_SCALE};

use crate::error::{Error, Result};
use crate::ingest::{Caption, VideoEntry};
use crate::numerics::{l2_normalize, mean_pool_rows, Matrix};

/// Default frame budget per video.
pub const DEFAULT_MAX_FRAMES: usize = 12;
/// Default token budget per caption.
pub const DEFAULT_MAX_TOKENS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    PrecomputedFile,
    ToyDeterministic,
}

/// How a token sequence is reduced to one text vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TextPooling {
    #[default]
    Mean,
    Last,
}

impl std::str::FromStr for TextPooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(TextPooling::Mean),
            "last" => Ok(TextPooling::Last),
            other => Err(Error::InvalidConfig(format!("unknown pooling `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub max_frames: usize,
    pub max_tokens: usize,
    pub pooling: TextPooling,
    /// L2-normalize pooled text vectors.
    pub normalize_pooled: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            max_frames: DEFAULT_MAX_FRAMES,
            max_tokens: DEFAULT_MAX_TOKENS,
            pooling: TextPooling::Mean,
            normalize_pooled: true,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_frames == 0 || self.max_tokens == 0 {
            return Err(Error::InvalidConfig(
                "frame and token budgets must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Frame-level embeddings of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoFeatures {
    pub video_id: String,
    pub frames: Matrix,
}

/// Token-level and pooled embeddings of one caption.
#[derive(Debug, Clone, PartialEq)]
pub struct TextFeatures {
    /// Empty for free text that is not part of a dataset.
    pub caption_id: String,
    pub video_id: String,
    pub tokens: Matrix,
    pub pooled: Vec<f64>,
}

pub trait Encoder: Send + Sync {
    fn kind(&self) -> BackendKind;

    fn dim(&self) -> usize;

    fn config(&self) -> &EncoderConfig;

    /// Raw `N × D` frame embeddings, before the frame budget is applied.
    fn frame_embeddings(&self, video: &VideoEntry) -> Result<Matrix>;

    /// Raw `S × D` token embeddings of non-blank text, before truncation.
    fn token_embeddings(&self, text: &str) -> Result<Matrix>;

    fn encode_video(&self, video: &VideoEntry) -> Result<VideoFeatures> {
        let frames = self.frame_embeddings(video)?;
        if frames.rows() == 0 {
            return Err(Error::EmptyInput("video without frames"));
        }
        if frames.cols() != self.dim() {
            return Err(Error::dims(self.dim(), frames.cols()));
        }
        if !frames.is_finite() {
            return Err(Error::NonFinite(format!("frames of `{}`", video.id)));
        }
        Ok(VideoFeatures {
            video_id: video.id.clone(),
            frames: subsample_frames(&frames, self.config().max_frames),
        })
    }

    fn encode_text(&self, text: &str) -> Result<TextFeatures> {
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::EmptyCaption);
        }
        let tokens = self.token_embeddings(text)?;
        if tokens.rows() == 0 {
            return Err(Error::EmptyCaption);
        }
        if tokens.cols() != self.dim() {
            return Err(Error::dims(self.dim(), tokens.cols()));
        }
        let keep = tokens.rows().min(self.config().max_tokens);
        let tokens = tokens.select_rows(&(0..keep).collect::<Vec<_>>());
        let pooled = match self.config().pooling {
            TextPooling::Mean => mean_pool_rows(&tokens)?,
            TextPooling::Last => tokens.row(keep - 1).to_vec(),
        };
        let pooled = if self.config().normalize_pooled {
            l2_normalize(&pooled)?
        } else {
            pooled
        };
        Ok(TextFeatures {
            caption_id: String::new(),
            video_id: String::new(),
            tokens,
            pooled,
        })
    }

    fn encode_caption(&self, caption: &Caption) -> Result<TextFeatures> {
        let mut f = self.encode_text(&caption.text)?;
        f.caption_id = caption.id.clone();
        f.video_id = caption.video_id.clone();
        Ok(f)
    }

    /// Pooled embedding of a prompt; never differentiated.
    fn encode_prompt(&self, prompt: &str) -> Result<Vec<f64>> {
        Ok(self.encode_text(prompt)?.pooled)
    }
}

/// Uniformly spaced subset of at most `max` rows, in order.
pub fn subsample_frames(frames: &Matrix, max: usize) -> Matrix {
    let n = frames.rows();
    if n <= max {
        return frames.clone();
    }
    let idx: Vec<usize> = (0..max).map(|k| k * n / max).collect();
    frames.select_rows(&idx)
}
