use std::collections::HashMap;
use std::path::Path;

use super::{BackendKind, Encoder, EncoderConfig, ToyEncoder};
use crate::error::{Error, Result};
use crate::ingest::{read_tensor_file, Dataset, TensorBlob, VideoEntry, VideoSource};
use crate::numerics::Matrix;

/// Serves embeddings produced offline by an external model.
///
/// Video features are keyed by video id. Text features are keyed by the exact
/// (trimmed) text; unseen text falls back to an optional toy encoder.
#[derive(Debug, Clone)]
pub struct PrecomputedEncoder {
    dim: usize,
    config: EncoderConfig,
    videos: HashMap<String, Matrix>,
    texts: HashMap<String, Matrix>,
    text_fallback: Option<ToyEncoder>,
}

impl PrecomputedEncoder {
    pub fn new(dim: usize, config: EncoderConfig) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig(
                "embedding dimension must be positive".into(),
            ));
        }
        config.validate()?;
        Ok(Self {
            dim,
            config,
            videos: HashMap::new(),
            texts: HashMap::new(),
            text_fallback: None,
        })
    }

    pub fn with_text_fallback(mut self, fallback: ToyEncoder) -> Result<Self> {
        if fallback.dim() != self.dim {
            return Err(Error::dims(self.dim, fallback.dim()));
        }
        self.text_fallback = Some(fallback);
        Ok(self)
    }

    pub fn insert_video(&mut self, id: impl Into<String>, frames: Matrix) -> Result<()> {
        if frames.cols() != self.dim {
            return Err(Error::dims(self.dim, frames.cols()));
        }
        self.videos.insert(id.into(), frames);
        Ok(())
    }

    pub fn insert_text(&mut self, text: &str, tokens: Matrix) -> Result<()> {
        if tokens.cols() != self.dim {
            return Err(Error::dims(self.dim, tokens.cols()));
        }
        self.texts.insert(text.trim().to_owned(), tokens);
        Ok(())
    }

    /// Adds every blob of a tensor file as a video named by the blob.
    pub fn load_video_blobs(&mut self, blobs: &[TensorBlob]) -> Result<()> {
        for blob in blobs {
            self.insert_video(blob.name.clone(), blob.to_matrix()?)?;
        }
        Ok(())
    }

    /// Loads the feature files referenced by a dataset, resolved against `base`.
    pub fn load_dataset_features(
        &mut self,
        dataset: &Dataset,
        base: impl AsRef<Path>,
    ) -> Result<()> {
        let base = base.as_ref();
        let mut loaded: Vec<&str> = Vec::new();
        for video in dataset.videos() {
            if let VideoSource::FeatureFile { path, .. } = &video.source {
                if !loaded.contains(&path.as_str()) {
                    self.load_video_blobs(&read_tensor_file(base.join(path))?)?;
                    loaded.push(path);
                }
            }
        }
        Ok(())
    }

    pub fn n_videos(&self) -> usize {
        self.videos.len()
    }
}

impl Encoder for PrecomputedEncoder {
    fn kind(&self) -> BackendKind {
        BackendKind::PrecomputedFile
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn config(&self) -> &EncoderConfig {
        &self.config
    }

    fn frame_embeddings(&self, video: &VideoEntry) -> Result<Matrix> {
        let frames = self
            .videos
            .get(&video.id)
            .ok_or_else(|| Error::UnknownId(video.id.clone()))?;
        if let VideoSource::FeatureFile { n_frames, .. } = &video.source {
            if *n_frames != frames.rows() {
                return Err(Error::dims(
                    format!("{n_frames} frames for `{}`", video.id),
                    frames.rows(),
                ));
            }
        }
        Ok(frames.clone())
    }

    fn token_embeddings(&self, text: &str) -> Result<Matrix> {
        let text = text.trim();
        if let Some(t) = self.texts.get(text) {
            return Ok(t.clone());
        }
        match &self.text_fallback {
            Some(toy) => toy.token_embeddings(text),
            None => Err(Error::UnknownId(format!("text `{text}`"))),
        }
    }
}
