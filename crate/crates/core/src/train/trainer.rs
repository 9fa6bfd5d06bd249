use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use super::loss::infonce_total_var;
use super::model::{HeadKind, Model, ModelConfig};
use super::optim::{Optimizer, OptimizerConfig};
use crate::distill::{pooled_distilled, KnowledgeCorpus};
use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::numerics::{Graph, Matrix};
use crate::rng::SeedStreams;

pub const DEFAULT_BATCH_SIZE: usize = 126;
pub const DEFAULT_EPOCHS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    /// Fixed number of optimizer steps; overrides `epochs`.
    pub steps: Option<usize>,
    pub seed: u64,
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
}

impl TrainConfig {
    pub fn new(dim: usize) -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            epochs: DEFAULT_EPOCHS,
            steps: None,
            seed: 0,
            model: ModelConfig::new(dim),
            optimizer: OptimizerConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "batch size must be at least 2, got {}",
                self.batch_size
            )));
        }
        self.model.validate()?;
        self.optimizer.validate()
    }
}

/// Pooled inputs for both heads plus the (caption, video) pairs to train on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    /// One mean-pooled distilled row per video.
    pub videos: Matrix,
    /// One pooled row per caption.
    pub texts: Matrix,
    /// `(text row, video row)`.
    pub pairs: Vec<(usize, usize)>,
}

impl TrainingData {
    pub fn new(videos: Matrix, texts: Matrix, pairs: Vec<(usize, usize)>) -> Result<Self> {
        if videos.cols() != texts.cols() {
            return Err(Error::dims(videos.cols(), texts.cols()));
        }
        for &(t, v) in &pairs {
            if t >= texts.rows() {
                return Err(Error::IndexOutOfRange {
                    index: t,
                    len: texts.rows(),
                });
            }
            if v >= videos.rows() {
                return Err(Error::IndexOutOfRange {
                    index: v,
                    len: videos.rows(),
                });
            }
        }
        if !videos.is_finite() || !texts.is_finite() {
            return Err(Error::NonFinite("training inputs".into()));
        }
        Ok(Self {
            videos,
            texts,
            pairs,
        })
    }

    /// Encodes and distills every video and caption of `dataset`.
    pub fn prepare(
        dataset: &Dataset,
        encoder: &dyn Encoder,
        corpus: &KnowledgeCorpus,
    ) -> Result<Self> {
        let feats = dataset
            .videos()
            .iter()
            .map(|v| encoder.encode_video(v))
            .collect::<Result<Vec<_>>>()?;
        let videos = pooled_distilled(&feats, corpus)?;
        let texts = dataset
            .captions()
            .iter()
            .map(|c| Ok(encoder.encode_caption(c)?.pooled))
            .collect::<Result<Vec<_>>>()?;
        let texts = Matrix::from_rows(&texts)?;
        let pairs = dataset.caption_targets().into_iter().enumerate().collect();
        Self::new(videos, texts, pairs)
    }

    pub fn dim(&self) -> usize {
        self.videos.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub loss: f64,
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub trace: Vec<TraceRow>,
}

/// One optimizer step on the given pairs; returns the pre-update loss.
pub fn train_step(
    model: &mut Model,
    optimizer: &mut Optimizer,
    data: &TrainingData,
    batch: &[(usize, usize)],
) -> Result<f64> {
    let text_rows: Vec<usize> = batch.iter().map(|p| p.0).collect();
    let video_rows: Vec<usize> = batch.iter().map(|p| p.1).collect();
    let mut g = Graph::new();
    let t_in = g.constant(data.texts.select_rows(&text_rows));
    let v_in = g.constant(data.videos.select_rows(&video_rows));
    let t = model.project_var(&mut g, HeadKind::Text, t_in)?;
    let v = model.project_var(&mut g, HeadKind::Video, v_in)?;
    let sim = g.matmul_t(t, v)?;
    let tau = model.tau_var(&mut g);
    let loss = infonce_total_var(&mut g, sim, tau)?;
    let value = g.value(loss)[(0, 0)];
    if !value.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    let grads = g.backward(loss)?;
    optimizer.step(model.params_mut(), &grads)?;
    model.clamp_tau();
    Ok(value)
}

pub fn train_loop(data: &TrainingData, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.dim() != config.model.dim {
        return Err(Error::dims(config.model.dim, data.dim()));
    }
    let b = config.batch_size;
    if data.pairs.len() < b {
        return Err(Error::InsufficientData {
            available: data.pairs.len(),
            required: b,
        });
    }
    let per_epoch = data.pairs.len() / b;
    let total = config.steps.unwrap_or(per_epoch * config.epochs);

    let mut model = Model::new(config.model.clone())?;
    let mut optimizer = Optimizer::new(config.optimizer.clone(), model.params())?;
    let mut rng = SeedStreams::new(config.seed).rng(SeedStreams::SHUFFLE);
    let mut order = data.pairs.clone();
    let mut trace = Vec::with_capacity(total);
    let mut step = 0;
    while step < total {
        order.shuffle(&mut rng);
        for batch in order.chunks_exact(b) {
            if step == total {
                break;
            }
            let loss = train_step(&mut model, &mut optimizer, data, batch)?;
            step += 1;
            trace.push(TraceRow {
                step,
                loss,
                tau: model.tau(),
            });
        }
    }
    Ok(TrainOutcome { model, trace })
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("step,loss,tau\n");
    for r in trace {
        let _ = writeln!(out, "{},{},{}", r.step, r.loss, r.tau);
    }
    out
}

pub fn write_trace_csv(trace: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, trace_csv(trace)).map_err(|e| Error::io(path, e))
}
