//! Dictionary, corpus and heads fitted in one pass over a training split.

use crate::distill::{build_corpus, KnowledgeCorpus, DEFAULT_Z};
use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::train::{
    train_loop, HeadInit, Model, OptimizerKind, TraceRow, TrainConfig, TrainingData,
};
use crate::vcd::{build_dictionary_with, ContentDictionary, VcdOptions, DEFAULT_KAPPA};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub kappa: usize,
    pub z: f64,
    pub train: TrainConfig,
}

impl PipelineConfig {
    pub fn new(dim: usize) -> Self {
        Self {
            kappa: DEFAULT_KAPPA,
            z: DEFAULT_Z,
            train: TrainConfig::new(dim),
        }
    }

    /// Small fast setup for synthetic data: `B = 16`, 200 Adam steps and
    /// shared-init heads of width 128.
    pub fn smoke(dim: usize) -> Self {
        let mut cfg = Self::new(dim);
        cfg.train.batch_size = 16;
        cfg.train.steps = Some(200);
        cfg.train.seed = 16;
        let m = &mut cfg.train.model;
        m.hidden1 = 128;
        m.hidden2 = 128;
        m.d_proj = dim;
        m.tau_init = 0.01;
        m.init = HeadInit::Shared;
        m.seed = 16;
        cfg.train.optimizer.kind = OptimizerKind::Adam;
        cfg.train.optimizer.lr = 1e-3;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa == 0 {
            return Err(Error::InvalidConfig("kappa must be at least 1".into()));
        }
        if !(self.z.is_finite() && self.z > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "scaling z must be positive, got {}",
                self.z
            )));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone)]
pub struct FittedPipeline {
    pub dictionary: ContentDictionary,
    pub corpus: KnowledgeCorpus,
    pub model: Model,
    pub trace: Vec<TraceRow>,
}

pub fn fit(
    dataset: &Dataset,
    encoder: &dyn Encoder,
    config: &PipelineConfig,
) -> Result<FittedPipeline> {
    fit_with(dataset, encoder, config, VcdOptions::default())
}

pub fn fit_with(
    dataset: &Dataset,
    encoder: &dyn Encoder,
    config: &PipelineConfig,
    vcd: VcdOptions<'_>,
) -> Result<FittedPipeline> {
    config.validate()?;
    let dictionary = build_dictionary_with(dataset, encoder, config.kappa, vcd)?;
    fit_from_dictionary(dataset, encoder, config, dictionary)
}

pub fn fit_from_dictionary(
    dataset: &Dataset,
    encoder: &dyn Encoder,
    config: &PipelineConfig,
    dictionary: ContentDictionary,
) -> Result<FittedPipeline> {
    config.validate()?;
    let corpus = build_corpus(&dictionary, encoder, config.z)?;
    let data = TrainingData::prepare(dataset, encoder, &corpus)?;
    let outcome = train_loop(&data, &config.train)?;
    Ok(FittedPipeline {
        dictionary,
        corpus,
        model: outcome.model,
        trace: outcome.trace,
    })
}
