//! Run settings merged from flags, a TOML file and built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;
use waver_core::encoders::{EncoderConfig, TextPooling, ToyEncoder, SMOKE_FRAME_SCALE};
use waver_core::eval::StdKind;
use waver_core::pipeline::PipelineConfig;
use waver_core::train::{HeadInit, OptimizerKind};

use crate::CliError;

pub const CONFIG_ENV: &str = "WAVER_CONFIG";

/// Embedding width of the default toy encoder.
pub const DEFAULT_DIM: usize = 512;
pub const DEFAULT_ENCODER_SEED: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Full-scale hyperparameters: plain SGD, lr 1e-4, B = 126, five epochs.
    Reference,
    /// Fast settings tuned for the synthetic corpus.
    Smoke,
}

/// Every tunable. Each field may come from a flag or from the config file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Base hyperparameters the other settings override.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Phrases kept per video.
    #[arg(long, global = true)]
    pub kappa: Option<usize>,
    /// Attention scaling factor.
    #[arg(long, global = true)]
    pub z: Option<f64>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Fixed number of optimizer steps; overrides epochs.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// `sgd` or `adam`.
    #[arg(long, global = true)]
    pub optimizer: Option<String>,
    #[arg(long, global = true)]
    pub momentum: Option<f64>,
    #[arg(long, global = true)]
    pub tau_init: Option<f64>,
    /// Root seed for shuffling, initialization and style selection.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Embedding width of the encoder.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub hidden1: Option<usize>,
    #[arg(long, global = true)]
    pub hidden2: Option<usize>,
    #[arg(long, global = true)]
    pub d_proj: Option<usize>,
    /// `random`, `shared` or `identity`.
    #[arg(long, global = true)]
    pub init: Option<String>,
    #[arg(long, global = true)]
    pub encoder_seed: Option<u64>,
    /// Multiplier on toy frame embeddings.
    #[arg(long, global = true)]
    pub frame_scale: Option<f64>,
    #[arg(long, global = true)]
    pub max_frames: Option<usize>,
    #[arg(long, global = true)]
    pub max_tokens: Option<usize>,
    /// `mean` or `last`.
    #[arg(long, global = true)]
    pub pooling: Option<String>,
    /// Trailing videos of the manifest held out for evaluation.
    #[arg(long, global = true)]
    pub holdout: Option<usize>,
    /// `sample` or `population`.
    #[arg(long, global = true)]
    pub std: Option<String>,
}

macro_rules! merge_fields {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        Settings { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl Settings {
    /// Fields set in `self` win over those in `other`.
    pub fn or(self, other: Settings) -> Settings {
        merge_fields!(
            self,
            other,
            preset,
            kappa,
            z,
            batch_size,
            epochs,
            steps,
            lr,
            optimizer,
            momentum,
            tau_init,
            seed,
            dim,
            hidden1,
            hidden2,
            d_proj,
            init,
            encoder_seed,
            frame_scale,
            max_frames,
            max_tokens,
            pooling,
            holdout,
            std
        )
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Settings, CliError> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    /// Reads the file named by `--config`, else by the environment variable.
    pub fn load_file(explicit: Option<&Path>) -> Result<Settings, CliError> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => PathBuf::from(p),
                _ => return Ok(Settings::default()),
            },
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        Settings::from_toml(&text, &path)
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let preset = self.preset.unwrap_or(Preset::Reference);
        let dim = self.dim.unwrap_or(DEFAULT_DIM);
        if dim == 0 {
            return Err(CliError::usage("dim must be positive"));
        }
        let mut pipeline = match preset {
            Preset::Reference => PipelineConfig::new(dim),
            Preset::Smoke => PipelineConfig::smoke(dim),
        };
        let default_scale = match preset {
            Preset::Reference => 1.0,
            Preset::Smoke => SMOKE_FRAME_SCALE,
        };
        if let Some(k) = self.kappa {
            pipeline.kappa = k;
        }
        if let Some(z) = self.z {
            pipeline.z = z;
        }
        let train = &mut pipeline.train;
        if let Some(b) = self.batch_size {
            train.batch_size = b;
        }
        if let Some(e) = self.epochs {
            train.epochs = e;
            if self.steps.is_none() {
                train.steps = None;
            }
        }
        if self.steps.is_some() {
            train.steps = self.steps;
        }
        if let Some(seed) = self.seed {
            train.seed = seed;
            train.model.seed = seed;
        }
        let opt = &mut train.optimizer;
        if let Some(lr) = self.lr {
            opt.lr = lr;
        }
        if let Some(kind) = &self.optimizer {
            opt.kind = kind.parse::<OptimizerKind>().map_err(CliError::from)?;
        }
        if let Some(m) = self.momentum {
            opt.momentum = m;
        }
        let model = &mut train.model;
        if let Some(h) = self.hidden1 {
            model.hidden1 = h;
        }
        if let Some(h) = self.hidden2 {
            model.hidden2 = h;
        }
        if let Some(d) = self.d_proj {
            model.d_proj = d;
        }
        if let Some(t) = self.tau_init {
            model.tau_init = t;
        }
        if let Some(init) = &self.init {
            model.init = init.parse::<HeadInit>().map_err(CliError::from)?;
        }
        pipeline.validate().map_err(CliError::from)?;

        let mut encoder = EncoderConfig::default();
        if let Some(f) = self.max_frames {
            encoder.max_frames = f;
        }
        if let Some(t) = self.max_tokens {
            encoder.max_tokens = t;
        }
        if let Some(p) = &self.pooling {
            encoder.pooling = p.parse::<TextPooling>().map_err(CliError::from)?;
        }
        encoder.validate().map_err(CliError::from)?;
        let frame_scale = self.frame_scale.unwrap_or(default_scale);
        if !(frame_scale.is_finite() && frame_scale > 0.0) {
            return Err(CliError::usage(format!(
                "frame scale must be positive, got {frame_scale}"
            )));
        }
        let std = match &self.std {
            Some(s) => s.parse::<StdKind>().map_err(CliError::from)?,
            None => StdKind::default(),
        };
        Ok(RunConfig {
            pipeline,
            dim,
            encoder,
            encoder_seed: self.encoder_seed.unwrap_or(DEFAULT_ENCODER_SEED),
            frame_scale,
            holdout: self.holdout.unwrap_or(0),
            std,
        })
    }
}

/// Validated settings for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub dim: usize,
    pub encoder: EncoderConfig,
    pub encoder_seed: u64,
    pub frame_scale: f64,
    pub holdout: usize,
    pub std: StdKind,
}

impl RunConfig {
    pub fn toy_encoder(&self) -> Result<ToyEncoder, CliError> {
        Ok(ToyEncoder::new(self.dim, self.encoder_seed)?
            .with_config(self.encoder.clone())?
            .with_frame_scale(self.frame_scale)?)
    }
}
