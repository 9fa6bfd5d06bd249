//! Writing-style agnostic text-video retrieval.
//!
//! Video frames attend over a frozen corpus of prompt embeddings built from
//! mined activity phrases; the distilled video and the caption are then
//! projected into a shared space and trained with a bidirectional
//! contrastive loss.

pub mod distill;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod numerics;
pub mod pipeline;
pub mod rng;
pub mod train;
pub mod vcd;

#[cfg(test)]
pub(crate) mod testing;

pub use distill::{DistilledVideo, KnowledgeCorpus};
pub use encoders::{
    BackendKind, Encoder, PrecomputedEncoder, TextFeatures, ToyEncoder, VideoFeatures,
};
pub use error::{Error, ErrorKind, Result};
pub use eval::{RetrievalReport, Retriever, StyleRobustnessReport};
pub use ingest::{Caption, Dataset, Split, TensorBlob, VideoEntry, VideoSource};
pub use numerics::Matrix;
pub use pipeline::{FittedPipeline, PipelineConfig};
pub use train::{Model, ModelConfig, TrainConfig};
pub use vcd::{ActivityPhrase, ContentDictionary, VocabEntry};
