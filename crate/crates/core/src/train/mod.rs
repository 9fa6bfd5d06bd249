//! Projection heads, contrastive objective and the optimization loop.

mod loss;
mod model;
mod optim;
mod trainer;

pub use loss::{infonce_t2v, infonce_total, infonce_total_var, infonce_v2t};
pub use model::{
    HeadInit, HeadKind, Model, ModelConfig, ProjectionHead, DEFAULT_TAU, TAU_MAX, TAU_MIN,
};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use trainer::{
    trace_csv, train_loop, train_step, write_trace_csv, TraceRow, TrainConfig, TrainOutcome,
    TrainingData, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS,
};
