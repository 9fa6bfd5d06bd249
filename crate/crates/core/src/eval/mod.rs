//! Retrieval ranking, metrics and the evaluation protocols.

mod metrics;
mod protocols;

pub use metrics::{
    compute_metrics, rank_targets, rows_csv, summarize, table, RetrievalReport, StdKind,
    METRIC_NAMES,
};
pub use protocols::{
    annotator_csv, annotator_selections, annotator_split_eval, describe, kappa_csv, kappa_sweep,
    kappa_table, multi_caption_eval, style_eval, style_selection, AnnotatorSelections, KappaRow,
    Retriever, StyleRobustnessReport,
};

/// Seeds used for the writing-style robustness runs by default.
pub const DEFAULT_STYLE_SEEDS: [u64; 4] = [16, 171, 1710, 2804];
