//! Training orchestration, evaluation, persistence and export.

mod config;
mod export;
mod metrics;
mod model;
mod run;
mod train;

pub use config::{DecoderMode, TrainConfig};
pub use export::{export_embeddings, read_embeddings};
pub use metrics::{evaluate, separation_ratio, ClassMetrics, MetricsReport};
pub use model::{Model, MODEL_FORMAT_VERSION};
pub use run::{
    evaluate_model, graph_labels, k_sweep, run_pipeline, summarize_sweep, DataSource, PipelineRun,
    SweepRow,
};
pub use train::{decoder_examples, train_decoder, train_encoder, TrainHistory, MIN_IMPROVEMENT};
