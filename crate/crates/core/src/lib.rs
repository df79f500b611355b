//! Event-based filtering for short-text streams.
//!
//! Each incoming record decomposes into atomic information events (tokens,
//! links, hashtags, mentions, retweets, cooccurrences, metadata). Sliding
//! time windows over the event streams supply the stream features; every
//! slide interval a small feed-forward network is retrained from scratch
//! with retweet presence as the automatic relevance label, and newly
//! arriving records are scored against the latest published model, keeping
//! the top percentile.
//!
//! The data-parallel inner loops (feature assembly, batch gradients,
//! scoring) run on rayon by default; build with `--no-default-features`
//! for the sequential fallback. `benches/parallel_vs_sequential.rs`
//! compares the two paths.

pub mod batch;
pub mod events;
pub mod experiment;
pub mod features;
pub mod ingest;
pub mod metrics;
pub mod mlp;
pub mod pipeline;
pub mod porter;
pub mod stopwords;
pub mod synth;
pub mod text;
pub mod window;

pub use events::{map_record, AtomicEvent, EventHeader, Payload};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentMode, ExperimentOutput};
pub use features::{assemble_features, label_by_retweet, oversample, FeatureLayout, LabeledSample};
pub use ingest::{filter_language, parse_record, replay_stream, ClockMode, RawRecord, ReplayConfig};
pub use metrics::{ConfusionCounts, MetricsReport};
pub use mlp::{init_network, train, MlpModel, TrainConfig};
pub use pipeline::{
    run_filter, run_microbatch_cycle, select_top_percentile, EngineConfig, PipelineConfig,
    ScoredRecord,
};
pub use synth::{generate_stream, SynthConfig};
pub use window::{scale_normalize, SlidingWindow, WindowSnapshot};
