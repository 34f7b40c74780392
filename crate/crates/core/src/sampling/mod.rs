//! Superbatch buffering, top-k selection and the batch-index stream.

mod config;
mod driver;
mod topk;
mod wire;

pub use config::{sub_batch_size, SamplerConfig};
pub use driver::{run_sampler, Plan, SamplerSummary, ScoringStrategy, Superbatch};
pub use topk::select_topk;
pub use wire::{
    parse_batch_line, read_batch_stream, BatchSink, BatchStream, SelectedBatch, StreamHeader,
    WireWriter,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("cannot select {k} of {n} items")]
    TooFew { k: usize, n: usize },
    #[error("strategy {strategy} produced a NaN score at superbatch position {position}")]
    NanScore { strategy: String, position: usize },
    #[error("NaN score at position {position}")]
    NanInput { position: usize },
    #[error("strategy {strategy} returned an invalid selection: {reason}")]
    BadSelection { strategy: String, reason: String },
    #[error("annotation stream is empty")]
    EmptyStream,
    #[error("annotation stream failed: {0}")]
    Stream(String),
    #[error("batch sink failed after {batches_written} batches: {source}")]
    Sink {
        batches_written: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("batch stream line {line}: {reason}")]
    Parse { line: usize, reason: String },
}
