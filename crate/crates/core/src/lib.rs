//! Concept-aware online batch sampling.
//!
//! Samples carry concept annotations (interned [`ConceptId`]s). A sampler buffers
//! a superbatch of `B` samples, scores them with a [`ScoringStrategy`] and keeps a
//! sub-batch of `b = round((1 - f) * B)` samples. The crate also ships the
//! supporting pieces of the data pipeline: weighted box fusion for multi-resolution
//! detections, an offline balanced-curation baseline and composition analytics.

pub mod analytics;
pub mod boxfusion;
pub mod concept;
pub mod curation;
pub mod sampling;
pub mod strategies;
pub mod synth;

pub use concept::{BoundingBox, ConceptEntry, ConceptId, ConceptVocabulary, SampleAnnotation};
pub use sampling::{
    run_sampler, select_topk, Plan, SamplerConfig, SamplerSummary, ScoringStrategy,
    SelectedBatch, Superbatch,
};
pub use strategies::{DmParams, DmStrategy, FmStrategy, GainVariant, IidStrategy};
