//! Concept vocabulary and per-sample annotation model.

mod dedup;
mod ingest;
mod lemma;
mod normalize;
mod vocab;

pub use dedup::{semantic_dedup, EmbeddingVector, MergeGroup};
pub use ingest::{
    ingest_annotations, parse_annotation_line, AnnotationReader, IngestStats, RecordError,
};
pub use lemma::lemmatize_plural;
pub use normalize::normalize_name;
pub use vocab::{ConceptId, ConceptVocabulary};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConceptError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("vocabulary line {line}: {reason}")]
    VocabularyFormat { line: usize, reason: String },
    #[error("duplicate concept name {name:?} after normalization (ids {first} and {second})")]
    DuplicateName {
        name: String,
        first: usize,
        second: usize,
    },
    #[error("embedding {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("{names} names but {vectors} vectors")]
    LengthMismatch { names: usize, vectors: usize },
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("similarity threshold {0} outside (0, 1]")]
    BadThreshold(f64),
}

/// An axis-aligned box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub concept: ConceptId,
    pub score: f64,
}

impl BoundingBox {
    /// Builds a box, rejecting inverted corners, coordinates outside `[0, 1]`
    /// and scores outside `[0, 1]`.
    pub fn new(coords: [f64; 4], concept: ConceptId, score: f64) -> Option<Self> {
        let [x1, y1, x2, y2] = coords;
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(coords.iter().all(|&v| unit(v)) && unit(score) && x1 <= x2 && y1 <= y2) {
            return None;
        }
        Some(Self {
            x1,
            y1,
            x2,
            y2,
            concept,
            score,
        })
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1).max(0.0) * (self.y2 - self.y1).max(0.0)
    }
}

/// One detected concept instance within a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConceptEntry {
    pub id: ConceptId,
    pub score: f64,
    pub bbox: Option<[f64; 4]>,
}

/// A single image-text record and its concept annotations.
///
/// `concepts` keeps one entry per detected instance, so the same id may repeat.
/// Use [`SampleAnnotation::concept_set`] for the de-duplicated set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleAnnotation {
    pub sample_id: String,
    pub concepts: Vec<ConceptEntry>,
    pub caption: Option<String>,
    pub recaption: Option<String>,
}

impl SampleAnnotation {
    pub fn new(sample_id: impl Into<String>, ids: &[ConceptId]) -> Self {
        Self {
            sample_id: sample_id.into(),
            concepts: ids
                .iter()
                .map(|&id| ConceptEntry {
                    id,
                    score: 1.0,
                    bbox: None,
                })
                .collect(),
            caption: None,
            recaption: None,
        }
    }

    /// Sorted, de-duplicated concept ids.
    pub fn concept_set(&self) -> Vec<ConceptId> {
        let mut ids: Vec<ConceptId> = self.concepts.iter().map(|e| e.id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Number of concept instances, repeats included.
    pub fn instance_count(&self) -> usize {
        self.concepts.len()
    }

    pub fn boxes(&self) -> Vec<BoundingBox> {
        self.concepts
            .iter()
            .filter_map(|e| {
                let [x1, y1, x2, y2] = e.bbox?;
                Some(BoundingBox {
                    x1,
                    y1,
                    x2,
                    y2,
                    concept: e.id,
                    score: e.score,
                })
            })
            .collect()
    }

    /// Serializes into the annotation line format (no trailing newline).
    pub fn to_json_line(&self, vocab: &ConceptVocabulary) -> String {
        let concepts: Vec<_> = self
            .concepts
            .iter()
            .map(|e| ingest::WireConcept {
                name: vocab.name(e.id).to_string(),
                score: e.score,
                bbox: e.bbox,
            })
            .collect();
        let record = ingest::WireRecord {
            id: self.sample_id.clone(),
            concepts,
            caption: self.caption.clone(),
            recaption: self.recaption.clone(),
        };
        serde_json::to_string(&record).expect("annotation record serializes")
    }
}
