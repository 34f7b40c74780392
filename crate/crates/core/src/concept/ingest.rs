use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BoundingBox, ConceptEntry, ConceptError, ConceptId, ConceptVocabulary, SampleAnnotation};

#[derive(Serialize, Deserialize)]
pub(crate) struct WireConcept {
    pub name: String,
    pub score: f64,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct WireRecord {
    pub id: String,
    pub concepts: Vec<WireConcept>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recaption: Option<String>,
}

/// A record-level problem. The stream keeps going after one of these unless
/// it wraps an I/O failure.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct RecordError {
    /// 1-based physical line number.
    pub line: usize,
    pub message: String,
    pub fatal: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub records: usize,
    pub malformed: usize,
    /// Concept entries dropped because the vocabulary does not know the name.
    pub unknown_concepts: usize,
}

/// Parses one annotation line. Unknown concept names are dropped and returned
/// alongside the record.
pub fn parse_annotation_line(
    line: &str,
    vocab: &ConceptVocabulary,
) -> Result<(SampleAnnotation, Vec<String>), String> {
    let record: WireRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let mut unknown = Vec::new();
    let mut concepts = Vec::with_capacity(record.concepts.len());
    for c in record.concepts {
        if !(0.0..=1.0).contains(&c.score) {
            return Err(format!("concept {:?} has score {} outside [0, 1]", c.name, c.score));
        }
        if let Some(coords) = c.bbox {
            if BoundingBox::new(coords, ConceptId(0), c.score).is_none() {
                return Err(format!("concept {:?} has invalid box {coords:?}", c.name));
            }
        }
        match vocab.id_of(&c.name) {
            Some(id) => concepts.push(ConceptEntry {
                id,
                score: c.score,
                bbox: c.bbox,
            }),
            None => unknown.push(c.name),
        }
    }
    Ok((
        SampleAnnotation {
            sample_id: record.id,
            concepts,
            caption: record.caption,
            recaption: record.recaption,
        },
        unknown,
    ))
}

/// Streaming reader over a newline-delimited annotation file.
pub struct AnnotationReader<R> {
    input: R,
    vocab: Arc<ConceptVocabulary>,
    line_no: usize,
    buf: String,
    stats: IngestStats,
    done: bool,
}

/// Opens `path` for streaming ingestion.
pub fn ingest_annotations(
    path: impl AsRef<Path>,
    vocab: Arc<ConceptVocabulary>,
) -> Result<AnnotationReader<BufReader<File>>, ConceptError> {
    AnnotationReader::open_at(path, vocab, 0)
}

impl AnnotationReader<BufReader<File>> {
    /// Opens `path` and skips the first `skip_lines` physical lines, so a
    /// consumer can resume where an earlier stream stopped.
    pub fn open_at(
        path: impl AsRef<Path>,
        vocab: Arc<ConceptVocabulary>,
        skip_lines: usize,
    ) -> Result<Self, ConceptError> {
        let path = path.as_ref();
        let io_err = |source| ConceptError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = File::open(path).map_err(io_err)?;
        let mut reader = Self::new(BufReader::with_capacity(1 << 20, file), vocab);
        let mut scratch = Vec::new();
        for _ in 0..skip_lines {
            scratch.clear();
            if reader.input.read_until(b'\n', &mut scratch).map_err(io_err)? == 0 {
                break;
            }
            reader.line_no += 1;
        }
        Ok(reader)
    }
}

impl<R: BufRead> AnnotationReader<R> {
    pub fn new(input: R, vocab: Arc<ConceptVocabulary>) -> Self {
        Self {
            input,
            vocab,
            line_no: 0,
            buf: String::new(),
            stats: IngestStats::default(),
            done: false,
        }
    }

    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }

    /// Number of physical lines consumed so far; pass it to
    /// [`AnnotationReader::open_at`] to resume.
    pub fn lines_consumed(&self) -> usize {
        self.line_no
    }

    /// Drains the stream, logging and skipping bad records.
    pub fn collect_valid(self) -> (Vec<SampleAnnotation>, Vec<RecordError>) {
        let mut ok = Vec::new();
        let mut errors = Vec::new();
        for item in self {
            match item {
                Ok(s) => ok.push(s),
                Err(e) => {
                    log::warn!("skipping record: {e}");
                    errors.push(e);
                }
            }
        }
        (ok, errors)
    }
}

impl<R: BufRead> Iterator for AnnotationReader<R> {
    type Item = Result<SampleAnnotation, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            let read = match self.input.read_line(&mut self.buf) {
                Ok(n) => n,
                Err(e) => {
                    self.done = true;
                    return Some(Err(RecordError {
                        line: self.line_no + 1,
                        message: e.to_string(),
                        fatal: true,
                    }));
                }
            };
            if read == 0 {
                self.done = true;
                break;
            }
            self.line_no += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                continue;
            }
            return Some(match parse_annotation_line(line, &self.vocab) {
                Ok((sample, unknown)) => {
                    self.stats.records += 1;
                    if !unknown.is_empty() {
                        self.stats.unknown_concepts += unknown.len();
                        log::warn!(
                            "line {}: unknown concepts {:?} dropped from {}",
                            self.line_no,
                            unknown,
                            sample.sample_id
                        );
                    }
                    Ok(sample)
                }
                Err(message) => {
                    self.stats.malformed += 1;
                    Err(RecordError {
                        line: self.line_no,
                        message,
                        fatal: false,
                    })
                }
            });
        }
        None
    }
}
