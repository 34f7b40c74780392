use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{normalize_name, ConceptError};

/// Index of a concept in its [`ConceptVocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(pub u32);

impl ConceptId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Ordered set of canonical concept names with their global counts.
///
/// Immutable once built; share it behind an `Arc` across readers.
#[derive(Debug, Clone, Default)]
pub struct ConceptVocabulary {
    names: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, ConceptId>,
}

impl ConceptVocabulary {
    /// Builds a vocabulary from `(name, count)` pairs in id order. Names are
    /// normalized; two names that normalize to the same string are an error.
    pub fn from_entries<I, S>(entries: I) -> Result<Self, ConceptError>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: AsRef<str>,
    {
        let mut vocab = Self::default();
        for (raw, count) in entries {
            vocab.push(raw.as_ref(), count)?;
        }
        Ok(vocab)
    }

    fn push(&mut self, raw: &str, count: u64) -> Result<ConceptId, ConceptError> {
        let name = normalize_name(raw);
        let id = ConceptId(self.names.len() as u32);
        if let Some(prev) = self.index.get(&name) {
            return Err(ConceptError::DuplicateName {
                name,
                first: prev.index(),
                second: id.index(),
            });
        }
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.counts.push(count);
        Ok(id)
    }

    /// Reads the `<name>\t<count>` vocabulary format.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConceptError> {
        let path = path.as_ref();
        let io_err = |source| ConceptError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::open(path).map_err(io_err)?;
        let mut vocab = Self::default();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err)?;
            if line.is_empty() {
                continue;
            }
            let line_no = n + 1;
            let (name, count) =
                line.rsplit_once('\t')
                    .ok_or_else(|| ConceptError::VocabularyFormat {
                        line: line_no,
                        reason: "missing tab separator".into(),
                    })?;
            let count = count
                .trim()
                .parse::<u64>()
                .map_err(|e| ConceptError::VocabularyFormat {
                    line: line_no,
                    reason: format!("bad count {count:?}: {e}"),
                })?;
            if normalize_name(name).is_empty() {
                return Err(ConceptError::VocabularyFormat {
                    line: line_no,
                    reason: "empty concept name".into(),
                });
            }
            vocab.push(name, count)?;
        }
        Ok(vocab)
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        for (name, count) in self.names.iter().zip(&self.counts) {
            writeln!(out, "{name}\t{count}")?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Looks up a raw (unnormalized) name.
    pub fn id_of(&self, raw: &str) -> Option<ConceptId> {
        self.index
            .get(raw)
            .or_else(|| self.index.get(&normalize_name(raw)))
            .copied()
    }

    /// Panics if `id` is not in the vocabulary.
    pub fn name(&self, id: ConceptId) -> &str {
        &self.names[id.index()]
    }

    pub fn count(&self, id: ConceptId) -> u64 {
        self.counts[id.index()]
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        id.index() < self.names.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ConceptId, &str, u64)> + '_ {
        self.names
            .iter()
            .zip(&self.counts)
            .enumerate()
            .map(|(i, (n, &c))| (ConceptId(i as u32), n.as_str(), c))
    }
}
