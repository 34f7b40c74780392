use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use cabs_core::concept::ingest_annotations;
use cabs_core::{ConceptVocabulary, SampleAnnotation};
use serde::Serialize;

pub fn load_vocab(path: &Path) -> Result<Arc<ConceptVocabulary>> {
    let vocab = ConceptVocabulary::load(path)
        .with_context(|| format!("loading vocabulary {}", path.display()))?;
    log::info!("vocabulary: {} concepts", vocab.len());
    Ok(Arc::new(vocab))
}

/// All well-formed records; malformed ones are logged and skipped, I/O
/// failures abort.
pub fn load_samples(path: &Path, vocab: &Arc<ConceptVocabulary>) -> Result<Vec<SampleAnnotation>> {
    let reader = ingest_annotations(path, Arc::clone(vocab))
        .with_context(|| format!("opening {}", path.display()))?;
    let mut samples = Vec::new();
    for item in reader {
        match item {
            Ok(s) => samples.push(s),
            Err(e) if e.fatal => {
                return Err(e).with_context(|| format!("reading {}", path.display()));
            }
            Err(e) => log::warn!("{}: {e}", path.display()),
        }
    }
    Ok(samples)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// CSV with a header row; fields are quoted when needed.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let fields: Vec<String> = row.iter().map(|f| csv_field(f)).collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
