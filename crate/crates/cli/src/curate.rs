use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use cabs_core::concept::AnnotationReader;
use cabs_core::curation::{metaclip_curate, CurationConfig, CurationError};
use serde::Serialize;

use crate::inputs::{load_vocab, write_json};
use crate::manifest::RunManifest;
use crate::CurateArgs;

#[derive(Debug, Serialize)]
struct ConceptCounts {
    before: u64,
    after: u64,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    config: &'a CurationConfig,
    input_samples: u64,
    kept: u64,
    dropped_unannotated: u64,
    per_concept: BTreeMap<&'a str, ConceptCounts>,
}

pub fn cmd_curate(args: &CurateArgs, command_line: &str) -> Result<()> {
    let config = CurationConfig {
        per_concept_threshold: args.threshold,
        seed: args.seed,
        target_size: args.target_size,
    };
    let vocab = load_vocab(&args.vocab)?;
    let outcome = metaclip_curate(
        || {
            AnnotationReader::open_at(&args.data, Arc::clone(&vocab), 0)
                .map_err(|e| CurationError::Stream(e.to_string()))
        },
        &config,
    )
    .with_context(|| format!("curating {}", args.data.display()))?;

    let mut out = BufWriter::new(File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?);
    for id in &outcome.kept_ids {
        writeln!(out, "{id}")?;
    }
    out.flush()?;

    let r = &outcome.report;
    log::info!("kept {} of {} samples", r.kept, r.input_samples);
    let report_path = args.report.clone().unwrap_or_else(|| {
        let mut p = args.out.as_os_str().to_owned();
        p.push(".report.json");
        PathBuf::from(p)
    });
    let report = Report {
        config: &config,
        input_samples: r.input_samples,
        kept: r.kept,
        dropped_unannotated: r.dropped_unannotated,
        per_concept: r
            .before
            .iter()
            .map(|(&c, &before)| {
                let after = r.after.get(&c).copied().unwrap_or(0);
                (vocab.name(c), ConceptCounts { before, after })
            })
            .collect(),
    };
    write_json(&report_path, &report)?;

    let mut manifest = RunManifest::new(command_line, args)?;
    manifest.input(&args.data)?.input(&args.vocab)?.output(&args.out).output(&report_path);
    manifest.write_beside(&args.out)?;
    Ok(())
}
