use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cabs_core::analytics::{
    batch_composition, concept_adherence, word_count_stats, CaptionField, DatasetProfile,
};
use cabs_core::sampling::read_batch_stream;
use cabs_core::{ConceptVocabulary, SampleAnnotation};
use rayon::prelude::*;
use serde::Serialize;

use crate::inputs::{load_samples, load_vocab, write_csv, write_json};
use crate::manifest::RunManifest;
use crate::{AnalyzeArgs, AnalyzeWhat, FieldArg, ProfileArgs};

#[derive(Debug, Serialize)]
struct BatchReport {
    epoch: usize,
    batch_seq: usize,
    strategy: String,
    size: usize,
    unique_concepts: usize,
    max_frequency: u64,
    entropy: f64,
    histogram: BTreeMap<String, u64>,
}

#[derive(Debug, Serialize)]
struct BatchesReport {
    superbatch_size: usize,
    filter_ratio: f64,
    seed: u64,
    mean_unique_concepts: f64,
    mean_entropy: f64,
    batches: Vec<BatchReport>,
}

#[derive(Debug, Serialize)]
struct ProfileReport {
    samples: u64,
    total_annotations: u64,
    distinct_concepts: usize,
    concept_count_median: Option<f64>,
    multiplicity_median: Option<f64>,
    top_concepts: Vec<(String, u64)>,
    per_concept_counts: BTreeMap<String, u64>,
    multiplicity_histogram: BTreeMap<usize, u64>,
}

impl From<FieldArg> for CaptionField {
    fn from(f: FieldArg) -> Self {
        match f {
            FieldArg::Caption => CaptionField::Caption,
            FieldArg::Recaption => CaptionField::Recaption,
        }
    }
}

pub fn cmd_analyze(args: &AnalyzeArgs, command_line: &str) -> Result<()> {
    let vocab = load_vocab(&args.vocab)?;
    let samples = load_samples(&args.data, &vocab)?;
    let mut manifest = RunManifest::new(command_line, args)?;
    manifest.input(&args.data)?.input(&args.vocab)?;

    match args.what {
        AnalyzeWhat::Batch => {
            let Some(indices) = &args.indices else {
                bail!("--what batch needs --indices");
            };
            manifest.input(indices)?;
            analyze_batches(indices, &samples, &vocab, &args.out, args.csv.as_deref())?;
        }
        AnalyzeWhat::Dataset => {
            write_profile(&samples, &vocab, 20, &args.out, args.csv.as_deref())?;
        }
        AnalyzeWhat::Adherence => {
            let report = concept_adherence(&samples, &vocab, args.field.into(), &args.taus)?;
            write_json(&args.out, &report)?;
            if let Some(csv) = &args.csv {
                let mut rows = vec![vec!["exact".to_string(), report.exact_match_pct.to_string()]];
                rows.extend(
                    report
                        .partial_match_pct
                        .iter()
                        .map(|(t, p)| vec![t.clone(), p.to_string()]),
                );
                write_csv(csv, &["tau", "match_pct"], rows)?;
            }
        }
        AnalyzeWhat::Words => {
            let stats = word_count_stats(&samples, args.field.into());
            write_json(&args.out, &stats)?;
            if let Some(csv) = &args.csv {
                let rows = stats.histogram.iter().map(|(w, n)| vec![w.to_string(), n.to_string()]);
                write_csv(csv, &["words", "samples"], rows)?;
            }
        }
    }
    manifest.output(&args.out);
    if let Some(csv) = &args.csv {
        manifest.output(csv);
    }
    manifest.write_beside(&args.out)?;
    Ok(())
}

pub fn cmd_profile(args: &ProfileArgs, command_line: &str) -> Result<()> {
    let vocab = load_vocab(&args.vocab)?;
    let samples = load_samples(&args.data, &vocab)?;
    write_profile(&samples, &vocab, args.top, &args.out, args.csv.as_deref())?;
    let mut manifest = RunManifest::new(command_line, args)?;
    manifest.input(&args.data)?.input(&args.vocab)?.output(&args.out);
    if let Some(csv) = &args.csv {
        manifest.output(csv);
    }
    manifest.write_beside(&args.out)?;
    Ok(())
}

fn analyze_batches(
    indices: &Path,
    samples: &[SampleAnnotation],
    vocab: &ConceptVocabulary,
    out: &Path,
    csv: Option<&Path>,
) -> Result<()> {
    let file = File::open(indices).with_context(|| format!("opening {}", indices.display()))?;
    let stream = read_batch_stream(BufReader::new(file))
        .with_context(|| format!("parsing {}", indices.display()))?;
    let mut batches = Vec::with_capacity(stream.batches.len());
    for batch in &stream.batches {
        let members = batch
            .indices
            .iter()
            .map(|&i| {
                samples.get(i as usize).with_context(|| {
                    format!("batch {}/{} refers to sample {i} of {}", batch.epoch, batch.batch_seq, samples.len())
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let comp = batch_composition(members);
        batches.push(BatchReport {
            epoch: batch.epoch,
            batch_seq: batch.batch_seq,
            strategy: batch.strategy.clone(),
            size: batch.indices.len(),
            unique_concepts: comp.unique_concepts,
            max_frequency: comp.max_frequency,
            entropy: comp.entropy,
            histogram: comp
                .concept_histogram
                .iter()
                .map(|(&c, &n)| (vocab.name(c).to_string(), n))
                .collect(),
        });
    }
    let n = batches.len().max(1) as f64;
    let report = BatchesReport {
        superbatch_size: stream.header.superbatch_size,
        filter_ratio: stream.header.filter_ratio,
        seed: stream.header.seed,
        mean_unique_concepts: batches.iter().map(|b| b.unique_concepts as f64).sum::<f64>() / n,
        mean_entropy: batches.iter().map(|b| b.entropy).sum::<f64>() / n,
        batches,
    };
    write_json(out, &report)?;
    if let Some(csv) = csv {
        let rows = report.batches.iter().flat_map(|b| {
            b.histogram.iter().map(move |(name, count)| {
                vec![
                    b.epoch.to_string(),
                    b.batch_seq.to_string(),
                    b.strategy.clone(),
                    name.clone(),
                    count.to_string(),
                ]
            })
        });
        write_csv(csv, &["epoch", "batch_seq", "strategy", "concept", "count"], rows)?;
    }
    Ok(())
}

fn write_profile(
    samples: &[SampleAnnotation],
    vocab: &ConceptVocabulary,
    top: usize,
    out: &Path,
    csv: Option<&Path>,
) -> Result<()> {
    let profile = samples
        .par_chunks(8192)
        .map(|chunk| {
            let mut p = DatasetProfile::default();
            chunk.iter().for_each(|s| p.add(s));
            p
        })
        .reduce(DatasetProfile::default, |a, b| a.merge(&b));
    let name = |c| vocab.name(c).to_string();
    let report = ProfileReport {
        samples: profile.samples,
        total_annotations: profile.total_annotations,
        distinct_concepts: profile.per_concept_counts.len(),
        concept_count_median: profile.concept_count_median(),
        multiplicity_median: profile.multiplicity_median(),
        top_concepts: profile.top_concepts(top).into_iter().map(|(c, n)| (name(c), n)).collect(),
        per_concept_counts: profile.per_concept_counts.iter().map(|(&c, &n)| (name(c), n)).collect(),
        multiplicity_histogram: profile.multiplicity_histogram.clone(),
    };
    write_json(out, &report)?;
    if let Some(csv) = csv {
        let rows = report
            .multiplicity_histogram
            .iter()
            .map(|(k, n)| vec![k.to_string(), n.to_string()]);
        write_csv(csv, &["multiplicity", "samples"], rows)?;
    }
    Ok(())
}
