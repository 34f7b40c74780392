use std::fs::File;
use std::io::BufWriter;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use cabs_core::concept::AnnotationReader;
use cabs_core::sampling::{SamplingError, WireWriter};
use cabs_core::strategies::strategy_by_name;
use cabs_core::{run_sampler, DmParams, SamplerConfig, SamplerSummary};

use crate::inputs::load_vocab;
use crate::manifest::RunManifest;
use crate::SampleArgs;

/// Runs the sampler over `--data` and writes the batch-index stream to `--out`.
pub fn cmd_sample(args: &SampleArgs, command_line: &str) -> Result<SamplerSummary> {
    let config = SamplerConfig {
        superbatch_size: args.superbatch_size,
        filter_ratio: args.filter_ratio,
        seed: args.seed,
        epochs: args.epochs,
        shuffle_buffer: args.shuffle_buffer,
    };
    config.validate().context("invalid sampler flags")?;
    let params = DmParams {
        max_concept_frequency: args.max_concept_frequency,
        min_samples_concept: args.min_samples_concept,
        ..DmParams::default()
    };
    params.validate().context("invalid DM flags")?;
    if !args.data.is_file() {
        bail!("annotation file {} does not exist", args.data.display());
    }
    let vocab = load_vocab(&args.vocab)?;
    let strategy = strategy_by_name(args.strategy.as_str(), params).expect("clap restricts names");

    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut sink = WireWriter::new(BufWriter::new(file));
    let data = args.data.clone();
    let summary = run_sampler(
        |_epoch| {
            AnnotationReader::open_at(&data, Arc::clone(&vocab), 0)
                .map_err(|e| SamplingError::Stream(e.to_string()))
        },
        &config,
        strategy.as_ref(),
        &mut sink,
    )
    .with_context(|| format!("sampling {}", args.data.display()))?;
    drop(sink);

    log::info!(
        "{} superbatches, {} of {} samples selected, {} skipped, {:.0} samples/s",
        summary.superbatches,
        summary.samples_selected,
        summary.samples_seen,
        summary.skipped_records,
        summary.samples_per_second()
    );
    let mut manifest = RunManifest::new(command_line, args)?;
    manifest.input(&args.data)?.input(&args.vocab)?.output(&args.out);
    manifest.write_beside(&args.out)?;
    Ok(summary)
}
