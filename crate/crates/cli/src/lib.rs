//! Command surface for the `cabs` binary. Every command writes its outputs
//! plus a `<output>.manifest.json` describing how they were produced.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod analyze;
mod curate;
mod fuse;
mod inputs;
pub mod manifest;
mod sample;
mod synth;

pub use analyze::{cmd_analyze, cmd_profile};
pub use curate::cmd_curate;
pub use fuse::cmd_fuse;
pub use manifest::RunManifest;
pub use sample::cmd_sample;
pub use synth::cmd_synth;

#[derive(Debug, Parser)]
#[command(name = "cabs", version, about = "Concept-aware online batch sampling")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select sub-batches from an annotation file and write the batch-index stream.
    Sample(SampleArgs),
    /// Composition reports over batches, the dataset, or captions.
    Analyze(AnalyzeArgs),
    /// Dataset profile: instance counts and multiplicity distribution.
    Profile(ProfileArgs),
    /// Weighted box fusion over multi-resolution detections.
    FuseBoxes(FuseArgs),
    /// Offline balanced subsampling with per-concept caps.
    CurateMetaclip(CurateArgs),
    /// Generate a Zipf-distributed synthetic annotation pool.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyName {
    Iid,
    Dm,
    Fm,
    #[value(name = "dm-alg2")]
    DmAlg2,
}

impl StrategyName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Iid => "iid",
            Self::Dm => "dm",
            Self::Fm => "fm",
            Self::DmAlg2 => "dm-alg2",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    /// Annotation file (JSON lines).
    #[arg(long)]
    pub data: PathBuf,
    /// Vocabulary file (`name<TAB>count` per line).
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long, value_enum, default_value_t = StrategyName::Dm)]
    pub strategy: StrategyName,
    #[arg(long, default_value_t = 20480)]
    pub superbatch_size: usize,
    #[arg(long, default_value_t = 0.8)]
    pub filter_ratio: f64,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Shuffle the stream through a seeded buffer of this many samples.
    #[arg(long)]
    pub shuffle_buffer: Option<usize>,
    #[arg(long, default_value_t = 40)]
    pub max_concept_frequency: u32,
    #[arg(long, default_value_t = 1)]
    pub min_samples_concept: u32,
    /// Batch-index output file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyzeWhat {
    Batch,
    Dataset,
    Adherence,
    Words,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldArg {
    Caption,
    Recaption,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long, value_enum)]
    pub what: AnalyzeWhat,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Batch-index stream (required for `--what batch`).
    #[arg(long)]
    pub indices: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FieldArg::Caption)]
    pub field: FieldArg,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.6, 0.7, 0.8])]
    pub taus: Vec<f64>,
    /// JSON report.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional histogram CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProfileArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// How many of the most frequent concepts to list.
    #[arg(long, default_value_t = 20)]
    pub top: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Clip,
    Linear,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FuseArgs {
    /// Detections, one JSON object per image per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.29)]
    pub iou_threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    pub post_threshold: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Clip)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 4)]
    pub n_sources: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CurateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Per-concept sample threshold t.
    #[arg(long)]
    pub threshold: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub target_size: Option<u64>,
    /// Kept sample ids, one per line.
    #[arg(long)]
    pub out: PathBuf,
    /// Report JSON (default: `<out>.report.json`).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 100_000)]
    pub num_samples: usize,
    #[arg(long, default_value_t = 2000)]
    pub num_concepts: usize,
    #[arg(long, default_value_t = 1.2)]
    pub exponent: f64,
    /// Poisson mean of instances beyond the first.
    #[arg(long, default_value_t = 2.0)]
    pub mean_extra: f64,
    /// Probability that an extra instance repeats a concept already in the sample.
    #[arg(long, default_value_t = 0.0)]
    pub repeat_prob: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub captions: bool,
    /// Annotation output (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Vocabulary output.
    #[arg(long)]
    pub vocab_out: PathBuf,
}

/// Runs one parsed command. `argv` is recorded verbatim in the manifest.
pub fn run(cli: &Cli, argv: &[String]) -> Result<()> {
    let command_line = manifest::command_line(argv);
    match &cli.command {
        Command::Sample(a) => cmd_sample(a, &command_line).map(|_| ()),
        Command::Analyze(a) => cmd_analyze(a, &command_line),
        Command::Profile(a) => cmd_profile(a, &command_line),
        Command::FuseBoxes(a) => cmd_fuse(a, &command_line),
        Command::CurateMetaclip(a) => cmd_curate(a, &command_line),
        Command::Synth(a) => cmd_synth(a, &command_line),
    }
}

/// Caps rayon's global pool; a second call is ignored.
pub fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
}
