use std::collections::HashSet;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::wire::{BatchSink, SelectedBatch, StreamHeader};
use super::{select_topk, sub_batch_size, SamplerConfig, SamplingError};
use crate::concept::{RecordError, SampleAnnotation};

/// A buffered window of consecutive samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Superbatch {
    pub samples: Vec<SampleAnnotation>,
    /// Global ordinal of each sample in the (unshuffled) source stream.
    pub origin_indices: Vec<u64>,
    pub epoch: usize,
}

impl Superbatch {
    /// Builds a superbatch whose ordinals are `0..samples.len()`.
    pub fn from_samples(samples: Vec<SampleAnnotation>) -> Self {
        let origin_indices = (0..samples.len() as u64).collect();
        Self {
            samples,
            origin_indices,
            epoch: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// What a strategy hands back for one superbatch.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    /// One score per superbatch position; the driver keeps the top `k`.
    Scores(Vec<f64>),
    /// Superbatch positions chosen by the strategy itself, exactly `k` of them.
    Selection(Vec<usize>),
}

/// A sample-scoring heuristic.
///
/// Stateless strategies score every sample independently of the others'
/// selection and return [`Plan::Scores`]. Stateful ones condition on what
/// they already picked within the current superbatch and return
/// [`Plan::Selection`]; no state may survive across superbatches.
pub trait ScoringStrategy: Send + Sync {
    fn name(&self) -> &str;
    fn is_stateful(&self) -> bool;
    fn plan(&self, superbatch: &Superbatch, k: usize) -> Result<Plan, SamplingError>;
}

/// Runs a strategy on one superbatch and returns the chosen positions.
pub(crate) fn select_positions(
    strategy: &dyn ScoringStrategy,
    superbatch: &Superbatch,
    k: usize,
) -> Result<Vec<usize>, SamplingError> {
    let n = superbatch.len();
    if k > n {
        return Err(SamplingError::TooFew { k, n });
    }
    let bad = |reason: String| SamplingError::BadSelection {
        strategy: strategy.name().to_string(),
        reason,
    };
    match strategy.plan(superbatch, k)? {
        Plan::Scores(scores) => {
            if scores.len() != n {
                return Err(bad(format!("{} scores for {n} samples", scores.len())));
            }
            select_topk(&scores, k).map_err(|e| match e {
                SamplingError::NanInput { position } => SamplingError::NanScore {
                    strategy: strategy.name().to_string(),
                    position,
                },
                other => other,
            })
        }
        Plan::Selection(positions) => {
            if positions.len() != k {
                return Err(bad(format!("{} positions, expected {k}", positions.len())));
            }
            let mut seen = HashSet::with_capacity(k);
            for &p in &positions {
                if p >= n || !seen.insert(p) {
                    return Err(bad(format!("position {p} out of range or repeated")));
                }
            }
            Ok(positions)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SamplerSummary {
    pub superbatches: usize,
    pub samples_seen: usize,
    pub samples_selected: usize,
    pub skipped_records: usize,
    pub wall_time: Duration,
}

impl SamplerSummary {
    pub fn samples_per_second(&self) -> f64 {
        self.samples_seen as f64 / self.wall_time.as_secs_f64().max(1e-9)
    }
}

/// Seeded streaming shuffle with a bounded buffer.
struct BufferShuffle<I> {
    inner: I,
    buffer: Vec<(u64, SampleAnnotation)>,
    capacity: usize,
    rng: ChaCha8Rng,
    drained: bool,
}

impl<I: Iterator<Item = (u64, SampleAnnotation)>> Iterator for BufferShuffle<I> {
    type Item = (u64, SampleAnnotation);

    fn next(&mut self) -> Option<Self::Item> {
        if !self.drained {
            while self.buffer.len() < self.capacity {
                match self.inner.next() {
                    Some(item) => self.buffer.push(item),
                    None => break,
                }
            }
            if let Some(item) = self.inner.next() {
                let j = self.rng.random_range(0..self.buffer.len());
                return Some(std::mem::replace(&mut self.buffer[j], item));
            }
            self.drained = true;
        }
        if self.buffer.is_empty() {
            return None;
        }
        let j = self.rng.random_range(0..self.buffer.len());
        Some(self.buffer.swap_remove(j))
    }
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Reads records, assigns ordinals and chunks them into superbatches.
fn produce_superbatches<I>(
    stream: I,
    config: &SamplerConfig,
    epoch: usize,
    tx: mpsc::SyncSender<Result<Superbatch, SamplingError>>,
) -> usize
where
    I: Iterator<Item = Result<SampleAnnotation, RecordError>>,
{
    let mut skipped = 0usize;
    let mut fatal: Option<SamplingError> = None;
    let mut ordinal = 0u64;
    let records = stream.map_while(|item| match item {
        Ok(sample) => Some(Some(sample)),
        Err(e) if e.fatal => {
            fatal = Some(SamplingError::Stream(e.to_string()));
            None
        }
        Err(e) => {
            log::warn!("skipping record: {e}");
            skipped += 1;
            Some(None)
        }
    });
    let numbered = records.flatten().map(|s| {
        let o = ordinal;
        ordinal += 1;
        (o, s)
    });
    let mut ordered: Box<dyn Iterator<Item = (u64, SampleAnnotation)>> = match config.shuffle_buffer {
        Some(capacity) => Box::new(BufferShuffle {
            inner: numbered,
            buffer: Vec::with_capacity(capacity),
            capacity,
            rng: epoch_rng(config.seed, epoch),
            drained: false,
        }),
        None => Box::new(numbered),
    };

    let b = config.superbatch_size;
    loop {
        let mut batch = Superbatch {
            samples: Vec::with_capacity(b),
            origin_indices: Vec::with_capacity(b),
            epoch,
        };
        for (o, s) in ordered.by_ref().take(b) {
            batch.origin_indices.push(o);
            batch.samples.push(s);
        }
        if batch.is_empty() {
            break;
        }
        if tx.send(Ok(batch)).is_err() {
            break;
        }
    }
    drop(ordered);
    if let Some(e) = fatal {
        let _ = tx.send(Err(e));
    }
    skipped
}

/// Streams superbatches through `strategy` and writes one [`SelectedBatch`]
/// per superbatch per epoch to `sink`.
///
/// `open(epoch)` must yield the annotation stream for that epoch. Reading the
/// next superbatch overlaps with selection on the current one. With the same
/// stream, config and strategy the emitted sequence is identical run to run.
pub fn run_sampler<F, I>(
    mut open: F,
    config: &SamplerConfig,
    strategy: &dyn ScoringStrategy,
    sink: &mut dyn BatchSink,
) -> Result<SamplerSummary, SamplingError>
where
    F: FnMut(usize) -> Result<I, SamplingError>,
    I: Iterator<Item = Result<SampleAnnotation, RecordError>> + Send,
{
    config.validate()?;
    let started = Instant::now();
    let mut summary = SamplerSummary::default();
    let mut batches_written = 0usize;
    let sink_err = |source, batches_written| SamplingError::Sink {
        batches_written,
        source,
    };
    sink.begin(&StreamHeader {
        superbatch_size: config.superbatch_size,
        filter_ratio: config.filter_ratio,
        seed: config.seed,
    })
    .map_err(|e| sink_err(e, 0))?;

    for epoch in 0..config.epochs {
        let stream = open(epoch)?;
        let (tx, rx) = mpsc::sync_channel(1);
        let mut batch_seq = 0usize;
        let outcome = std::thread::scope(|scope| {
            let reader = scope.spawn(|| produce_superbatches(stream, config, epoch, tx));
            let mut result = Ok(());
            for item in rx.iter() {
                let superbatch = match item {
                    Ok(sb) => sb,
                    Err(e) => {
                        result = Err(e);
                        break;
                    }
                };
                let k = sub_batch_size(superbatch.len(), config.filter_ratio);
                let positions = match select_positions(strategy, &superbatch, k) {
                    Ok(p) => p,
                    Err(e) => {
                        result = Err(e);
                        break;
                    }
                };
                let batch = SelectedBatch {
                    epoch,
                    batch_seq,
                    strategy: strategy.name().to_string(),
                    indices: positions.iter().map(|&p| superbatch.origin_indices[p]).collect(),
                };
                if let Err(e) = sink.emit(&batch) {
                    result = Err(sink_err(e, batches_written));
                    break;
                }
                batches_written += 1;
                batch_seq += 1;
                summary.superbatches += 1;
                summary.samples_seen += superbatch.len();
                summary.samples_selected += k;
            }
            drop(rx);
            let skipped = reader.join().expect("superbatch reader panicked");
            result.map(|()| skipped)
        });
        summary.skipped_records += outcome?;
        if epoch == 0 && summary.samples_seen == 0 {
            return Err(SamplingError::EmptyStream);
        }
        sink.end_epoch(epoch)
            .map_err(|e| sink_err(e, batches_written))?;
    }
    summary.wall_time = started.elapsed();
    Ok(summary)
}
