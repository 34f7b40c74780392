//! Offline balanced subsampling: each concept is capped near a per-concept
//! threshold by keeping samples with probability `t / F_c`.
//!
//! Pass one counts `F_c`, the number of samples whose concept set contains
//! `c`. Pass two keeps sample `i` with probability
//! `max_{c in C_i} min(1, t / F_c)`, so any sample carrying a tail concept
//! (`F_c <= t`) always survives. The coin flip is a hash of `(seed, sample id)`,
//! which makes the kept set independent of stream order and sharding.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concept::{ConceptId, RecordError, SampleAnnotation};

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("annotation stream is empty")]
    EmptyStream,
    #[error("per-concept threshold must be at least 1")]
    BadThreshold,
    #[error("annotation stream failed: {0}")]
    Stream(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationConfig {
    pub per_concept_threshold: u64,
    pub seed: u64,
    /// Informational only; the kept size follows from the threshold.
    pub target_size: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub input_samples: u64,
    pub kept: u64,
    pub dropped_unannotated: u64,
    /// Samples containing each concept, before and after curation.
    pub before: BTreeMap<ConceptId, u64>,
    pub after: BTreeMap<ConceptId, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurationOutcome {
    pub kept_ids: Vec<String>,
    pub report: CurationReport,
}

/// Number of samples containing each concept.
pub fn concept_frequencies<'a>(
    samples: impl IntoIterator<Item = &'a SampleAnnotation>,
) -> BTreeMap<ConceptId, u64> {
    let mut freqs = BTreeMap::new();
    for s in samples {
        for c in s.concept_set() {
            *freqs.entry(c).or_default() += 1;
        }
    }
    freqs
}

/// `max_c min(1, t / F_c)` over the sample's distinct concepts; 0 without concepts.
pub fn keep_probability(set: &[ConceptId], freqs: &BTreeMap<ConceptId, u64>, threshold: u64) -> f64 {
    set.iter()
        .map(|c| {
            let f = freqs.get(c).copied().unwrap_or(0);
            if f <= threshold {
                1.0
            } else {
                threshold as f64 / f as f64
            }
        })
        .fold(0.0, f64::max)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform value in `[0, 1)` derived from the seed and sample id.
pub fn sample_uniform(seed: u64, sample_id: &str) -> f64 {
    // FNV-1a over the id bytes, then mixed with the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in sample_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mixed = splitmix64(h ^ splitmix64(seed));
    (mixed >> 11) as f64 / (1u64 << 53) as f64
}

/// Two-pass curation. `open` is called once per pass and must yield the same
/// records both times.
pub fn metaclip_curate<F, I>(mut open: F, config: &CurationConfig) -> Result<CurationOutcome, CurationError>
where
    F: FnMut() -> Result<I, CurationError>,
    I: Iterator<Item = Result<SampleAnnotation, RecordError>>,
{
    if config.per_concept_threshold == 0 {
        return Err(CurationError::BadThreshold);
    }
    let valid = |item: Result<SampleAnnotation, RecordError>| match item {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.fatal => Err(CurationError::Stream(e.to_string())),
        Err(e) => {
            log::warn!("skipping record: {e}");
            Ok(None)
        }
    };

    let mut before: BTreeMap<ConceptId, u64> = BTreeMap::new();
    let mut input_samples = 0u64;
    for item in open()? {
        let Some(sample) = valid(item)? else { continue };
        input_samples += 1;
        for c in sample.concept_set() {
            *before.entry(c).or_default() += 1;
        }
    }
    if input_samples == 0 {
        return Err(CurationError::EmptyStream);
    }

    let mut report = CurationReport {
        input_samples,
        before,
        ..CurationReport::default()
    };
    let mut kept_ids = Vec::new();
    for item in open()? {
        let Some(sample) = valid(item)? else { continue };
        let set = sample.concept_set();
        if set.is_empty() {
            report.dropped_unannotated += 1;
            continue;
        }
        let p = keep_probability(&set, &report.before, config.per_concept_threshold);
        if sample_uniform(config.seed, &sample.sample_id) < p {
            for c in set {
                *report.after.entry(c).or_default() += 1;
            }
            report.kept += 1;
            kept_ids.push(sample.sample_id);
        }
    }
    Ok(CurationOutcome { kept_ids, report })
}
