//! Batch and dataset composition statistics and caption adherence metrics.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concept::{lemmatize_plural, normalize_name, ConceptId, ConceptVocabulary, SampleAnnotation};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("unknown caption field {0:?} (expected caption or recaption)")]
    UnknownCaptionField(String),
    #[error("similarity threshold {0} outside (0, 1]")]
    BadThreshold(f64),
}

/// Concept histogram of one sub-batch over de-duplicated per-sample sets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchComposition {
    pub unique_concepts: usize,
    pub concept_histogram: BTreeMap<ConceptId, u64>,
    pub max_frequency: u64,
    /// Natural-log Shannon entropy of the normalized histogram.
    pub entropy: f64,
}

pub fn batch_composition<'a>(samples: impl IntoIterator<Item = &'a SampleAnnotation>) -> BatchComposition {
    let mut histogram: BTreeMap<ConceptId, u64> = BTreeMap::new();
    for s in samples {
        for c in s.concept_set() {
            *histogram.entry(c).or_default() += 1;
        }
    }
    let total: u64 = histogram.values().sum();
    let entropy = if total == 0 {
        0.0
    } else {
        let total = total as f64;
        -histogram
            .values()
            .map(|&n| {
                let p = n as f64 / total;
                p * p.ln()
            })
            .sum::<f64>()
    };
    BatchComposition {
        unique_concepts: histogram.len(),
        max_frequency: histogram.values().copied().max().unwrap_or(0),
        concept_histogram: histogram,
        entropy: entropy.max(0.0),
    }
}

/// Dataset-wide instance counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub samples: u64,
    pub total_annotations: u64,
    /// Instances per concept, repeats included.
    pub per_concept_counts: BTreeMap<ConceptId, u64>,
    /// Number of samples with each instance count.
    pub multiplicity_histogram: BTreeMap<usize, u64>,
}

impl DatasetProfile {
    pub fn add(&mut self, sample: &SampleAnnotation) {
        self.samples += 1;
        self.total_annotations += sample.instance_count() as u64;
        for e in &sample.concepts {
            *self.per_concept_counts.entry(e.id).or_default() += 1;
        }
        *self
            .multiplicity_histogram
            .entry(sample.instance_count())
            .or_default() += 1;
    }

    /// Combines two partial profiles; associative and commutative.
    pub fn merge(mut self, other: &Self) -> Self {
        self.samples += other.samples;
        self.total_annotations += other.total_annotations;
        for (&c, &n) in &other.per_concept_counts {
            *self.per_concept_counts.entry(c).or_default() += n;
        }
        for (&k, &n) in &other.multiplicity_histogram {
            *self.multiplicity_histogram.entry(k).or_default() += n;
        }
        self
    }

    /// Median instance count over concepts that occur at least once.
    pub fn concept_count_median(&self) -> Option<f64> {
        let mut counts: Vec<u64> = self.per_concept_counts.values().copied().collect();
        counts.sort_unstable();
        median_sorted(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>())
    }

    /// Median number of concept instances per sample.
    pub fn multiplicity_median(&self) -> Option<f64> {
        histogram_median(&self.multiplicity_histogram, self.samples)
    }

    pub fn top_concepts(&self, n: usize) -> Vec<(ConceptId, u64)> {
        let mut v: Vec<_> = self.per_concept_counts.iter().map(|(&c, &n)| (c, n)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v.truncate(n);
        v
    }
}

pub fn dataset_profile<'a>(samples: impl IntoIterator<Item = &'a SampleAnnotation>) -> DatasetProfile {
    let mut profile = DatasetProfile::default();
    for s in samples {
        profile.add(s);
    }
    profile
}

fn median_sorted(v: &[f64]) -> Option<f64> {
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2]),
        _ => Some((v[n / 2 - 1] + v[n / 2]) / 2.0),
    }
}

fn histogram_median(hist: &BTreeMap<usize, u64>, total: u64) -> Option<f64> {
    if total == 0 {
        return None;
    }
    let nth = |rank: u64| -> usize {
        let mut seen = 0;
        for (&k, &n) in hist {
            seen += n;
            if seen > rank {
                return k;
            }
        }
        unreachable!("rank below histogram total")
    };
    if total % 2 == 1 {
        Some(nth(total / 2) as f64)
    } else {
        Some((nth(total / 2 - 1) + nth(total / 2)) as f64 / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptionField {
    Caption,
    Recaption,
}

impl CaptionField {
    pub fn text(self, sample: &SampleAnnotation) -> &str {
        match self {
            Self::Caption => sample.caption.as_deref(),
            Self::Recaption => sample.recaption.as_deref(),
        }
        .unwrap_or("")
    }
}

impl FromStr for CaptionField {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "caption" => Ok(Self::Caption),
            "recaption" => Ok(Self::Recaption),
            other => Err(AnalyticsError::UnknownCaptionField(other.to_string())),
        }
    }
}

/// Percentages over (sample, distinct concept) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdherenceReport {
    pub exact_match_pct: f64,
    /// Keyed by the threshold rendered with `{}` (e.g. `"0.6"`).
    pub partial_match_pct: BTreeMap<String, f64>,
    pub corpus_size: usize,
    pub pairs: usize,
}

/// Lowercased alphanumeric tokens; punctuation other than apostrophes splits.
fn caption_tokens(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '\'' { c } else { ' ' })
        .collect();
    normalize_name(&cleaned)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn gerund(word: &str) -> String {
    match word.strip_suffix('e') {
        Some(stem) if !word.ends_with("ee") && !stem.is_empty() => format!("{stem}ing"),
        _ => format!("{word}ing"),
    }
}

/// Surface forms tried for a fuzzy match: the canonical name, its lemma, a
/// naive plural and, for single words, a gerund.
pub fn concept_forms(canonical: &str) -> Vec<String> {
    let name = caption_tokens(canonical).join(" ");
    let mut forms = vec![name.clone(), lemmatize_plural(&name), format!("{name}s")];
    if !name.is_empty() && !name.contains(' ') {
        forms.push(gerund(&name));
    }
    forms.sort();
    forms.dedup();
    forms
}

/// `1 - levenshtein(a, b) / max(len(a), len(b))`, in characters.
pub fn similarity(a: &str, b: &str) -> f64 {
    let len = a.chars().count().max(b.chars().count());
    if len == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(a, b) as f64 / len as f64
}

fn contains_sequence(tokens: &[String], needle: &[&str]) -> bool {
    !needle.is_empty()
        && tokens.len() >= needle.len()
        && tokens
            .windows(needle.len())
            .any(|w| w.iter().zip(needle).all(|(a, b)| a == b))
}

/// Best similarity between any form and any caption window of the form's
/// token length.
fn best_similarity(forms: &[String], tokens: &[String]) -> f64 {
    let mut best = 0.0f64;
    for form in forms {
        let width = form.split(' ').count();
        if width == 0 || tokens.len() < width {
            continue;
        }
        for window in tokens.windows(width) {
            best = best.max(similarity(form, &window.join(" ")));
        }
    }
    best
}

pub fn concept_adherence(
    samples: &[SampleAnnotation],
    vocab: &ConceptVocabulary,
    field: CaptionField,
    taus: &[f64],
) -> Result<AdherenceReport, AnalyticsError> {
    if let Some(&bad) = taus.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
        return Err(AnalyticsError::BadThreshold(bad));
    }
    let mut forms_cache: BTreeMap<ConceptId, (Vec<String>, Vec<String>)> = BTreeMap::new();
    let mut pairs = 0usize;
    let mut exact = 0usize;
    let mut partial = vec![0usize; taus.len()];
    for sample in samples {
        let tokens = caption_tokens(field.text(sample));
        for c in sample.concept_set() {
            let (name_tokens, forms) = forms_cache.entry(c).or_insert_with(|| {
                let name = vocab.name(c);
                (caption_tokens(name), concept_forms(name))
            });
            pairs += 1;
            let needle: Vec<&str> = name_tokens.iter().map(String::as_str).collect();
            if contains_sequence(&tokens, &needle) {
                exact += 1;
            }
            let best = best_similarity(forms, &tokens);
            for (hit, &tau) in partial.iter_mut().zip(taus) {
                if best >= tau {
                    *hit += 1;
                }
            }
        }
    }
    let pct = |n: usize| if pairs == 0 { 0.0 } else { 100.0 * n as f64 / pairs as f64 };
    Ok(AdherenceReport {
        exact_match_pct: pct(exact),
        partial_match_pct: taus
            .iter()
            .zip(&partial)
            .map(|(t, &n)| (format!("{t}"), pct(n)))
            .collect(),
        corpus_size: samples.len(),
        pairs,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WordCountStats {
    pub median: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
    pub histogram: BTreeMap<usize, u64>,
}

pub fn word_count_stats(samples: &[SampleAnnotation], field: CaptionField) -> WordCountStats {
    let counts: Vec<usize> = samples
        .iter()
        .map(|s| field.text(s).split_whitespace().count())
        .collect();
    if counts.is_empty() {
        return WordCountStats::default();
    }
    let mut histogram = BTreeMap::new();
    for &c in &counts {
        *histogram.entry(c).or_default() += 1;
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n;
    WordCountStats {
        median: histogram_median(&histogram, counts.len() as u64).unwrap_or(0.0),
        mean,
        stddev: var.sqrt(),
        histogram,
    }
}
