//! Synthetic long-tailed annotation pools for tests and benchmarks.
//!
//! Concept ranks follow a Zipf law over `num_concepts` concepts; each sample
//! carries `1 + Poisson(mean_extra)` concept instances (median 3 with the
//! default `mean_extra = 2`). Instances are independent Zipf draws unless
//! `repeat_prob > 0`, in which case each instance after the first re-uses an
//! earlier concept of the same sample with that probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, Zipf};

use crate::concept::{ConceptEntry, ConceptId, ConceptVocabulary, SampleAnnotation};

#[derive(Debug, Clone, PartialEq)]
pub struct ZipfPool {
    pub num_concepts: usize,
    pub exponent: f64,
    pub num_samples: usize,
    pub mean_extra: f64,
    pub seed: u64,
    pub repeat_prob: f64,
    /// Attach a caption naming some of the sample's concepts.
    pub captions: bool,
}

impl Default for ZipfPool {
    fn default() -> Self {
        Self {
            num_concepts: 2000,
            exponent: 1.2,
            num_samples: 100_000,
            mean_extra: 2.0,
            seed: 0,
            repeat_prob: 0.0,
            captions: false,
        }
    }
}

const FILLERS: &[&str] = &["a", "photo", "of", "with", "the", "and", "near", "two", "some", "in"];

impl ZipfPool {
    /// Concept `i` is named `concept <i>`; global counts follow the Zipf weights.
    pub fn vocabulary(&self) -> ConceptVocabulary {
        let scale = self.num_samples as f64 * (1.0 + self.mean_extra);
        let norm: f64 = (1..=self.num_concepts).map(|k| (k as f64).powf(-self.exponent)).sum();
        ConceptVocabulary::from_entries((0..self.num_concepts).map(|i| {
            let w = ((i + 1) as f64).powf(-self.exponent) / norm;
            (format!("concept {i}"), (w * scale).round() as u64)
        }))
        .expect("generated names are unique")
    }

    pub fn generate(&self) -> Vec<SampleAnnotation> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let zipf = Zipf::new(self.num_concepts as f64, self.exponent).expect("valid zipf parameters");
        let extra = Poisson::new(self.mean_extra).expect("valid poisson mean");
        (0..self.num_samples)
            .map(|i| {
                let count = 1 + extra.sample(&mut rng) as usize;
                let mut concepts: Vec<ConceptEntry> = Vec::with_capacity(count);
                for j in 0..count {
                    let id = if j > 0 && self.repeat_prob > 0.0 && rng.random_bool(self.repeat_prob) {
                        concepts[rng.random_range(0..j)].id
                    } else {
                        ConceptId(zipf.sample(&mut rng) as u32 - 1)
                    };
                    let score = (rng.random_range(30..=100) as f64) / 100.0;
                    concepts.push(ConceptEntry { id, score, bbox: None });
                }
                let caption = self.captions.then(|| caption_for(&concepts, &mut rng));
                SampleAnnotation {
                    sample_id: format!("syn-{i:08}"),
                    concepts,
                    caption,
                    recaption: None,
                }
            })
            .collect()
    }
}

fn caption_for(concepts: &[ConceptEntry], rng: &mut ChaCha8Rng) -> String {
    let mut words: Vec<String> = Vec::new();
    for e in concepts {
        words.push(FILLERS[rng.random_range(0..FILLERS.len())].to_string());
        match rng.random_range(0..4) {
            0 => {}
            1 => words.push(format!("concept {}", e.id)),
            2 => words.push(format!("concepts {}", e.id)),
            _ => words.push(format!("concpt {}", e.id)),
        }
    }
    words.join(" ")
}
