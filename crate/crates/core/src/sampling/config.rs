use serde::{Deserialize, Serialize};

use super::SamplingError;

/// Sub-batch size for a superbatch of `len` samples: `(1 - f) * len` rounded
/// half up, never below 1 for a non-empty superbatch.
pub fn sub_batch_size(len: usize, filter_ratio: f64) -> usize {
    if len == 0 {
        return 0;
    }
    // The epsilon absorbs representation error in `1 - f` (0.2 vs 0.19999999999999996).
    let raw = ((1.0 - filter_ratio) * len as f64 + 0.5 + 1e-9).floor() as usize;
    raw.clamp(1, len)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub superbatch_size: usize,
    pub filter_ratio: f64,
    pub seed: u64,
    pub epochs: usize,
    /// Buffer size for a seeded streaming shuffle; `None` keeps file order.
    pub shuffle_buffer: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            superbatch_size: 20_480,
            filter_ratio: 0.8,
            seed: 0,
            epochs: 1,
            shuffle_buffer: None,
        }
    }
}

impl SamplerConfig {
    pub fn new(superbatch_size: usize, filter_ratio: f64) -> Result<Self, SamplingError> {
        let config = Self {
            superbatch_size,
            filter_ratio,
            ..Self::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), SamplingError> {
        if self.superbatch_size == 0 {
            return Err(SamplingError::Config("superbatch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.filter_ratio) {
            return Err(SamplingError::Config(format!(
                "filter ratio {} outside [0, 1)",
                self.filter_ratio
            )));
        }
        if self.epochs == 0 {
            return Err(SamplingError::Config("epochs must be positive".into()));
        }
        if self.shuffle_buffer == Some(0) {
            return Err(SamplingError::Config("shuffle buffer must be positive".into()));
        }
        Ok(())
    }

    /// `b` for a full superbatch.
    pub fn sub_batch_size(&self) -> usize {
        sub_batch_size(self.superbatch_size, self.filter_ratio)
    }
}
