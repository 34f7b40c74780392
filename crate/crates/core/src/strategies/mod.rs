//! Scoring strategies: constant (IID), concept-count maximization (FM) and
//! greedy diversity maximization (DM).

mod dm;

pub use dm::{
    compute_targets, dm_gain, dm_select, dm_select_dense, ConceptTargets, DenseSuperbatch,
    DmParams, DmSelection, GainState, GainVariant,
};

use crate::concept::SampleAnnotation;
use crate::sampling::{Plan, SamplingError, ScoringStrategy, Superbatch};

/// `h = 1` for every sample; top-k then keeps superbatch order.
pub fn iid_score(_sample: &SampleAnnotation) -> f64 {
    1.0
}

/// Number of concept instances in the sample, repeats included.
pub fn fm_score(sample: &SampleAnnotation) -> usize {
    sample.instance_count()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IidStrategy;

impl ScoringStrategy for IidStrategy {
    fn name(&self) -> &str {
        "iid"
    }

    fn is_stateful(&self) -> bool {
        false
    }

    fn plan(&self, superbatch: &Superbatch, _k: usize) -> Result<Plan, SamplingError> {
        Ok(Plan::Scores(superbatch.samples.iter().map(iid_score).collect()))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FmStrategy;

impl ScoringStrategy for FmStrategy {
    fn name(&self) -> &str {
        "fm"
    }

    fn is_stateful(&self) -> bool {
        false
    }

    fn plan(&self, superbatch: &Superbatch, _k: usize) -> Result<Plan, SamplingError> {
        Ok(Plan::Scores(
            superbatch.samples.iter().map(|s| fm_score(s) as f64).collect(),
        ))
    }
}

#[derive(Debug, Clone, Default)]
pub struct DmStrategy {
    pub params: DmParams,
    pub variant: GainVariant,
}

impl DmStrategy {
    pub fn new(params: DmParams, variant: GainVariant) -> Self {
        Self { params, variant }
    }
}

impl ScoringStrategy for DmStrategy {
    fn name(&self) -> &str {
        match self.variant {
            GainVariant::Balanced => "dm",
            GainVariant::DeficitOverFrequency => "dm-alg2",
        }
    }

    fn is_stateful(&self) -> bool {
        true
    }

    fn plan(&self, superbatch: &Superbatch, k: usize) -> Result<Plan, SamplingError> {
        let selection = dm_select(superbatch, k, &self.params, self.variant)?;
        Ok(Plan::Selection(selection.positions))
    }
}

/// Builds a strategy from its CLI name: `iid`, `dm`, `fm` or `dm-alg2`.
pub fn strategy_by_name(name: &str, params: DmParams) -> Option<Box<dyn ScoringStrategy>> {
    Some(match name {
        "iid" => Box::new(IidStrategy),
        "fm" => Box::new(FmStrategy),
        "dm" => Box::new(DmStrategy::new(params, GainVariant::Balanced)),
        "dm-alg2" => Box::new(DmStrategy::new(params, GainVariant::DeficitOverFrequency)),
        _ => return None,
    })
}
