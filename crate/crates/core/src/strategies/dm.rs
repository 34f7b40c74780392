//! Greedy diversity maximization.
//!
//! Every concept `c` present in the superbatch gets a target count `t_c`. The
//! selector repeatedly takes the sample with the highest gain
//!
//! ```text
//! gain(i) = 1/|C_i| * sum_{c in C_i} [ (t_c - n_c)/t_c + 1/F_c   if n_c < t_c
//!                                       0                        otherwise ]
//! ```
//!
//! where `n_c` counts selected samples containing `c` and `F_c` counts
//! superbatch samples containing `c`. A sample touching a saturated concept
//! (`n_c >= t_c`) is no longer eligible. Gains only fall as counts rise, so a
//! lazy max-heap that re-scores stale entries on pop is exact.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::concept::ConceptId;
use crate::sampling::{SamplingError, Superbatch};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmParams {
    /// Upper bound on any concept's target count within a sub-batch.
    pub max_concept_frequency: u32,
    /// Lower bound on a target count (before capping at availability).
    pub min_samples_concept: u32,
    /// Added to `F_c` in the rarity denominator.
    pub rarity_epsilon: f64,
}

impl Default for DmParams {
    fn default() -> Self {
        Self {
            max_concept_frequency: 40,
            min_samples_concept: 1,
            rarity_epsilon: 1e-8,
        }
    }
}

impl DmParams {
    pub fn validate(&self) -> Result<(), SamplingError> {
        if self.min_samples_concept == 0 || self.max_concept_frequency == 0 {
            return Err(SamplingError::Config(
                "concept frequency caps must be positive".into(),
            ));
        }
        if self.min_samples_concept > self.max_concept_frequency {
            return Err(SamplingError::Config(format!(
                "min_samples_concept {} exceeds max_concept_frequency {}",
                self.min_samples_concept, self.max_concept_frequency
            )));
        }
        if !(self.rarity_epsilon >= 0.0 && self.rarity_epsilon.is_finite()) {
            return Err(SamplingError::Config("rarity epsilon must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Which marginal gain drives the greedy loop.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum GainVariant {
    /// Averaged balance gain plus rarity bonus; saturated concepts make a
    /// sample ineligible.
    #[default]
    Balanced,
    /// Un-averaged `sum max(0, t_c - n_c) / (F_c + eps)` over concepts whose
    /// count is still below the frequency cap. Kept for comparison.
    DeficitOverFrequency,
}

/// A superbatch with concepts remapped to dense slots `0..num_concepts`.
#[derive(Debug, Clone, Default)]
pub struct DenseSuperbatch {
    /// Sorted, de-duplicated slot sets, one per sample.
    pub sets: Vec<Vec<u32>>,
    /// Concept behind each slot.
    pub concepts: Vec<ConceptId>,
}

impl DenseSuperbatch {
    pub fn from_superbatch(superbatch: &Superbatch) -> Self {
        let max_id = superbatch
            .samples
            .iter()
            .flat_map(|s| s.concepts.iter().map(|e| e.id.index()))
            .max();
        let mut slot_of = vec![u32::MAX; max_id.map_or(0, |m| m + 1)];
        let mut concepts = Vec::new();
        let sets = superbatch
            .samples
            .iter()
            .map(|s| {
                let mut set: Vec<u32> = s
                    .concepts
                    .iter()
                    .map(|e| {
                        let slot = &mut slot_of[e.id.index()];
                        if *slot == u32::MAX {
                            *slot = concepts.len() as u32;
                            concepts.push(e.id);
                        }
                        *slot
                    })
                    .collect();
                set.sort_unstable();
                set.dedup();
                set
            })
            .collect();
        Self { sets, concepts }
    }

    pub fn num_concepts(&self) -> usize {
        self.concepts.len()
    }
}

/// Per-concept targets and superbatch frequencies, keyed by dense slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptTargets {
    pub targets: Vec<u32>,
    pub frequencies: Vec<u32>,
}

impl ConceptTargets {
    /// Derives `t_c = min(F_c, clamp(ceil(b * mean|C_i| / U), min, max))`.
    /// A superbatch without any concept yields all-zero targets.
    pub fn derive(dense: &DenseSuperbatch, params: &DmParams, b: usize) -> Self {
        let u = dense.num_concepts();
        let mut frequencies = vec![0u32; u];
        for set in &dense.sets {
            for &slot in set {
                frequencies[slot as usize] += 1;
            }
        }
        let total: u64 = dense.sets.iter().map(|s| s.len() as u64).sum();
        if total == 0 {
            if !dense.sets.is_empty() {
                log::warn!("superbatch of {} samples carries no concept annotations", dense.sets.len());
            }
            return Self {
                targets: vec![0; u],
                frequencies,
            };
        }
        // ceil(b * (total / n) / u) in exact integer arithmetic
        let denom = dense.sets.len() as u64 * u as u64;
        let raw = (b as u64 * total).div_ceil(denom);
        let t = raw.clamp(
            u64::from(params.min_samples_concept),
            u64::from(params.max_concept_frequency),
        ) as u32;
        let targets = frequencies.iter().map(|&f| t.min(f)).collect();
        Self {
            targets,
            frequencies,
        }
    }
}

/// Targets for every concept in `superbatch`, keyed by concept id, as
/// `(t_c, F_c)` pairs.
pub fn compute_targets(
    superbatch: &Superbatch,
    params: &DmParams,
    b: usize,
) -> BTreeMap<ConceptId, (u32, u32)> {
    let dense = DenseSuperbatch::from_superbatch(superbatch);
    let targets = ConceptTargets::derive(&dense, params, b);
    dense
        .concepts
        .iter()
        .enumerate()
        .map(|(slot, &c)| (c, (targets.targets[slot], targets.frequencies[slot])))
        .collect()
}

/// Evolving counts of the greedy selector.
#[derive(Debug, Clone)]
pub struct GainState {
    pub targets: Vec<u32>,
    pub counts: Vec<u32>,
    pub frequencies: Vec<u32>,
    /// Cap applied by the frequency-cap check of the comparison variant.
    pub max_frequency: u32,
    pub selected: Vec<usize>,
    rarity: Vec<f64>,
}

impl GainState {
    pub fn new(targets: ConceptTargets, max_frequency: u32, rarity_epsilon: f64) -> Self {
        let rarity = targets
            .frequencies
            .iter()
            .map(|&f| 1.0 / (f64::from(f) + rarity_epsilon))
            .collect();
        Self {
            counts: vec![0; targets.targets.len()],
            targets: targets.targets,
            frequencies: targets.frequencies,
            max_frequency,
            selected: Vec::new(),
            rarity,
        }
    }

    fn saturated(&self, slot: usize) -> bool {
        self.counts[slot] >= self.targets[slot]
    }

    fn record(&mut self, position: usize, set: &[u32]) {
        self.selected.push(position);
        for &slot in set {
            self.counts[slot as usize] += 1;
        }
    }
}

/// The averaged balance-plus-rarity gain of a de-duplicated slot set.
/// Saturated concepts and concepts with a zero target contribute nothing.
pub fn dm_gain(set: &[u32], state: &GainState) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for &slot in set {
        let slot = slot as usize;
        let t = state.targets[slot];
        let n = state.counts[slot];
        if n < t {
            sum += f64::from(t - n) / f64::from(t) + state.rarity[slot];
        }
    }
    sum / set.len() as f64
}

fn deficit_gain(set: &[u32], state: &GainState) -> f64 {
    let mut gain = 0.0;
    for &slot in set {
        let slot = slot as usize;
        if state.counts[slot] < state.max_frequency {
            let deficit = state.targets[slot].saturating_sub(state.counts[slot]);
            gain += f64::from(deficit) * state.rarity[slot];
        }
    }
    gain
}

/// Gain used for selection: zero for samples the variant considers
/// ineligible.
fn selection_gain(set: &[u32], state: &GainState, variant: GainVariant) -> f64 {
    match variant {
        GainVariant::Balanced => {
            if set.iter().any(|&s| state.saturated(s as usize)) {
                0.0
            } else {
                dm_gain(set, state)
            }
        }
        GainVariant::DeficitOverFrequency => deficit_gain(set, state),
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    gain: f64,
    position: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.position.cmp(&self.position))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmSelection {
    /// Superbatch positions in selection order.
    pub positions: Vec<usize>,
    /// How many leading picks had positive gain; the rest are order fill.
    pub gain_phase: usize,
    pub state: GainState,
}

impl PartialEq for GainState {
    fn eq(&self, other: &Self) -> bool {
        self.targets == other.targets
            && self.counts == other.counts
            && self.frequencies == other.frequencies
            && self.selected == other.selected
    }
}

/// Lazy-greedy selection of `b` samples over dense slot sets.
pub fn dm_select_dense(
    sets: &[Vec<u32>],
    b: usize,
    mut state: GainState,
    variant: GainVariant,
) -> Result<DmSelection, SamplingError> {
    let n = sets.len();
    if b > n {
        return Err(SamplingError::TooFew { k: b, n });
    }
    let mut heap: BinaryHeap<Candidate> = sets
        .iter()
        .enumerate()
        .map(|(position, set)| Candidate {
            gain: selection_gain(set, &state, variant),
            position,
        })
        .filter(|c| c.gain > 0.0)
        .collect();

    let mut taken = vec![false; n];
    while state.selected.len() < b {
        let Some(top) = heap.pop() else { break };
        let current = selection_gain(&sets[top.position], &state, variant);
        if current == top.gain {
            taken[top.position] = true;
            state.record(top.position, &sets[top.position]);
        } else if current > 0.0 {
            heap.push(Candidate {
                gain: current,
                position: top.position,
            });
        }
    }
    let gain_phase = state.selected.len();
    let fill: Vec<usize> = (0..n).filter(|&p| !taken[p]).take(b - gain_phase).collect();
    state.selected.extend(fill);
    Ok(DmSelection {
        positions: state.selected.clone(),
        gain_phase,
        state,
    })
}

/// Selects `b` superbatch positions by greedy diversity maximization. Once no
/// sample has positive gain the remainder is filled in superbatch order.
pub fn dm_select(
    superbatch: &Superbatch,
    b: usize,
    params: &DmParams,
    variant: GainVariant,
) -> Result<DmSelection, SamplingError> {
    params.validate()?;
    if b > superbatch.len() {
        return Err(SamplingError::TooFew {
            k: b,
            n: superbatch.len(),
        });
    }
    let dense = DenseSuperbatch::from_superbatch(superbatch);
    let targets = ConceptTargets::derive(&dense, params, b);
    let state = GainState::new(targets, params.max_concept_frequency, params.rarity_epsilon);
    dm_select_dense(&dense.sets, b, state, variant)
}
