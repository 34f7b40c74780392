//! Weighted box fusion across detection sets from several input resolutions.
//!
//! Boxes from all sets are pooled and visited by descending confidence. Each
//! box joins the first cluster of the same class whose running fused box
//! overlaps it with IoU above the threshold, otherwise it opens a new cluster.
//! Fused coordinates and scores are weight-averaged (`w = alpha * score`),
//! scores are rescaled by how many boxes agreed, and a stricter per-class
//! pass keeps one box per group of near duplicates.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concept::BoundingBox;

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("cluster has zero total weight")]
    ZeroWeight,
    #[error("empty cluster")]
    EmptyCluster,
    #[error("invalid fusion config: {0}")]
    Config(String),
}

/// Detections from one source resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    pub boxes: Vec<BoundingBox>,
    pub resolution_id: i64,
    pub resolution_weight: f64,
}

impl DetectionSet {
    pub fn new(resolution_id: i64, boxes: Vec<BoundingBox>) -> Self {
        Self {
            boxes,
            resolution_id,
            resolution_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RescaleMode {
    /// `s * min(T, n) / n`
    #[default]
    Clip,
    /// `s * T / n`, clamped to 1
    Linear,
}

impl std::str::FromStr for RescaleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clip" => Ok(Self::Clip),
            "linear" => Ok(Self::Linear),
            other => Err(format!("unknown rescale mode {other:?} (expected clip or linear)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WbfConfig {
    pub iou_threshold: f64,
    pub post_threshold: f64,
    pub rescale_mode: RescaleMode,
    pub n_sources: usize,
}

impl Default for WbfConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.29,
            post_threshold: 0.5,
            rescale_mode: RescaleMode::Clip,
            n_sources: 4,
        }
    }
}

impl WbfConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.iou_threshold) || !open_unit(self.post_threshold) {
            return Err(FusionError::Config("IoU thresholds must lie in (0, 1)".into()));
        }
        if self.n_sources == 0 {
            return Err(FusionError::Config("n_sources must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedDetection {
    pub bbox: BoundingBox,
    /// Number of boxes merged into this detection.
    pub cluster_size: usize,
    /// Distinct source resolutions among them.
    pub n_resolutions: usize,
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// A box tagged with its source and fusion weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedBox {
    pub bbox: BoundingBox,
    pub weight: f64,
    pub resolution_id: i64,
}

/// Running weighted mean of a cluster. Sums are taken relative to the first
/// member, so a cluster of identical boxes reproduces them exactly.
#[derive(Debug, Clone)]
struct Accumulator {
    origin: [f64; 5],
    weighted_delta: [f64; 5],
    total_weight: f64,
}

impl Accumulator {
    fn values(b: &BoundingBox) -> [f64; 5] {
        [b.x1, b.y1, b.x2, b.y2, b.score]
    }

    fn new(first: &WeightedBox) -> Self {
        let mut acc = Self {
            origin: Self::values(&first.bbox),
            weighted_delta: [0.0; 5],
            total_weight: 0.0,
        };
        acc.add(first);
        acc
    }

    fn add(&mut self, wb: &WeightedBox) {
        let v = Self::values(&wb.bbox);
        for ((d, x), o) in self.weighted_delta.iter_mut().zip(v).zip(self.origin) {
            *d += wb.weight * (x - o);
        }
        self.total_weight += wb.weight;
    }

    fn mean(&self) -> Result<[f64; 5], FusionError> {
        if self.total_weight.is_nan() || self.total_weight <= 0.0 {
            return Err(FusionError::ZeroWeight);
        }
        Ok(std::array::from_fn(|k| self.origin[k] + self.weighted_delta[k] / self.total_weight))
    }
}

fn fused_box(mean: [f64; 5], concept: crate::concept::ConceptId) -> BoundingBox {
    BoundingBox {
        x1: mean[0],
        y1: mean[1],
        x2: mean[2],
        y2: mean[3],
        concept,
        score: mean[4].clamp(0.0, 1.0),
    }
}

/// Confidence-weighted average of a cluster's coordinates and scores.
pub fn fuse(cluster: &[WeightedBox]) -> Result<FusedDetection, FusionError> {
    let first = cluster.first().ok_or(FusionError::EmptyCluster)?;
    let mut acc = Accumulator::new(first);
    for wb in &cluster[1..] {
        acc.add(wb);
    }
    let resolutions: BTreeSet<i64> = cluster.iter().map(|w| w.resolution_id).collect();
    Ok(FusedDetection {
        bbox: fused_box(acc.mean()?, first.bbox.concept),
        cluster_size: cluster.len(),
        n_resolutions: resolutions.len(),
    })
}

/// Sequential clustering of boxes already sorted by descending confidence.
/// Returns member indices into `boxes` per cluster, in creation order.
pub fn cluster(boxes: &[WeightedBox], config: &WbfConfig) -> Result<Vec<Vec<usize>>, FusionError> {
    let mut clusters: Vec<(Vec<usize>, Accumulator, BoundingBox)> = Vec::new();
    for (i, wb) in boxes.iter().enumerate() {
        let hit = clusters.iter().position(|(_, _, fused)| {
            fused.concept == wb.bbox.concept && iou(fused, &wb.bbox) > config.iou_threshold
        });
        match hit {
            Some(c) => {
                let (members, acc, fused) = &mut clusters[c];
                members.push(i);
                acc.add(wb);
                *fused = fused_box(acc.mean()?, wb.bbox.concept);
            }
            None => {
                let acc = Accumulator::new(wb);
                let fused = fused_box(acc.mean()?, wb.bbox.concept);
                clusters.push((vec![i], acc, fused));
            }
        }
    }
    Ok(clusters.into_iter().map(|(m, _, _)| m).collect())
}

/// Down-weights detections supported by fewer than `n_sources` boxes.
pub fn rescale_scores(mut fused: Vec<FusedDetection>, config: &WbfConfig) -> Vec<FusedDetection> {
    let n = config.n_sources as f64;
    for d in &mut fused {
        let t = d.cluster_size as f64;
        let factor = match config.rescale_mode {
            RescaleMode::Clip => t.min(n) / n,
            RescaleMode::Linear => t / n,
        };
        d.bbox.score = (d.bbox.score * factor).min(1.0);
    }
    fused
}

/// Per class, groups detections overlapping above the post threshold and
/// keeps the highest-scoring one of each group. Output is sorted by
/// descending score; ties keep input order.
pub fn post_filter(fused: Vec<FusedDetection>, config: &WbfConfig) -> Vec<FusedDetection> {
    let mut order: Vec<usize> = (0..fused.len()).collect();
    order.sort_by(|&a, &b| fused[b].bbox.score.total_cmp(&fused[a].bbox.score));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let duplicate = kept.iter().any(|&k| {
            fused[k].bbox.concept == fused[i].bbox.concept
                && iou(&fused[k].bbox, &fused[i].bbox) > config.post_threshold
        });
        if !duplicate {
            kept.push(i);
        }
    }
    let mut slots: Vec<Option<FusedDetection>> = fused.into_iter().map(Some).collect();
    kept.into_iter().map(|i| slots[i].take().unwrap()).collect()
}

/// Pools all sets, sorts by confidence, clusters, fuses, rescales and
/// post-filters.
pub fn wbf(sets: &[DetectionSet], config: &WbfConfig) -> Result<Vec<FusedDetection>, FusionError> {
    config.validate()?;
    let mut pooled: Vec<WeightedBox> = sets
        .iter()
        .flat_map(|set| {
            set.boxes.iter().map(move |b| WeightedBox {
                bbox: *b,
                weight: set.resolution_weight * b.score,
                resolution_id: set.resolution_id,
            })
        })
        .collect();
    pooled.sort_by(|a, b| b.bbox.score.total_cmp(&a.bbox.score));
    let clusters = cluster(&pooled, config)?;
    let fused = clusters
        .iter()
        .map(|members| {
            let boxes: Vec<WeightedBox> = members.iter().map(|&i| pooled[i]).collect();
            fuse(&boxes)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(post_filter(rescale_scores(fused, config), config))
}
