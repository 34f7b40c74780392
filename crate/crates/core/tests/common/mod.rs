//! Brute-force reference implementations and fixture builders.
//!
//! Shared by the core integration tests and the CLI acceptance suite; every
//! oracle is written from the definitions, not from the library code.
#![allow(dead_code)]

use cabs_core::boxfusion::{DetectionSet, RescaleMode, WbfConfig};
use cabs_core::{BoundingBox, ConceptId, SampleAnnotation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sort everything by (score desc, index asc) and keep the first `k`.
pub fn topk_oracle(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Gain of a de-duplicated slot set, recomputed from scratch.
pub fn naive_gain(set: &[u32], targets: &[u32], freqs: &[u32], counts: &[u32], eps: f64) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for &c in set {
        let c = c as usize;
        if counts[c] < targets[c] {
            sum += f64::from(targets[c] - counts[c]) / f64::from(targets[c]) + 1.0 / (f64::from(freqs[c]) + eps);
        }
    }
    sum / set.len() as f64
}

/// Greedy selection that rescans every remaining sample at every step.
/// Returns (positions, gain-phase length).
pub fn naive_dm(sets: &[Vec<u32>], targets: &[u32], freqs: &[u32], b: usize, eps: f64) -> (Vec<usize>, usize) {
    let mut counts = vec![0u32; targets.len()];
    let mut taken = vec![false; sets.len()];
    let mut out = Vec::new();
    while out.len() < b {
        let mut best: Option<(f64, usize)> = None;
        for (i, set) in sets.iter().enumerate() {
            if taken[i] || set.iter().any(|&c| counts[c as usize] >= targets[c as usize]) {
                continue;
            }
            let g = naive_gain(set, targets, freqs, &counts, eps);
            if g > 0.0 && best.is_none_or(|(bg, _)| g > bg) {
                best = Some((g, i));
            }
        }
        let Some((_, i)) = best else { break };
        taken[i] = true;
        for &c in &sets[i] {
            counts[c as usize] += 1;
        }
        out.push(i);
    }
    let gain_phase = out.len();
    let rest: Vec<usize> = (0..sets.len()).filter(|&i| !taken[i]).take(b - gain_phase).collect();
    out.extend(rest);
    (out, gain_phase)
}

/// Largest total instance count over every size-`b` subset.
pub fn best_subset_total(counts: &[usize], b: usize) -> usize {
    let n = counts.len();
    let mut best = 0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != b {
            continue;
        }
        let total = (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| counts[i]).sum();
        best = best.max(total);
    }
    best
}

/// Samples drawing `1..=max_len` concepts (with repeats) from `num_concepts`.
pub fn random_samples(r: &mut ChaCha8Rng, n: usize, num_concepts: u32, max_len: usize) -> Vec<SampleAnnotation> {
    (0..n)
        .map(|i| {
            let len = r.random_range(0..=max_len);
            let ids: Vec<ConceptId> = (0..len).map(|_| ConceptId(r.random_range(0..num_concepts))).collect();
            SampleAnnotation::new(format!("s{i}"), &ids)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefDetection {
    pub coords: [f64; 4],
    pub class: u32,
    pub score: f64,
    pub cluster_size: usize,
}

fn ref_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Plain weighted mean of (x1, y1, x2, y2, score).
fn ref_mean(members: &[(BoundingBox, f64)]) -> ([f64; 4], f64) {
    let total: f64 = members.iter().map(|(_, w)| w).sum();
    let mut c = [0.0; 4];
    let mut s = 0.0;
    for (b, w) in members {
        c[0] += w * b.x1;
        c[1] += w * b.y1;
        c[2] += w * b.x2;
        c[3] += w * b.y2;
        s += w * b.score;
    }
    (c.map(|v| v / total), (s / total).clamp(0.0, 1.0))
}

/// Weighted box fusion from the textbook description: confidence order,
/// first matching running cluster, averages recomputed from all members.
pub fn wbf_reference(sets: &[DetectionSet], cfg: &WbfConfig) -> Vec<RefDetection> {
    let mut pooled: Vec<(BoundingBox, f64)> = Vec::new();
    for set in sets {
        for b in &set.boxes {
            pooled.push((*b, set.resolution_weight * b.score));
        }
    }
    pooled.sort_by(|a, b| b.0.score.partial_cmp(&a.0.score).unwrap());

    let mut clusters: Vec<Vec<(BoundingBox, f64)>> = Vec::new();
    for item in pooled {
        let hit = clusters.iter().position(|members| {
            let (fused, _) = ref_mean(members);
            members[0].0.concept == item.0.concept && ref_iou(fused, item.0.coords()) > cfg.iou_threshold
        });
        match hit {
            Some(i) => clusters[i].push(item),
            None => clusters.push(vec![item]),
        }
    }

    let n = cfg.n_sources as f64;
    let fused: Vec<RefDetection> = clusters
        .iter()
        .map(|members| {
            let (coords, score) = ref_mean(members);
            let t = members.len() as f64;
            let factor = match cfg.rescale_mode {
                RescaleMode::Clip => t.min(n) / n,
                RescaleMode::Linear => t / n,
            };
            RefDetection {
                coords,
                class: members[0].0.concept.0,
                score: (score * factor).min(1.0),
                cluster_size: members.len(),
            }
        })
        .collect();

    // Keep the best of each overlapping same-class group.
    let mut order: Vec<usize> = (0..fused.len()).collect();
    order.sort_by(|&a, &b| fused[b].score.partial_cmp(&fused[a].score).unwrap());
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if !kept
            .iter()
            .any(|&k| fused[k].class == fused[i].class && ref_iou(fused[k].coords, fused[i].coords) > cfg.post_threshold)
        {
            kept.push(i);
        }
    }
    kept.into_iter().map(|i| fused[i].clone()).collect()
}

fn random_box(r: &mut ChaCha8Rng, classes: u32) -> BoundingBox {
    let x1: f64 = r.random_range(0.0..0.8);
    let y1: f64 = r.random_range(0.0..0.8);
    let x2 = (x1 + r.random_range(0.02..0.3f64)).min(1.0);
    let y2 = (y1 + r.random_range(0.02..0.3f64)).min(1.0);
    BoundingBox::new([x1, y1, x2, y2], ConceptId(r.random_range(0..classes)), r.random_range(0.01..1.0)).unwrap()
}

/// Detection sets for one image: a few objects seen (jittered) by most
/// sources plus unrelated clutter, at most `max_boxes` in total.
pub fn random_image(r: &mut ChaCha8Rng, sources: usize, max_boxes: usize) -> Vec<DetectionSet> {
    let objects: Vec<BoundingBox> = (0..r.random_range(1..=8)).map(|_| random_box(r, 4)).collect();
    let budget = r.random_range(1..=max_boxes);
    let mut sets: Vec<DetectionSet> = (0..sources).map(|s| DetectionSet::new(s as i64, Vec::new())).collect();
    for k in 0..budget {
        let s = k % sources;
        let b = if r.random_bool(0.7) {
            let o = objects[r.random_range(0..objects.len())];
            let j = |v: f64, r: &mut ChaCha8Rng| (v + r.random_range(-0.02..0.02)).clamp(0.0, 1.0);
            let (x1, y1, x2, y2) = (j(o.x1, r), j(o.y1, r), j(o.x2, r), j(o.y2, r));
            BoundingBox::new(
                [x1.min(x2), y1.min(y2), x1.max(x2), y1.max(y2)],
                o.concept,
                r.random_range(0.01..1.0),
            )
            .unwrap()
        } else {
            random_box(r, 4)
        };
        sets[s].boxes.push(b);
    }
    sets
}
