use std::cmp::Ordering;

use super::SamplingError;

/// Indices of the `k` largest scores, ordered by descending score and then
/// ascending index. Scores must not be NaN.
pub fn select_topk(scores: &[f64], k: usize) -> Result<Vec<usize>, SamplingError> {
    let n = scores.len();
    if k > n {
        return Err(SamplingError::TooFew { k, n });
    }
    if let Some(position) = scores.iter().position(|s| s.is_nan()) {
        return Err(SamplingError::NanInput { position });
    }
    let cmp = |&a: &usize, &b: &usize| -> Ordering {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    };
    let mut idx: Vec<usize> = (0..n).collect();
    if k == 0 {
        return Ok(Vec::new());
    }
    if k < n {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    Ok(idx)
}
