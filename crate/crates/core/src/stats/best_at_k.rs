//! Unbiased estimate of the value reached by picking the lowest-score
//! sample among `k` draws.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    /// The reranking objective; lower is selected.
    pub score: f64,
    /// The quantity reported for the selected sample.
    pub value: f64,
    pub feasible: bool,
    /// Final tie-breaker for equal score and value.
    #[serde(default)]
    pub digest: String,
}

impl SamplePoint {
    pub fn new(score: f64, value: f64) -> Self {
        Self {
            score,
            value,
            feasible: true,
            digest: String::new(),
        }
    }
}

/// Order in which samples win a draw: score, then value, then digest.
/// Depends only on the points, never on their positions.
pub fn selection_order(a: &SamplePoint, b: &SamplePoint) -> Ordering {
    a.score
        .total_cmp(&b.score)
        .then(a.value.total_cmp(&b.value))
        .then_with(|| a.digest.cmp(&b.digest))
}

/// `θ̂_k = Σ_i C(n−i, k−1)/C(n, k) · value_(i)` over feasible points sorted
/// by [`selection_order`], in O(n log n).
pub fn best_at_k(samples: &[SamplePoint], k: usize) -> Result<f64, StatsError> {
    let mut pts: Vec<&SamplePoint> = samples.iter().filter(|p| p.feasible).collect();
    let n = pts.len();
    if k == 0 || k > n {
        return Err(StatsError::InsufficientSamples { k, n });
    }
    pts.sort_by(|a, b| selection_order(a, b));
    // w_1 = k/n and w_{i+1} = w_i · (n−i−k+1)/(n−i).
    let mut w = k as f64 / n as f64;
    let mut total = 0.0;
    for (idx, p) in pts.iter().take(n - k + 1).enumerate() {
        let i = idx + 1;
        total += w * p.value;
        if i < n {
            w *= (n - i + 1 - k) as f64 / (n - i) as f64;
        }
    }
    Ok(total)
}

/// `θ̂_k` for every `k` from 1 to the number of feasible samples.
pub fn scaling_curve(samples: &[SamplePoint]) -> Vec<(usize, f64)> {
    let n = samples.iter().filter(|p| p.feasible).count();
    (1..=n)
        .map(|k| (k, best_at_k(samples, k).expect("k within 1..=n")))
        .collect()
}
