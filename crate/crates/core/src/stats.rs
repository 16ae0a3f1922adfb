//! Small descriptive-statistics helpers shared across modules.

use std::cmp::Ordering;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator. Zero for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

pub(crate) fn total_cmp_sort(xs: &mut [f64]) {
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
}

/// Type-7 (linear interpolation) quantile of an already sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Type-7 quantiles of unsorted data; sorts a copy once.
pub fn quantiles(xs: &[f64], probs: &[f64]) -> Vec<f64> {
    let mut sorted = xs.to_vec();
    total_cmp_sort(&mut sorted);
    probs.iter().map(|&p| quantile_sorted(&sorted, p)).collect()
}

pub fn median(xs: &[f64]) -> f64 {
    quantiles(xs, &[0.5])[0]
}

/// Location and spread summary of a set of draws with a central interval.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DrawSummary {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

impl DrawSummary {
    /// Summarize draws with a central `1 - alpha` interval.
    pub fn from_draws(xs: &[f64], alpha: f64) -> Self {
        let q = quantiles(xs, &[0.5, alpha / 2.0, 1.0 - alpha / 2.0]);
        Self {
            mean: mean(xs),
            sd: std_dev(xs),
            median: q[0],
            lower: q[1],
            upper: q[2],
        }
    }
}
