//! The CART L2 cut criterion and best-cut search over a cell.
//!
//! A cell is the list of in-bag rows (with multiplicity) that reached a node.
//! Candidate thresholds are midpoints between consecutive distinct feature
//! values; a point goes left iff `x[feature] < threshold`.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;

/// A cut `(feature, threshold)` with its criterion value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Decrease of the within-cell mean squared deviation, `>= 0`.
    pub criterion: f64,
}

/// Threshold strictly above `lo` and at most `hi`, for `lo < hi`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * lo + 0.5 * hi;
    if lo < mid && mid <= hi {
        mid
    } else {
        hi
    }
}

/// L2 criterion of cutting `cell` at `(feature, threshold)`:
/// `(1/N) sum (y - ybar)^2 - (1/N) sum (y - ybar_side)^2`.
///
/// Returns `None` when either child would hold fewer than `min_leaf` rows.
///
/// # Panics
/// If `cell` is empty.
pub fn evaluate_cut(data: &Dataset, cell: &[usize], feature: usize, threshold: f64, min_leaf: usize) -> Option<f64> {
    assert!(!cell.is_empty(), "evaluate_cut called on an empty cell");
    let y = data.response();
    let n = cell.len();
    let goes_left = |i: usize| data.value(i, feature) < threshold;

    let (mut sum, mut sum_l, mut sum_r, mut n_l) = (0.0, 0.0, 0.0, 0usize);
    for &i in cell {
        sum += y[i];
        if goes_left(i) {
            sum_l += y[i];
            n_l += 1;
        } else {
            sum_r += y[i];
        }
    }
    let n_r = n - n_l;
    if n_l < min_leaf.max(1) || n_r < min_leaf.max(1) {
        return None;
    }
    let mean = sum / n as f64;
    let mean_l = sum_l / n_l as f64;
    let mean_r = sum_r / n_r as f64;

    let (mut sse_parent, mut sse_children) = (0.0, 0.0);
    for &i in cell {
        let d = y[i] - mean;
        sse_parent += d * d;
        let e = y[i] - if goes_left(i) { mean_l } else { mean_r };
        sse_children += e * e;
    }
    let nf = n as f64;
    Some((sse_parent / nf - sse_children / nf).max(0.0))
}

/// True when every response in the cell is identical.
pub fn response_constant(data: &Dataset, cell: &[usize]) -> bool {
    let y = data.response();
    cell.split_first().is_none_or(|(&first, rest)| rest.iter().all(|&i| y[i] == y[first]))
}

struct Scored {
    proxy: f64,
    feature: usize,
    threshold: f64,
}

/// Best admissible cut over `features`, maximizing the criterion.
///
/// Ties go to the lowest feature index, then the lowest threshold. Returns
/// `None` when the cell is response-constant, too small to split, or no
/// admissible cut reduces the squared error.
pub fn best_cut(data: &Dataset, cell: &[usize], features: &[usize], min_leaf: usize) -> Option<SplitCandidate> {
    let min_leaf = min_leaf.max(1);
    let n = cell.len();
    if n < 2 * min_leaf || response_constant(data, cell) {
        return None;
    }
    let y = data.response();
    let mean = cell.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
    let centered: Vec<f64> = cell.iter().map(|&i| y[i] - mean).collect();
    let total: f64 = centered.iter().sum();
    let spread: f64 = centered.iter().map(|c| c * c).sum();

    let mut sorted_features = features.to_vec();
    sorted_features.sort_unstable();
    sorted_features.dedup();

    // Scan with prefix sums; the scores are only used to shortlist, since two
    // features inducing the same partition must score identically.
    let mut scored: Vec<Scored> = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    for &feature in &sorted_features {
        let x = |k: usize| data.value(cell[k], feature);
        order.sort_by(|&a, &b| x(a).total_cmp(&x(b)).then(a.cmp(&b)));
        let mut sum_left = 0.0;
        for k in 1..n {
            sum_left += centered[order[k - 1]];
            let (lo, hi) = (x(order[k - 1]), x(order[k]));
            if lo == hi || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let sum_right = total - sum_left;
            let proxy = sum_left * sum_left / k as f64 + sum_right * sum_right / (n - k) as f64;
            scored.push(Scored { proxy, feature, threshold: midpoint(lo, hi) });
        }
    }
    let best_proxy = scored.iter().map(|s| s.proxy).fold(f64::NEG_INFINITY, f64::max);
    if !best_proxy.is_finite() {
        return None;
    }
    let slack = 1e-9 * spread + f64::MIN_POSITIVE;

    let mut best: Option<SplitCandidate> = None;
    for s in scored.iter().filter(|s| s.proxy >= best_proxy - slack) {
        let Some(criterion) = evaluate_cut(data, cell, s.feature, s.threshold, min_leaf) else {
            continue;
        };
        if best.is_none_or(|b| criterion > b.criterion) {
            best = Some(SplitCandidate { feature: s.feature, threshold: s.threshold, criterion });
        }
    }
    best.filter(|b| b.criterion > 0.0)
}
