//! Reductions of metrics time series to the scalars the comparisons use.
//!
//! Per-iteration evaluation is a single deterministic episode, so "final"
//! values average the last [`FINAL_WINDOW`] iterations.

use apex::MetricsRow;

pub const FINAL_WINDOW: usize = 10;

/// Mean of `f` over the trailing `window` rows ending at `end` (exclusive).
pub fn trailing_mean(rows: &[MetricsRow], end: usize, window: usize, f: impl Fn(&MetricsRow) -> f64) -> Option<f64> {
    if end == 0 || end > rows.len() || window == 0 {
        return None;
    }
    let start = end.saturating_sub(window);
    let xs = &rows[start..end];
    Some(xs.iter().map(&f).sum::<f64>() / xs.len() as f64)
}

/// Final joint RMSE of a run.
pub fn final_q_rmse(rows: &[MetricsRow]) -> Option<f64> {
    trailing_mean(rows, rows.len(), FINAL_WINDOW, |r| r.eval.q_rmse)
}

/// First iteration whose trailing-window joint RMSE is at or below `level`.
pub fn first_reaching(rows: &[MetricsRow], level: f64) -> Option<usize> {
    (1..=rows.len()).find(|&end| trailing_mean(rows, end, FINAL_WINDOW, |r| r.eval.q_rmse).is_some_and(|m| m <= level)).map(|end| rows[end - 1].iteration)
}

/// Median of a nonempty slice; the mean of the middle pair for even lengths.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}
