//! Temporal-alignment similarity between two insiders' trade logs.
//!
//! The kernel gives weight `(width - d) / width` to a day gap `d` within the
//! window and zero beyond it. Per-trade weights are accumulated as scaled
//! integers (units of `1/width`) so scores are exact and bit-reproducible
//! regardless of evaluation order.

use crate::types::{iso_week_key, InsiderFirmLog};
use chrono::NaiveDate;
use std::collections::BTreeSet;
use thiserror::Error;

/// Kernel window parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelConfig {
    /// Day gap at which the kernel reaches zero. Must be at least 1.
    pub width_days: u32,
}

impl KernelConfig {
    pub fn new(width_days: u32) -> Self {
        assert!(width_days >= 1, "kernel width must be >= 1 day");
        KernelConfig { width_days }
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { width_days: 7 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("pair has no trades in either direction")]
    EmptyPair,
}

/// Linear same-week kernel: `1 - d/width` for `d <= width`, else 0.
///
/// Computed as `(width - d) / width` so e.g. `kernel(1)` is exactly the
/// correctly rounded `6.0 / 7.0` at the default width.
pub fn kernel(gap_days: u64, cfg: &KernelConfig) -> f64 {
    let width = u64::from(cfg.width_days);
    if gap_days <= width {
        (width - gap_days) as f64 / width as f64
    } else {
        0.0
    }
}

/// Scaled integer kernel weight: `width - d` when positive, else 0.
fn scaled_weight(gap_days: i64, width: i64) -> i64 {
    (width - gap_days).max(0)
}

fn day_gap(a: NaiveDate, b: NaiveDate) -> i64 {
    (a - b).num_days().abs()
}

/// Best kernel weight (scaled) available in sorted `ys` for a single date.
fn best_scaled_weight(x: NaiveDate, ys: &[NaiveDate], width: i64) -> i64 {
    // Nearest neighbours straddle the insertion point in a sorted list.
    let idx = ys.partition_point(|y| *y < x);
    let mut best = 0;
    if idx < ys.len() {
        best = best.max(scaled_weight(day_gap(ys[idx], x), width));
    }
    if idx > 0 {
        best = best.max(scaled_weight(day_gap(ys[idx - 1], x), width));
    }
    best
}

/// Sum over `xs` of the best scaled weight in `ys`.
fn directional_scaled_sum(xs: &[NaiveDate], ys: &[NaiveDate], width: i64) -> i64 {
    xs.iter().map(|&x| best_scaled_weight(x, ys, width)).sum()
}

/// Symmetric best-match similarity of two sorted, duplicate-free date lists.
///
/// Averages, over each list, the best kernel weight available in the other,
/// then averages the two directions. Empty input on either side scores 0,
/// which is how the per-direction split treats an inactive direction.
pub fn best_match_similarity(xs: &[NaiveDate], ys: &[NaiveDate], cfg: &KernelConfig) -> f64 {
    if xs.is_empty() || ys.is_empty() {
        return 0.0;
    }
    let width = i64::from(cfg.width_days);
    let sum_x = directional_scaled_sum(xs, ys, width);
    let sum_y = directional_scaled_sum(ys, xs, width);
    let s_x_given_y = sum_x as f64 / (width * xs.len() as i64) as f64;
    let s_y_given_x = sum_y as f64 / (width * ys.len() as i64) as f64;
    0.5 * (s_x_given_y + s_y_given_x)
}

/// Count of ISO weeks containing at least one cross-log date pair with
/// positive kernel weight. All trade dates of each insider participate,
/// regardless of direction; a pair straddling a week boundary is attributed
/// to the week of its earlier date.
pub fn matched_weeks(xs: &[NaiveDate], ys: &[NaiveDate], cfg: &KernelConfig) -> usize {
    let width = i64::from(cfg.width_days);
    let mut weeks = BTreeSet::new();
    for &x in xs {
        // ys within (x - width, x + width) have positive weight.
        let lo = ys.partition_point(|&y| (x - y).num_days() >= width);
        for &y in &ys[lo..] {
            if (y - x).num_days() >= width {
                break;
            }
            weeks.insert(iso_week_key(x.min(y)));
        }
    }
    weeks.len()
}

/// Per-direction and activity-weighted similarity for a within-firm pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityScore {
    /// Best-match similarity over acquisition dates.
    pub s_acquire: f64,
    /// Best-match similarity over disposal dates.
    pub s_dispose: f64,
    /// Activity-weighted blend of the two directional scores.
    pub combined: f64,
    pub n_acquire_x: usize,
    pub n_acquire_y: usize,
    pub n_dispose_x: usize,
    pub n_dispose_y: usize,
    /// ISO weeks with at least one kernel-positive cross-log date pair.
    pub matched_weeks: usize,
}

impl SimilarityScore {
    /// Total pooled trade count of the pair.
    pub fn total_trades(&self) -> usize {
        self.n_acquire_x + self.n_acquire_y + self.n_dispose_x + self.n_dispose_y
    }
}

/// Score a within-firm pair of logs: directional best-match scores blended by
/// activity weights `(|X_A|+|Y_A|)/T` and `(|X_D|+|Y_D|)/T`.
pub fn combined_similarity(
    x: &InsiderFirmLog,
    y: &InsiderFirmLog,
    cfg: &KernelConfig,
) -> Result<SimilarityScore, SimilarityError> {
    let n_acquire_x = x.acquire_dates.len();
    let n_acquire_y = y.acquire_dates.len();
    let n_dispose_x = x.dispose_dates.len();
    let n_dispose_y = y.dispose_dates.len();
    let total = n_acquire_x + n_acquire_y + n_dispose_x + n_dispose_y;
    if total == 0 {
        return Err(SimilarityError::EmptyPair);
    }
    let s_acquire = best_match_similarity(&x.acquire_dates, &y.acquire_dates, cfg);
    let s_dispose = best_match_similarity(&x.dispose_dates, &y.dispose_dates, cfg);
    let t = total as f64;
    let combined = ((n_acquire_x + n_acquire_y) as f64 / t) * s_acquire
        + ((n_dispose_x + n_dispose_y) as f64 / t) * s_dispose;
    let weeks = matched_weeks(&x.all_dates(), &y.all_dates(), cfg);
    Ok(SimilarityScore {
        s_acquire,
        s_dispose,
        combined,
        n_acquire_x,
        n_acquire_y,
        n_dispose_x,
        n_dispose_y,
        matched_weeks: weeks,
    })
}
