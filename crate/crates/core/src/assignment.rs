//! Assignment-based similarity: one-to-one matching of trade dates within the
//! kernel window, normalized by overlap-capable calendar weeks.
//!
//! Unlike the best-match score, a single trade here cannot explain several
//! counterpart trades, and weeks in which only one insider traded do not
//! enter the denominator. The week normalization can push a score above 1
//! when one shared week holds several well-aligned pairs; such scores are
//! reported raw and flagged, not clamped.

use crate::matching::{max_weight_matching, MatchEdge};
use crate::similarity::{KernelConfig, SimilarityError};
use crate::types::{iso_week_key, InsiderFirmLog};
use chrono::NaiveDate;
use std::collections::BTreeSet;

/// Matching outcome for one trade direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryAssignment {
    /// Matched `(x_date, y_date)` pairs of the maximum-weight matching.
    pub matching: Vec<(NaiveDate, NaiveDate)>,
    /// Total kernel weight of the matching.
    pub matched_weight: f64,
    /// Number of ISO weeks in which both insiders traded in this direction.
    pub overlap_weeks: usize,
    /// `matched_weight / overlap_weeks`, or 0 when no week overlaps.
    pub score: f64,
}

/// Assignment-based similarity for a within-firm pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentScore {
    pub acquire: CategoryAssignment,
    pub dispose: CategoryAssignment,
    /// Activity-weighted blend of the two category scores.
    pub combined: f64,
    /// Set when a category score exceeds 1 (dense shared weeks).
    pub exceeds_unit: bool,
}

fn overlap_weeks(xs: &[NaiveDate], ys: &[NaiveDate]) -> usize {
    let wx: BTreeSet<_> = xs.iter().map(|&d| iso_week_key(d)).collect();
    let wy: BTreeSet<_> = ys.iter().map(|&d| iso_week_key(d)).collect();
    wx.intersection(&wy).count()
}

fn assign_category(xs: &[NaiveDate], ys: &[NaiveDate], cfg: &KernelConfig) -> CategoryAssignment {
    let width = i64::from(cfg.width_days);
    let mut edges = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let gap = (x - y).num_days().abs();
            if gap < width {
                edges.push(MatchEdge {
                    left: i,
                    right: j,
                    weight: width - gap,
                });
            }
        }
    }
    let matching = max_weight_matching(xs.len(), ys.len(), &edges);
    let matched_weight = matching.total_weight as f64 / width as f64;
    let weeks = overlap_weeks(xs, ys);
    let score = if weeks > 0 {
        matched_weight / weeks as f64
    } else {
        0.0
    };
    CategoryAssignment {
        matching: matching.pairs.iter().map(|&(i, j)| (xs[i], ys[j])).collect(),
        matched_weight,
        overlap_weeks: weeks,
        score,
    }
}

/// Score a pair of logs with the one-to-one matching measure, per direction,
/// blended by the activity weights `T_A/T` and `T_D/T`.
pub fn assignment_similarity(
    x: &InsiderFirmLog,
    y: &InsiderFirmLog,
    cfg: &KernelConfig,
) -> Result<AssignmentScore, SimilarityError> {
    let t_acquire = x.acquire_dates.len() + y.acquire_dates.len();
    let t_dispose = x.dispose_dates.len() + y.dispose_dates.len();
    let total = t_acquire + t_dispose;
    if total == 0 {
        return Err(SimilarityError::EmptyPair);
    }
    let acquire = assign_category(&x.acquire_dates, &y.acquire_dates, cfg);
    let dispose = assign_category(&x.dispose_dates, &y.dispose_dates, cfg);
    let t = total as f64;
    let combined = (t_acquire as f64 / t) * acquire.score + (t_dispose as f64 / t) * dispose.score;
    let exceeds_unit = acquire.score > 1.0 || dispose.score > 1.0;
    Ok(AssignmentScore {
        acquire,
        dispose,
        combined,
        exceeds_unit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::date;
    use proptest::prelude::*;

    fn cfg() -> KernelConfig {
        KernelConfig::default()
    }

    fn log(insider: &str, acq: Vec<NaiveDate>, disp: Vec<NaiveDate>) -> InsiderFirmLog {
        InsiderFirmLog::new(insider, "f", acq, disp).unwrap()
    }

    #[test]
    fn extra_within_week_activity_is_neutral() {
        // X = {Mon}, Y = {Mon, Tue}, one shared week: the matching keeps the
        // same-day pair and the second y trade neither helps nor hurts.
        let monday = date(2015, 6, 1);
        let x = log("x", vec![monday], vec![]);
        let y = log("y", vec![monday, date(2015, 6, 2)], vec![]);
        let score = assignment_similarity(&x, &y, &cfg()).unwrap();
        assert_eq!(score.acquire.matching, vec![(monday, monday)]);
        assert_eq!(score.acquire.overlap_weeks, 1);
        assert_eq!(score.acquire.score, 1.0);
        assert_eq!(score.combined, 1.0);
    }

    #[test]
    fn no_shared_week_scores_zero() {
        // Dates four days apart but in different ISO weeks: the matching is
        // nonempty yet the score is zero by the empty-overlap convention.
        let x = log("x", vec![date(2015, 6, 5)], vec![]); // Friday
        let y = log("y", vec![date(2015, 6, 9)], vec![]); // next Tuesday
        let score = assignment_similarity(&x, &y, &cfg()).unwrap();
        assert_eq!(score.acquire.overlap_weeks, 0);
        assert_eq!(score.acquire.score, 0.0);
        assert_eq!(score.combined, 0.0);
    }

    #[test]
    fn identical_sets_can_exceed_unit() {
        // Two trades in one ISO week, all matched at weight 1: score = 2/1.
        let dates = vec![date(2015, 6, 1), date(2015, 6, 3)];
        let x = log("x", dates.clone(), vec![]);
        let y = log("y", dates.clone(), vec![]);
        let score = assignment_similarity(&x, &y, &cfg()).unwrap();
        assert_eq!(score.acquire.score, 2.0);
        assert!(score.exceeds_unit);
        // Spread over distinct weeks the same construction is exactly 1.
        let dates = vec![date(2015, 6, 1), date(2015, 6, 8), date(2015, 6, 15)];
        let x = log("x", dates.clone(), vec![]);
        let y = log("y", dates, vec![]);
        let score = assignment_similarity(&x, &y, &cfg()).unwrap();
        assert_eq!(score.acquire.score, 3.0 / 3.0);
        assert!(!score.exceeds_unit);
    }

    #[test]
    fn burst_cannot_inflate_the_matching() {
        // Five x trades on one day vs a single y trade: only one can match.
        // (Distinct dates within the same week, since logs are daily-unique.)
        let x = log(
            "x",
            vec![
                date(2015, 6, 1),
                date(2015, 6, 2),
                date(2015, 6, 3),
                date(2015, 6, 4),
                date(2015, 6, 5),
            ],
            vec![],
        );
        let y = log("y", vec![date(2015, 6, 3)], vec![]);
        let score = assignment_similarity(&x, &y, &cfg()).unwrap();
        assert_eq!(score.acquire.matching.len(), 1);
        assert_eq!(score.acquire.matching[0], (date(2015, 6, 3), date(2015, 6, 3)));
        assert_eq!(score.acquire.score, 1.0);
    }

    #[test]
    fn empty_pair_is_an_error() {
        // Logs cannot be empty by construction, so drive the error through
        // the internal seam.
        let x = InsiderFirmLog {
            insider_id: "x".into(),
            firm_id: "f".into(),
            acquire_dates: vec![],
            dispose_dates: vec![],
            first_date: date(2015, 1, 1),
            last_date: date(2015, 1, 1),
        };
        assert_eq!(
            assignment_similarity(&x, &x.clone(), &cfg()),
            Err(SimilarityError::EmptyPair)
        );
    }

    fn sorted_dates(days: Vec<i64>) -> Vec<NaiveDate> {
        let base = date(2016, 1, 1);
        let mut set: Vec<i64> = days;
        set.sort_unstable();
        set.dedup();
        set.into_iter()
            .map(|d| base + chrono::Days::new(d as u64))
            .collect()
    }

    proptest! {
        #[test]
        fn matching_is_injective_and_window_bounded(
            xs in proptest::collection::vec(0i64..60, 1..7),
            ys in proptest::collection::vec(0i64..60, 1..7),
        ) {
            let xs = sorted_dates(xs);
            let ys = sorted_dates(ys);
            let x = log("x", xs, vec![]);
            let y = log("y", ys, vec![]);
            let score = assignment_similarity(&x, &y, &cfg()).unwrap();
            let mut seen_x = BTreeSet::new();
            let mut seen_y = BTreeSet::new();
            for &(a, b) in &score.acquire.matching {
                prop_assert!(seen_x.insert(a), "x date matched twice");
                prop_assert!(seen_y.insert(b), "y date matched twice");
                prop_assert!((a - b).num_days().abs() <= 7);
            }
        }
    }
}
