//! Chance-overlap calibration of the edge threshold.
//!
//! Under an independent random-timing null, two insiders drawing `m` and `n`
//! trade days uniformly from `A` allowed days can only rarely reach a high
//! best-match similarity. This module evaluates the chance-neighbour
//! probability, the binomial KL tail bound, the family-wise calibrated
//! critical similarity, and a Monte-Carlo estimate of the actual
//! false-positive rate for comparison against the analytic bound.

use crate::seeding::derive_rng;
use crate::similarity::KernelConfig;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Inputs of the chance-overlap calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    /// Number of allowed trading days over the study horizon.
    pub allowed_days: u32,
    /// Trade counts of the two insiders in the worst (least stringent) case.
    pub min_trades_x: u32,
    pub min_trades_y: u32,
    /// Firm and insider population used for the within-firm pair estimate.
    pub n_firms: f64,
    pub n_insiders: f64,
    /// Family-wise error rate budget.
    pub alpha: f64,
    /// Kernel window; a date hits a counterpart within `±width` days.
    pub kernel_width_days: u32,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            allowed_days: 1200,
            min_trades_x: 8,
            min_trades_y: 8,
            n_firms: 9_426.0,
            n_insiders: 70_941.0,
            alpha: 0.05,
            kernel_width_days: 7,
        }
    }
}

/// Output of [`calibrate_threshold`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    /// Probability that one trade has some weekly neighbour among `n` draws.
    pub p_n: f64,
    /// Estimated number of within-firm insider pairs.
    pub n_pairs: f64,
    /// Per-pair KL budget `ln(n_pairs / alpha) / (m + n)`.
    pub required_kl: f64,
    /// Smallest similarity threshold meeting the KL budget.
    pub tau_star: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "no feasible threshold: required KL {required_kl} exceeds the maximum {max_kl} attainable below 1"
    )]
    Infeasible { required_kl: f64, max_kl: f64 },
}

/// Probability that a fixed trade date has at least one neighbour within the
/// kernel window among `n` independent uniform draws from `allowed_days`
/// days: `1 - (1 - span/A)^n` with the conventional 14-day hit span.
pub fn chance_neighbor_prob(n: u32, allowed_days: u32) -> f64 {
    chance_neighbor_prob_with_span(n, allowed_days, 14)
}

/// As [`chance_neighbor_prob`] with an explicit hit span (`2 * width`).
pub fn chance_neighbor_prob_with_span(n: u32, allowed_days: u32, span: u32) -> f64 {
    assert!(allowed_days > span, "allowed days must exceed the hit span");
    1.0 - (1.0 - f64::from(span) / f64::from(allowed_days)).powi(n as i32)
}

/// Binary KL divergence `D(a || b)` in nats.
///
/// Boundary values of `a` follow the `0·log 0 = 0` convention; a boundary
/// `b` with `a != b` diverges and is reported as `f64::INFINITY`.
pub fn kl_divergence(a: f64, b: f64) -> f64 {
    assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b), "probabilities required");
    if a == b {
        return 0.0;
    }
    if b == 0.0 || b == 1.0 {
        return f64::INFINITY;
    }
    let left = if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    let right = if a == 1.0 {
        0.0
    } else {
        (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln()
    };
    left + right
}

/// Solve for the family-wise calibrated critical similarity `tau_star`.
///
/// The pair count uses the mean-based approximation `n_firms * C(n_bar, 2)`
/// with `n_bar = n_insiders / n_firms`; the threshold is the smallest
/// `tau > p_n` with `D(tau || p_n) >= ln(n_pairs/alpha) / (m+n)`, located by
/// bisection to 1e-6.
pub fn calibrate_threshold(cfg: &CalibrationConfig) -> Result<CalibrationResult, CalibrationError> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(CalibrationError::InvalidParameter(format!(
            "alpha must lie in (0,1), got {}",
            cfg.alpha
        )));
    }
    if cfg.n_firms <= 0.0 || cfg.n_insiders <= 0.0 {
        return Err(CalibrationError::InvalidParameter(
            "firm and insider counts must be positive".into(),
        ));
    }
    let span = 2 * cfg.kernel_width_days;
    if cfg.allowed_days <= span {
        return Err(CalibrationError::InvalidParameter(format!(
            "allowed days {} must exceed the {}-day hit span",
            cfg.allowed_days, span
        )));
    }
    let n_bar = cfg.n_insiders / cfg.n_firms;
    let n_pairs = (cfg.n_firms * n_bar * (n_bar - 1.0) / 2.0).max(1.0);
    let m = f64::from(cfg.min_trades_x);
    let n = f64::from(cfg.min_trades_y);
    let required_kl = ((n_pairs / cfg.alpha).ln() / (m + n)).max(0.0);
    // The counterpart with more trades gives the larger (more conservative)
    // chance-neighbour probability.
    let p = chance_neighbor_prob_with_span(cfg.min_trades_x.max(cfg.min_trades_y), cfg.allowed_days, span);
    let max_kl = -p.ln(); // D(1 || p)
    if required_kl >= max_kl {
        return Err(CalibrationError::Infeasible { required_kl, max_kl });
    }
    // D(tau || p) is increasing in tau on (p, 1); bisect for the boundary.
    let mut lo = p;
    let mut hi = 1.0;
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if kl_divergence(mid, p) >= required_kl {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CalibrationResult {
        p_n: p,
        n_pairs,
        required_kl,
        tau_star: hi,
    })
}

/// Exact within-firm pair count `sum_C C(n_C, 2)` from per-firm insider
/// counts, for comparison with the mean-based approximation.
pub fn exact_within_firm_pairs(insiders_per_firm: &[u64]) -> u64 {
    insiders_per_firm.iter().map(|&n| n * n.saturating_sub(1) / 2).sum()
}

/// Chernoff upper bound on `P(S >= tau)` under the independent random-timing
/// null: `exp(-m D(tau||p_n) - n D(tau||p_m))`, or the vacuous 1 when `tau`
/// does not exceed both chance probabilities.
pub fn pair_tail_bound(m: u32, n: u32, tau: f64, allowed_days: u32) -> f64 {
    let p_n = chance_neighbor_prob(n, allowed_days);
    let p_m = chance_neighbor_prob(m, allowed_days);
    if tau <= p_n.max(p_m) {
        return 1.0;
    }
    let exponent = f64::from(m) * kl_divergence(tau, p_n) + f64::from(n) * kl_divergence(tau, p_m);
    (-exponent).exp()
}

/// Monte-Carlo estimate of `P(S >= tau)` under the independent-timing null:
/// insiders draw trade days independently and uniformly (with replacement)
/// from a line of `allowed_days` days, scored with the best-match measure.
pub fn empirical_false_positive_rate(
    m: u32,
    n: u32,
    tau: f64,
    allowed_days: u32,
    trials: u64,
    seed: u64,
) -> f64 {
    let cfg = KernelConfig::default();
    let width = i64::from(cfg.width_days);
    let chunks: u64 = 256;
    let per_chunk = trials / chunks;
    let remainder = trials % chunks;
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = derive_rng(seed, &[0x4d43 /* MC */, chunk]);
            let todo = per_chunk + u64::from(chunk < remainder);
            let mut hits = 0u64;
            let mut xs = vec![0i64; m as usize];
            let mut ys = vec![0i64; n as usize];
            for _ in 0..todo {
                for x in xs.iter_mut() {
                    *x = rng.random_range(0..i64::from(allowed_days));
                }
                for y in ys.iter_mut() {
                    *y = rng.random_range(0..i64::from(allowed_days));
                }
                if multiset_best_match(&xs, &ys, width) >= tau {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    hits as f64 / trials as f64
}

/// Best-match similarity on integer day multisets (draws with replacement
/// keep duplicates, so the list-based scorer does not apply here).
fn multiset_best_match(xs: &[i64], ys: &[i64], width: i64) -> f64 {
    let dir = |from: &[i64], to: &[i64]| -> i64 {
        from.iter()
            .map(|&a| {
                to.iter()
                    .map(|&b| (width - (a - b).abs()).max(0))
                    .max()
                    .unwrap_or(0)
            })
            .sum()
    };
    let sx = dir(xs, ys) as f64 / (width * xs.len() as i64) as f64;
    let sy = dir(ys, xs) as f64 / (width * ys.len() as i64) as f64;
    0.5 * (sx + sy)
}
