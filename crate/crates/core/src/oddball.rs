//! Egonet anomaly detection: structural features, power-law fits, out-line
//! deviation scores, a density-based local outlier factor, and the combined
//! ranking.

use crate::graph::CoTradeGraph;
use crate::types::InsiderId;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Structural features of one ego's induced neighbourhood subgraph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EgonetFeatures {
    pub ego: InsiderId,
    /// Ego plus neighbours.
    pub n_nodes: usize,
    /// Edges among egonet nodes (induced, so the ego's own edges count too).
    pub n_edges: usize,
    /// Sum of induced edge weights.
    pub total_weight: f64,
    /// Principal eigenvalue of the egonet's weighted adjacency.
    pub lambda_w: f64,
}

/// The four egonet power laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PowerLawKind {
    /// Edges vs nodes.
    Edpl,
    /// Total weight vs edges.
    Ewpl,
    /// Principal eigenvalue vs total weight.
    Elwpl,
    /// Edge weight vs weight rank within an egonet.
    Erpl,
}

impl PowerLawKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "edpl" => Some(PowerLawKind::Edpl),
            "ewpl" => Some(PowerLawKind::Ewpl),
            "elwpl" => Some(PowerLawKind::Elwpl),
            "erpl" => Some(PowerLawKind::Erpl),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PowerLawKind::Edpl => "edpl",
            PowerLawKind::Ewpl => "ewpl",
            PowerLawKind::Elwpl => "elwpl",
            PowerLawKind::Erpl => "erpl",
        }
    }
}

/// Least-squares power law `y = C x^theta` fitted on log-log pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub coefficient: f64,
    pub r_squared: f64,
    pub which: PowerLawKind,
}

impl PowerLawFit {
    /// Expected `y` at `x` under the fitted law.
    pub fn expected(&self, x: f64) -> f64 {
        self.coefficient * x.powf(self.exponent)
    }
}

/// Combined anomaly score of one ego.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierScore {
    pub ego: InsiderId,
    pub outline: f64,
    pub lof: f64,
    /// Mean of the two normalized anomaly ranks, in (0, 1].
    pub combined: f64,
    /// 1 = most anomalous; deterministic ties.
    pub combined_rank: usize,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub total_weight: f64,
    pub lambda_w: f64,
}

/// One verified power-law condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub which: PowerLawKind,
    pub exponent: Option<f64>,
    pub r_squared: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// None when there were too few points to fit.
    pub pass: Option<bool>,
    pub n_points: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum OddballError {
    #[error("ego {0} has no edges")]
    IsolatedEgo(InsiderId),
    #[error("node {0} not in graph")]
    UnknownEgo(InsiderId),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate fit: all x values equal")]
    DegenerateX,
    #[error("power-law fit needs strictly positive values")]
    NonPositivePoint,
    #[error("LOF neighbourhood k={k} must satisfy 1 <= k < {points} points")]
    BadNeighbourhood { k: usize, points: usize },
}

/// Features of the subgraph induced by `{ego} ∪ neighbours(ego)`.
pub fn egonet_features(graph: &CoTradeGraph, ego: usize) -> Result<EgonetFeatures, OddballError> {
    let adjacency = graph.adjacency();
    let ego_id = graph.nodes()[ego].clone();
    if adjacency[ego].is_empty() {
        return Err(OddballError::IsolatedEgo(ego_id));
    }
    let mut members: Vec<usize> = std::iter::once(ego)
        .chain(adjacency[ego].iter().map(|&(v, _)| v))
        .collect();
    members.sort_unstable();
    members.dedup();
    let position = |v: usize| members.binary_search(&v).ok();

    let k = members.len();
    let mut matrix = vec![0.0f64; k * k];
    let mut n_edges = 0usize;
    let mut total_weight = 0.0f64;
    for (mi, &u) in members.iter().enumerate() {
        for &(v, w) in &adjacency[u] {
            if u < v {
                if let Some(mj) = position(v) {
                    n_edges += 1;
                    total_weight += w;
                    matrix[mi * k + mj] = w;
                    matrix[mj * k + mi] = w;
                }
            }
        }
    }
    let lambda_w = principal_eigenvalue(&matrix, k);
    Ok(EgonetFeatures {
        ego: ego_id,
        n_nodes: k,
        n_edges,
        total_weight,
        lambda_w,
    })
}

/// Dominant eigenvalue of a small dense symmetric nonnegative matrix via
/// shifted power iteration.
fn principal_eigenvalue(matrix: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let shift = 1.0
        + (0..n)
            .map(|i| matrix[i * n..(i + 1) * n].iter().sum::<f64>())
            .fold(0.0f64, f64::max);
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut av = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        for i in 0..n {
            av[i] = (0..n).map(|j| matrix[i * n + j] * v[j]).sum();
        }
        lambda = v.iter().zip(&av).map(|(x, y)| x * y).sum();
        if lambda > 0.0 {
            let residual: f64 = v
                .iter()
                .zip(&av)
                .map(|(x, y)| (y - lambda * x).powi(2))
                .sum::<f64>()
                .sqrt();
            if residual <= 1e-12 * lambda.max(1.0) {
                break;
            }
        }
        let mut norm = 0.0;
        for i in 0..n {
            av[i] += shift * v[i];
            norm += av[i] * av[i];
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        for i in 0..n {
            v[i] = av[i] / norm;
        }
    }
    lambda.max(0.0)
}

/// Least-squares line on `(ln x, ln y)`; the slope is the exponent and
/// `exp(intercept)` the coefficient.
pub fn fit_power_law(points: &[(f64, f64)], which: PowerLawKind) -> Result<PowerLawFit, OddballError> {
    if points.len() < 3 {
        return Err(OddballError::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(OddballError::NonPositivePoint);
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(OddballError::DegenerateX);
    }
    let sxy: f64 = logs
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else if ss_res < 1e-24 {
        1.0
    } else {
        0.0
    };
    Ok(PowerLawFit {
        exponent: slope,
        coefficient: intercept.exp(),
        r_squared,
        which,
    })
}

/// Out-line deviation of `(x, y)` from the fitted curve:
/// `(max(y, f(x)) / min(y, f(x))) * ln(|y - f(x)| + 1)`.
pub fn outline_score(y: f64, x: f64, fit: &PowerLawFit) -> f64 {
    let expected = fit.expected(x);
    let ratio = y.max(expected) / y.min(expected);
    ratio * ((y - expected).abs() + 1.0).ln()
}

/// Local outlier factor of each 2-D point with the standard
/// reachability-density definition. Duplicate points are kept apart by a
/// small distance floor so densities stay finite.
pub fn local_outlier_factor(points: &[(f64, f64)], k: usize) -> Result<Vec<f64>, OddballError> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(OddballError::BadNeighbourhood { k, points: n });
    }
    const FLOOR: f64 = 1e-12;
    let dist = |a: usize, b: usize| -> f64 {
        let dx = points[a].0 - points[b].0;
        let dy = points[a].1 - points[b].1;
        (dx * dx + dy * dy).sqrt().max(FLOOR)
    };

    // k-distance and neighbourhood (ties at the k-distance included).
    let mut kdist = vec![0.0f64; n];
    let mut neighbours: Vec<Vec<usize>> = Vec::with_capacity(n);
    for a in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&b| b != a)
            .map(|b| (dist(a, b), b))
            .collect();
        others.sort_by(|x, y| x.partial_cmp(y).unwrap());
        kdist[a] = others[k - 1].0;
        neighbours.push(
            others
                .into_iter()
                .take_while(|&(d, _)| d <= kdist[a])
                .map(|(_, b)| b)
                .collect(),
        );
    }

    let lrd: Vec<f64> = (0..n)
        .map(|a| {
            let total: f64 = neighbours[a]
                .iter()
                .map(|&b| kdist[b].max(dist(a, b)))
                .sum();
            neighbours[a].len() as f64 / total
        })
        .collect();

    Ok((0..n)
        .map(|a| {
            neighbours[a].iter().map(|&b| lrd[b] / lrd[a]).sum::<f64>()
                / neighbours[a].len() as f64
        })
        .collect())
}

/// Fractional ranks (1-based, ties averaged) of values in ascending order.
fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// The feature pair `(x, y)` feeding the out-line fit for a law.
fn law_point(features: &EgonetFeatures, law: PowerLawKind) -> (f64, f64) {
    match law {
        PowerLawKind::Edpl => (features.n_nodes as f64, features.n_edges as f64),
        PowerLawKind::Ewpl => (features.n_edges as f64, features.total_weight),
        PowerLawKind::Elwpl => (features.total_weight, features.lambda_w),
        PowerLawKind::Erpl => panic!("the rank law is per-ego and does not feed the out-line fit"),
    }
}

/// The default LOF neighbourhood: `min(20, egos - 1)`.
pub fn default_lof_k(n_egos: usize) -> usize {
    20.min(n_egos.saturating_sub(1))
}

/// Rank every ego by the combination of its out-line deviation from the
/// chosen law and its local outlier factor in the log-feature plane. The
/// combined score is the mean of the two normalized anomaly ranks; output is
/// sorted most-anomalous first with ties broken on insider id.
pub fn rank_anomalies(
    graph: &CoTradeGraph,
    law: PowerLawKind,
    lof_k: usize,
) -> Result<Vec<OutlierScore>, OddballError> {
    let n = graph.node_count();
    if n < 3 {
        return Err(OddballError::TooFewPoints { needed: 3, got: n });
    }
    let features: Vec<EgonetFeatures> = (0..n)
        .into_par_iter()
        .map(|ego| egonet_features(graph, ego))
        .collect::<Result<_, _>>()?;
    let points: Vec<(f64, f64)> = features.iter().map(|f| law_point(f, law)).collect();
    let fit = fit_power_law(&points, law)?;
    let outline: Vec<f64> = points
        .iter()
        .map(|&(x, y)| outline_score(y, x, &fit))
        .collect();
    let log_points: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let lof = local_outlier_factor(&log_points, lof_k.min(n - 1).max(1))?;

    let outline_ranks = fractional_ranks(&outline);
    let lof_ranks = fractional_ranks(&lof);
    let mut scores: Vec<OutlierScore> = (0..n)
        .map(|i| OutlierScore {
            ego: features[i].ego.clone(),
            outline: outline[i],
            lof: lof[i],
            combined: (outline_ranks[i] / n as f64 + lof_ranks[i] / n as f64) / 2.0,
            combined_rank: 0,
            n_nodes: features[i].n_nodes,
            n_edges: features[i].n_edges,
            total_weight: features[i].total_weight,
            lambda_w: features[i].lambda_w,
        })
        .collect();
    scores.sort_by(|a, b| {
        b.combined
            .partial_cmp(&a.combined)
            .unwrap()
            .then_with(|| a.ego.cmp(&b.ego))
    });
    for (rank, score) in scores.iter_mut().enumerate() {
        score.combined_rank = rank + 1;
    }
    Ok(scores)
}

/// Fit all four egonet power laws and check them against their expected
/// exponent ranges. The rank law is fitted per ego (weights sorted
/// descending against their 1-based rank) and reported as the median
/// exponent.
pub fn verify_conditions(graph: &CoTradeGraph) -> Vec<ConditionCheck> {
    let n = graph.node_count();
    let features: Vec<EgonetFeatures> = (0..n)
        .filter_map(|ego| egonet_features(graph, ego).ok())
        .collect();

    let mut checks = Vec::with_capacity(4);
    for (law, lower, upper) in [
        (PowerLawKind::Edpl, Some(1.0), Some(2.0)),
        (PowerLawKind::Ewpl, Some(1.0), None),
        (PowerLawKind::Elwpl, Some(0.5), Some(1.0)),
    ] {
        let points: Vec<(f64, f64)> = features.iter().map(|f| law_point(f, law)).collect();
        let check = match fit_power_law(&points, law) {
            Ok(fit) => ConditionCheck {
                which: law,
                exponent: Some(fit.exponent),
                r_squared: Some(fit.r_squared),
                lower,
                upper,
                pass: Some(
                    lower.map_or(true, |lo| fit.exponent >= lo)
                        && upper.map_or(true, |hi| fit.exponent <= hi),
                ),
                n_points: points.len(),
            },
            Err(_) => ConditionCheck {
                which: law,
                exponent: None,
                r_squared: None,
                lower,
                upper,
                pass: None,
                n_points: points.len(),
            },
        };
        checks.push(check);
    }

    // Rank law: per-ego weight-vs-rank fits, median exponent, theta <= 0.
    let adjacency = graph.adjacency();
    let mut exponents: Vec<f64> = Vec::new();
    for ego in 0..n {
        let mut members: Vec<usize> = std::iter::once(ego)
            .chain(adjacency[ego].iter().map(|&(v, _)| v))
            .collect();
        members.sort_unstable();
        members.dedup();
        let mut weights: Vec<f64> = Vec::new();
        for &u in &members {
            for &(v, w) in &adjacency[u] {
                if u < v && members.binary_search(&v).is_ok() {
                    weights.push(w);
                }
            }
        }
        if weights.len() < 3 {
            continue;
        }
        weights.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let points: Vec<(f64, f64)> = weights
            .iter()
            .enumerate()
            .map(|(rank, &w)| ((rank + 1) as f64, w))
            .collect();
        if let Ok(fit) = fit_power_law(&points, PowerLawKind::Erpl) {
            exponents.push(fit.exponent);
        }
    }
    exponents.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if exponents.is_empty() {
        None
    } else {
        Some(exponents[exponents.len() / 2])
    };
    checks.push(ConditionCheck {
        which: PowerLawKind::Erpl,
        exponent: median,
        r_squared: None,
        lower: None,
        upper: Some(0.0),
        pass: median.map(|m| m <= 0.0),
        n_points: exponents.len(),
    });
    checks
}
