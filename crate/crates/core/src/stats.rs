//! Topological metrics and replica-ensemble summaries: means, percentile
//! envelopes, Z-scores, and empirical p-values.

use crate::graph::CoTradeGraph;
use serde::Serialize;
use thiserror::Error;

/// Weight level above which an edge counts as an ultra-strong tie.
pub const ULTRA_STRONG_LEVEL: f64 = 0.9;

/// The nine metrics reported per graph, in report order.
pub const METRIC_NAMES: [&str; 9] = [
    "nodes",
    "edges",
    "avg_degree",
    "n_components",
    "giant_component",
    "multi_firm_insiders",
    "prop_multi_firm",
    "avg_edge_weight",
    "ultra_strong_ties",
];

/// Metric values for one graph. Ratio metrics are `None` when their
/// denominator is empty (e.g. averages over an empty graph).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricVector {
    pub nodes: u64,
    pub edges: u64,
    pub avg_degree: Option<f64>,
    pub n_components: u64,
    pub giant_component: u64,
    pub multi_firm_insiders: u64,
    pub prop_multi_firm: Option<f64>,
    pub avg_edge_weight: Option<f64>,
    pub ultra_strong_ties: u64,
}

impl MetricVector {
    /// Values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [Option<f64>; 9] {
        [
            Some(self.nodes as f64),
            Some(self.edges as f64),
            self.avg_degree,
            Some(self.n_components as f64),
            Some(self.giant_component as f64),
            Some(self.multi_firm_insiders as f64),
            self.prop_multi_firm,
            self.avg_edge_weight,
            Some(self.ultra_strong_ties as f64),
        ]
    }
}

/// Compute the metric vector of a graph. The multi-firm proportion is taken
/// over the full insider population behind the graph, not just graph nodes.
pub fn compute_metrics(graph: &CoTradeGraph) -> MetricVector {
    let nodes = graph.node_count() as u64;
    let edges = graph.edge_count() as u64;
    let (multi_firm, _) = graph.multi_firm_insiders();
    let avg_edge_weight = if edges > 0 {
        Some(graph.edges().iter().map(|e| e.weight).sum::<f64>() / edges as f64)
    } else {
        None
    };
    MetricVector {
        nodes,
        edges,
        avg_degree: (nodes > 0).then(|| 2.0 * edges as f64 / nodes as f64),
        n_components: graph.components().len() as u64,
        giant_component: graph.giant_component_size() as u64,
        multi_firm_insiders: multi_firm as u64,
        prop_multi_firm: (graph.population() > 0)
            .then(|| multi_firm as f64 / graph.population() as f64),
        avg_edge_weight,
        ultra_strong_ties: graph.ties_above(ULTRA_STRONG_LEVEL) as u64,
    }
}

/// Null-ensemble summary for one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub metric: String,
    pub observed: Option<f64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Nearest-rank 5th and 95th percentiles over replicas.
    pub p5: Option<f64>,
    pub p95: Option<f64>,
    /// Standardised distance; absent exactly when `undefined_z` is set.
    pub z: Option<f64>,
    /// Set when the null variance is zero or the metric is undefined.
    pub undefined_z: bool,
    /// Fraction of replicas at least as extreme as the observation, on the
    /// side of the null mean the observation falls on.
    pub p_one_sided: Option<f64>,
    pub p_two_sided: Option<f64>,
    /// Replicas for which the metric was defined.
    pub n_defined: usize,
}

/// Per-metric summaries over a replica ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullSummary {
    pub replicas: usize,
    pub metrics: Vec<MetricSummary>,
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least 2 replicas, got {0}")]
    TooFewReplicas(usize),
}

/// Nearest-rank percentile of sorted values: the `ceil(p/100 * n)`-th
/// smallest.
fn nearest_rank(sorted: &[f64], percentile: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = ((percentile / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Summarize a replica ensemble against the observed metrics.
pub fn summarize_nulls(
    observed: &MetricVector,
    replicas: &[MetricVector],
) -> Result<NullSummary, StatsError> {
    if replicas.len() < 2 {
        return Err(StatsError::TooFewReplicas(replicas.len()));
    }
    let observed_values = observed.values();
    let replica_values: Vec<[Option<f64>; 9]> = replicas.iter().map(MetricVector::values).collect();

    let metrics = METRIC_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let obs = observed_values[k];
            let mut defined: Vec<f64> = replica_values.iter().filter_map(|v| v[k]).collect();
            defined.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let n = defined.len();
            if n < 2 {
                return MetricSummary {
                    metric: name.to_string(),
                    observed: obs,
                    mean: None,
                    std: None,
                    p5: None,
                    p95: None,
                    z: None,
                    undefined_z: true,
                    p_one_sided: None,
                    p_two_sided: None,
                    n_defined: n,
                };
            }
            let mean = defined.iter().sum::<f64>() / n as f64;
            let var = defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let std = var.sqrt();
            let p5 = nearest_rank(&defined, 5.0);
            let p95 = nearest_rank(&defined, 95.0);
            let (z, undefined_z, p_one, p_two) = match obs {
                Some(obs) if std > 0.0 => {
                    let ge = defined.iter().filter(|&&v| v >= obs).count() as f64 / n as f64;
                    let le = defined.iter().filter(|&&v| v <= obs).count() as f64 / n as f64;
                    let one = if obs >= mean { ge } else { le };
                    let two = (2.0 * ge.min(le)).min(1.0);
                    (Some((obs - mean) / std), false, Some(one), Some(two))
                }
                _ => (None, true, None, None),
            };
            MetricSummary {
                metric: name.to_string(),
                observed: obs,
                mean: Some(mean),
                std: Some(std),
                p5: Some(p5),
                p95: Some(p95),
                z,
                undefined_z,
                p_one_sided: p_one,
                p_two_sided: p_two,
                n_defined: n,
            }
        })
        .collect();

    Ok(NullSummary {
        replicas: replicas.len(),
        metrics,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Report CSV: one row per (metric, null model).
pub fn summaries_to_csv(summaries: &[(&str, &NullSummary)], observed: &MetricVector) -> String {
    let mut out =
        String::from("metric,null_model,observed,mean,std,p5,p95,z,p_one_sided,p_two_sided,n_replicas\n");
    if summaries.is_empty() {
        // Observed-only report when null stages are skipped.
        for (k, name) in METRIC_NAMES.iter().enumerate() {
            out.push_str(&format!(
                "{},none,{},NA,NA,NA,NA,NA,NA,NA,0\n",
                name,
                fmt_opt(observed.values()[k])
            ));
        }
        return out;
    }
    for (model, summary) in summaries {
        for m in &summary.metrics {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                m.metric,
                model,
                fmt_opt(m.observed),
                fmt_opt(m.mean),
                fmt_opt(m.std),
                fmt_opt(m.p5),
                fmt_opt(m.p95),
                fmt_opt(m.z),
                fmt_opt(m.p_one_sided),
                fmt_opt(m.p_two_sided),
                m.n_defined,
            ));
        }
    }
    out
}
