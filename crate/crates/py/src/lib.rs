//! Python bindings: the similarity kernel, pair scoring, graph building and
//! its analyses, null-model replicas, and threshold calibration.
//!
//! Dates cross the boundary as ISO `YYYY-MM-DD` strings; events as
//! `(insider_id, firm_id, date, direction)` tuples with direction `A`/`D`.

use chrono::NaiveDate;
use cotrade_core::assignment::assignment_similarity;
use cotrade_core::calibration::{
    calibrate_threshold, chance_neighbor_prob, empirical_false_positive_rate, kl_divergence,
    pair_tail_bound, CalibrationConfig,
};
use cotrade_core::centrality::{closeness_with, eigenvector, DistanceMode};
use cotrade_core::graph::{build_graph, CoTradeGraph, EdgeFilterConfig, SimilarityMethod};
use cotrade_core::ingest::{aggregate_daily, filter_institutions, read_trades_csv, IngestConfig};
use cotrade_core::nulls::{
    generate_calibrated, generate_shuffled, open_day_calendar, CalibratedNullConfig, ShuffleBin,
    ShuffleConfig,
};
use cotrade_core::oddball::{default_lof_k, rank_anomalies, verify_conditions, PowerLawKind};
use cotrade_core::similarity::{
    best_match_similarity, combined_similarity, kernel as kernel_weight, KernelConfig,
};
use cotrade_core::stats::compute_metrics;
use cotrade_core::types::{Direction, Horizon, InsiderFirmLog, TradeEvent};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::path::PathBuf;

fn parse_date(s: &str) -> PyResult<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| PyValueError::new_err(format!("invalid date {s:?}, expected YYYY-MM-DD")))
}

fn parse_dates(dates: Vec<String>) -> PyResult<Vec<NaiveDate>> {
    let mut out: Vec<NaiveDate> = dates.iter().map(|s| parse_date(s)).collect::<PyResult<_>>()?;
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn parse_events(events: Vec<(String, String, String, String)>) -> PyResult<Vec<TradeEvent>> {
    events
        .into_iter()
        .map(|(insider, firm, date, direction)| {
            let direction = Direction::from_code(&direction).ok_or_else(|| {
                PyValueError::new_err(format!("invalid direction {direction:?}, expected A or D"))
            })?;
            Ok(TradeEvent::new(insider, firm, parse_date(&date)?, direction))
        })
        .collect()
}

fn events_to_tuples(events: &[TradeEvent]) -> Vec<(String, String, String, String)> {
    events
        .iter()
        .map(|e| {
            (
                e.insider_id.clone(),
                e.firm_id.clone(),
                e.date.to_string(),
                e.direction.code().to_string(),
            )
        })
        .collect()
}

fn method_from(name: &str) -> PyResult<SimilarityMethod> {
    SimilarityMethod::parse(name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown method {name:?}")))
}

fn log_from_dates(
    insider: &str,
    acquires: Vec<String>,
    disposes: Vec<String>,
) -> PyResult<InsiderFirmLog> {
    InsiderFirmLog::new(insider, "pair", parse_dates(acquires)?, parse_dates(disposes)?)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Linear same-week kernel weight for a day gap.
#[pyfunction]
#[pyo3(signature = (gap_days, width_days = 7))]
fn kernel(gap_days: u64, width_days: u32) -> f64 {
    kernel_weight(gap_days, &KernelConfig::new(width_days))
}

/// Symmetric best-match similarity of two date lists.
#[pyfunction]
#[pyo3(signature = (x_dates, y_dates, width_days = 7))]
fn best_match(x_dates: Vec<String>, y_dates: Vec<String>, width_days: u32) -> PyResult<f64> {
    let xs = parse_dates(x_dates)?;
    let ys = parse_dates(y_dates)?;
    Ok(best_match_similarity(&xs, &ys, &KernelConfig::new(width_days)))
}

/// Full pair score: directional best-match scores, the activity-weighted
/// blend, matched weeks, and the assignment-based alternative.
#[pyfunction]
#[pyo3(signature = (x_acquires, x_disposes, y_acquires, y_disposes, width_days = 7))]
fn pair_score(
    py: Python<'_>,
    x_acquires: Vec<String>,
    x_disposes: Vec<String>,
    y_acquires: Vec<String>,
    y_disposes: Vec<String>,
    width_days: u32,
) -> PyResult<Py<PyDict>> {
    let x = log_from_dates("x", x_acquires, x_disposes)?;
    let y = log_from_dates("y", y_acquires, y_disposes)?;
    let cfg = KernelConfig::new(width_days);
    let best =
        combined_similarity(&x, &y, &cfg).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let assign =
        assignment_similarity(&x, &y, &cfg).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let out = PyDict::new(py);
    out.set_item("s_acquire", best.s_acquire)?;
    out.set_item("s_dispose", best.s_dispose)?;
    out.set_item("combined", best.combined)?;
    out.set_item("matched_weeks", best.matched_weeks)?;
    out.set_item("assignment_combined", assign.combined)?;
    out.set_item("assignment_acquire", assign.acquire.score)?;
    out.set_item("assignment_dispose", assign.dispose.score)?;
    out.set_item("assignment_exceeds_unit", assign.exceeds_unit)?;
    Ok(out.into())
}

/// The weighted co-trading graph and its analyses.
#[pyclass(name = "Graph")]
struct PyGraph {
    inner: CoTradeGraph,
}

#[pymethods]
impl PyGraph {
    /// Build from a trade CSV (or canonical CSV): institutions filtered,
    /// daily aggregation, then the edge filters.
    #[staticmethod]
    #[pyo3(signature = (
        path,
        min_trades = 8,
        min_overlap_weeks = 4,
        score_threshold = 0.8,
        width_days = 7,
        method = "best-match",
        require_tenure_overlap = true,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn from_trades_csv(
        path: PathBuf,
        min_trades: usize,
        min_overlap_weeks: usize,
        score_threshold: f64,
        width_days: u32,
        method: &str,
        require_tenure_overlap: bool,
    ) -> PyResult<Self> {
        let ingest_cfg = IngestConfig::default();
        let outcome =
            read_trades_csv(&path, &ingest_cfg).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let (kept, _) = filter_institutions(outcome.events, &ingest_cfg);
        let logs = aggregate_daily(&kept);
        let cfg = EdgeFilterConfig {
            min_trades,
            min_overlap_weeks,
            score_threshold,
            require_tenure_overlap,
            method: method_from(method)?,
            kernel: KernelConfig::new(width_days),
        };
        Ok(PyGraph {
            inner: build_graph(&logs, &cfg),
        })
    }

    /// Build from in-memory events, same pipeline as `from_trades_csv`.
    #[staticmethod]
    #[pyo3(signature = (events, min_trades = 8, min_overlap_weeks = 4, score_threshold = 0.8, width_days = 7, method = "best-match"))]
    fn from_events(
        events: Vec<(String, String, String, String)>,
        min_trades: usize,
        min_overlap_weeks: usize,
        score_threshold: f64,
        width_days: u32,
        method: &str,
    ) -> PyResult<Self> {
        let logs = aggregate_daily(&parse_events(events)?);
        let cfg = EdgeFilterConfig {
            min_trades,
            min_overlap_weeks,
            score_threshold,
            require_tenure_overlap: true,
            method: method_from(method)?,
            kernel: KernelConfig::new(width_days),
        };
        Ok(PyGraph {
            inner: build_graph(&logs, &cfg),
        })
    }

    /// Assemble directly from weighted edges `(a, b, weight, firm)`.
    #[staticmethod]
    fn from_edges(edges: Vec<(String, String, f64, String)>) -> PyResult<Self> {
        if edges.iter().any(|(a, b, _, _)| a == b) {
            return Err(PyValueError::new_err("self-loops are not allowed"));
        }
        Ok(PyGraph {
            inner: CoTradeGraph::from_weighted_edges(edges),
        })
    }

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn nodes(&self) -> Vec<String> {
        self.inner.nodes().to_vec()
    }

    /// Edges as `(a, b, weight, firm)` tuples.
    fn edges(&self) -> Vec<(String, String, f64, String)> {
        self.inner
            .edges()
            .iter()
            .map(|e| (e.a.clone(), e.b.clone(), e.weight, e.firm_id.clone()))
            .collect()
    }

    /// Connected components as lists of insider ids, largest first.
    fn components(&self) -> Vec<Vec<String>> {
        self.inner
            .components()
            .iter()
            .map(|members| {
                members
                    .iter()
                    .map(|&i| self.inner.nodes()[i].clone())
                    .collect()
            })
            .collect()
    }

    fn multi_firm_insiders(&self) -> Vec<String> {
        self.inner.multi_firm_insiders().1
    }

    /// The nine topological metrics as a dict (undefined ratios are None).
    fn metrics(&self, py: Python<'_>) -> PyResult<Py<PyDict>> {
        let m = compute_metrics(&self.inner);
        let out = PyDict::new(py);
        out.set_item("nodes", m.nodes)?;
        out.set_item("edges", m.edges)?;
        out.set_item("avg_degree", m.avg_degree)?;
        out.set_item("n_components", m.n_components)?;
        out.set_item("giant_component", m.giant_component)?;
        out.set_item("multi_firm_insiders", m.multi_firm_insiders)?;
        out.set_item("prop_multi_firm", m.prop_multi_firm)?;
        out.set_item("avg_edge_weight", m.avg_edge_weight)?;
        out.set_item("ultra_strong_ties", m.ultra_strong_ties)?;
        Ok(out.into())
    }

    /// Closeness ranking as `(insider, score)` pairs, best first.
    #[pyo3(signature = (weighted = false))]
    fn closeness(&self, weighted: bool) -> PyResult<Vec<(String, f64)>> {
        let mode = if weighted {
            DistanceMode::InverseWeight
        } else {
            DistanceMode::Unit
        };
        let ranking =
            closeness_with(&self.inner, mode).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(ranking
            .rows(&self.inner)
            .into_iter()
            .map(|(id, score, _)| (id.clone(), score))
            .collect())
    }

    /// Eigenvector ranking as `(insider, score)` pairs, best first.
    fn eigenvector(&self) -> PyResult<Vec<(String, f64)>> {
        let ranking =
            eigenvector(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(ranking
            .rows(&self.inner)
            .into_iter()
            .map(|(id, score, _)| (id.clone(), score))
            .collect())
    }

    /// Anomaly ranking as dicts, most anomalous first.
    #[pyo3(signature = (law = "edpl", lof_k = 0))]
    fn oddball(&self, py: Python<'_>, law: &str, lof_k: usize) -> PyResult<Vec<Py<PyDict>>> {
        let law = PowerLawKind::parse(law)
            .ok_or_else(|| PyValueError::new_err(format!("unknown law {law:?}")))?;
        let k = if lof_k > 0 {
            lof_k
        } else {
            default_lof_k(self.inner.node_count())
        };
        let scores =
            rank_anomalies(&self.inner, law, k).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        scores
            .into_iter()
            .map(|s| {
                let out = PyDict::new(py);
                out.set_item("rank", s.combined_rank)?;
                out.set_item("insider_id", s.ego)?;
                out.set_item("outline", s.outline)?;
                out.set_item("lof", s.lof)?;
                out.set_item("combined", s.combined)?;
                out.set_item("n_nodes", s.n_nodes)?;
                out.set_item("n_edges", s.n_edges)?;
                out.set_item("total_weight", s.total_weight)?;
                out.set_item("lambda_w", s.lambda_w)?;
                Ok(out.into())
            })
            .collect()
    }

    /// The four egonet power-law condition checks.
    fn power_law_conditions(&self, py: Python<'_>) -> PyResult<Vec<Py<PyDict>>> {
        verify_conditions(&self.inner)
            .into_iter()
            .map(|c| {
                let out = PyDict::new(py);
                out.set_item("which", c.which.name())?;
                out.set_item("exponent", c.exponent)?;
                out.set_item("r_squared", c.r_squared)?;
                out.set_item("pass", c.pass)?;
                out.set_item("n_points", c.n_points)?;
                Ok(out.into())
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(nodes={}, edges={}, components={})",
            self.inner.node_count(),
            self.inner.edge_count(),
            self.inner.components().len()
        )
    }
}

/// Open trading days: the first `open_days` weekdays of each quarter block.
#[pyfunction]
#[pyo3(signature = (start, end, quarter_length_days = 91, open_days_per_quarter = 30))]
fn open_days(
    start: &str,
    end: &str,
    quarter_length_days: u32,
    open_days_per_quarter: u32,
) -> PyResult<Vec<String>> {
    let cfg = CalibratedNullConfig {
        horizon: Horizon::new(parse_date(start)?, parse_date(end)?),
        quarter_length_days,
        open_days_per_quarter,
        ..CalibratedNullConfig::default()
    };
    Ok(open_day_calendar(&cfg).into_iter().map(|d| d.to_string()).collect())
}

/// One calibrated-null replica over the events' aggregated logs.
#[pyfunction]
#[pyo3(signature = (events, seed, replica, p_buy = 0.528))]
fn calibrated_replica(
    events: Vec<(String, String, String, String)>,
    seed: u64,
    replica: u64,
    p_buy: f64,
) -> PyResult<Vec<(String, String, String, String)>> {
    let logs = aggregate_daily(&parse_events(events)?);
    let cfg = CalibratedNullConfig {
        seed,
        p_buy,
        ..CalibratedNullConfig::default()
    };
    Ok(events_to_tuples(&generate_calibrated(&logs, &cfg, replica).events))
}

/// One constrained-shuffle replica of the events.
#[pyfunction]
#[pyo3(signature = (events, seed, replica, bin = "quarter"))]
fn shuffled_replica(
    events: Vec<(String, String, String, String)>,
    seed: u64,
    replica: u64,
    bin: &str,
) -> PyResult<Vec<(String, String, String, String)>> {
    let bin =
        ShuffleBin::parse(bin).ok_or_else(|| PyValueError::new_err(format!("unknown bin {bin:?}")))?;
    let cfg = ShuffleConfig {
        bin,
        seed,
        replicas: 1,
    };
    Ok(events_to_tuples(&generate_shuffled(&parse_events(events)?, &cfg, replica)))
}

/// Family-wise calibrated similarity threshold and its inputs.
#[pyfunction]
#[pyo3(signature = (firms = 9426.0, insiders = 70941.0, alpha = 0.05, min_trades = 8, allowed_days = 1200))]
fn calibrate(
    py: Python<'_>,
    firms: f64,
    insiders: f64,
    alpha: f64,
    min_trades: u32,
    allowed_days: u32,
) -> PyResult<Py<PyDict>> {
    let cfg = CalibrationConfig {
        allowed_days,
        min_trades_x: min_trades,
        min_trades_y: min_trades,
        n_firms: firms,
        n_insiders: insiders,
        alpha,
        kernel_width_days: 7,
    };
    let result = calibrate_threshold(&cfg).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let out = PyDict::new(py);
    out.set_item("p_n", result.p_n)?;
    out.set_item("n_pairs", result.n_pairs)?;
    out.set_item("required_kl", result.required_kl)?;
    out.set_item("tau_star", result.tau_star)?;
    Ok(out.into())
}

/// Chance that a trade has a weekly neighbour among n uniform draws.
#[pyfunction]
#[pyo3(signature = (n, allowed_days = 1200))]
fn chance_prob(n: u32, allowed_days: u32) -> f64 {
    chance_neighbor_prob(n, allowed_days)
}

/// Binary KL divergence in nats.
#[pyfunction]
fn binary_kl(a: f64, b: f64) -> PyResult<f64> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return Err(PyValueError::new_err("probabilities must lie in [0, 1]"));
    }
    Ok(kl_divergence(a, b))
}

/// Chernoff bound on the chance of similarity >= tau for an (m, n) pair.
#[pyfunction]
fn tail_bound(m: u32, n: u32, tau: f64, allowed_days: u32) -> f64 {
    pair_tail_bound(m, n, tau, allowed_days)
}

/// Monte-Carlo false-positive rate under the independent-timing null.
#[pyfunction]
#[pyo3(signature = (m, n, tau, allowed_days, trials, seed = 0))]
fn false_positive_rate(m: u32, n: u32, tau: f64, allowed_days: u32, trials: u64, seed: u64) -> f64 {
    empirical_false_positive_rate(m, n, tau, allowed_days, trials, seed)
}

#[pymodule]
fn cotrade_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(best_match, m)?)?;
    m.add_function(wrap_pyfunction!(pair_score, m)?)?;
    m.add_function(wrap_pyfunction!(open_days, m)?)?;
    m.add_function(wrap_pyfunction!(calibrated_replica, m)?)?;
    m.add_function(wrap_pyfunction!(shuffled_replica, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(chance_prob, m)?)?;
    m.add_function(wrap_pyfunction!(binary_kl, m)?)?;
    m.add_function(wrap_pyfunction!(tail_bound, m)?)?;
    m.add_function(wrap_pyfunction!(false_positive_rate, m)?)?;
    Ok(())
}
