//! End-to-end pipeline: ingest -> build -> nulls -> stats -> analyze ->
//! calibrate, with a flat diffable config and deterministic artifacts.
//!
//! Fixed config and seed give byte-identical CSV/JSON outputs regardless of
//! the thread count. Progress belongs on standard error; this module writes
//! data only to the artifact directory.

use crate::calibration::{calibrate_threshold, CalibrationConfig};
use crate::centrality::{closeness_with, eigenvector, CentralityRanking, DistanceMode};
use crate::graph::{build_graph, CoTradeGraph, EdgeFilterConfig, SimilarityMethod};
use crate::ingest::{
    aggregate_daily, expand_logs, filter_institutions, ingest_form4_dir, read_trades_csv,
    write_canonical_csv, write_rejects_csv, IngestConfig, IngestOutcome,
};
use crate::nulls::{
    generate_calibrated_with_calendar, generate_shuffled, open_day_calendar, CalibratedNullConfig,
    ShuffleBin, ShuffleConfig,
};
use crate::oddball::{default_lof_k, rank_anomalies, verify_conditions, PowerLawKind};
use crate::similarity::KernelConfig;
use crate::stats::{compute_metrics, summaries_to_csv, summarize_nulls, MetricVector, NullSummary};
use crate::types::{Horizon, InsiderFirmLog, TradeEvent};
use chrono::NaiveDate;
use rayon::prelude::*;
use serde_json::json;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Pipeline stages, with the process exit code each maps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Build,
    Null,
    Stats,
    Analyze,
    Calibrate,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Ingest => 10,
            Stage::Build => 20,
            Stage::Null => 30,
            Stage::Stats => 40,
            Stage::Analyze => 50,
            Stage::Calibrate => 60,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Build => "build",
            Stage::Null => "null",
            Stage::Stats => "stats",
            Stage::Analyze => "analyze",
            Stage::Calibrate => "calibrate",
        }
    }
}

/// A stage failure with enough context for a meaningful exit.
#[derive(Debug, thiserror::Error)]
#[error("{} stage failed: {message}", stage.name())]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
}

impl StageError {
    fn new(stage: Stage, message: impl std::fmt::Display) -> Self {
        StageError {
            stage,
            message: message.to_string(),
        }
    }
}

/// Full pipeline configuration; serializes to a flat key-value file.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub seed: u64,
    /// 0 uses the process-default thread pool.
    pub threads: usize,
    pub horizon: Horizon,
    pub kernel_width_days: u32,
    pub min_trades: usize,
    pub min_overlap_weeks: usize,
    pub score_threshold: f64,
    pub require_tenure_overlap: bool,
    pub method: SimilarityMethod,
    pub replicas: usize,
    pub null_calibrated: bool,
    pub null_shuffle: bool,
    pub shuffle_bin: ShuffleBin,
    pub p_buy: f64,
    pub quarter_length_days: u32,
    pub open_days_per_quarter: u32,
    pub closeness_weighted: bool,
    /// 0 keeps every row in ranking outputs.
    pub top_k: usize,
    pub oddball_law: PowerLawKind,
    /// 0 selects `min(20, egos - 1)`.
    pub lof_k: usize,
    pub alpha: f64,
    pub allowed_days: u32,
    /// 0 derives the population from the ingested data.
    pub calib_firms: f64,
    pub calib_insiders: f64,
    pub keep_latest_amendment: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: PathBuf::new(),
            output: PathBuf::from("out"),
            seed: 0,
            threads: 0,
            horizon: Horizon::default(),
            kernel_width_days: 7,
            min_trades: 8,
            min_overlap_weeks: 4,
            score_threshold: 0.8,
            require_tenure_overlap: true,
            method: SimilarityMethod::BestMatch,
            replicas: 1000,
            null_calibrated: true,
            null_shuffle: true,
            shuffle_bin: ShuffleBin::Quarter,
            p_buy: 0.528,
            quarter_length_days: 91,
            open_days_per_quarter: 30,
            closeness_weighted: false,
            top_k: 0,
            oddball_law: PowerLawKind::Edpl,
            lof_k: 0,
            alpha: 0.05,
            allowed_days: 1200,
            calib_firms: 0.0,
            calib_insiders: 0.0,
            keep_latest_amendment: true,
        }
    }
}

impl PipelineConfig {
    pub fn edge_filter(&self) -> EdgeFilterConfig {
        EdgeFilterConfig {
            min_trades: self.min_trades,
            min_overlap_weeks: self.min_overlap_weeks,
            score_threshold: self.score_threshold,
            require_tenure_overlap: self.require_tenure_overlap,
            method: self.method,
            kernel: KernelConfig::new(self.kernel_width_days),
        }
    }

    pub fn ingest_config(&self) -> IngestConfig {
        IngestConfig {
            horizon: self.horizon,
            keep_latest_amendment: self.keep_latest_amendment,
            ..IngestConfig::default()
        }
    }

    pub fn calibrated_null(&self) -> CalibratedNullConfig {
        CalibratedNullConfig {
            horizon: self.horizon,
            quarter_length_days: self.quarter_length_days,
            open_days_per_quarter: self.open_days_per_quarter,
            p_buy: self.p_buy,
            seed: self.seed,
            replicas: self.replicas,
        }
    }

    pub fn shuffle_null(&self) -> ShuffleConfig {
        ShuffleConfig {
            bin: self.shuffle_bin,
            seed: self.seed,
            replicas: self.replicas,
        }
    }

    /// Flat key-value rendering; parsing this text reproduces the config.
    pub fn to_flat_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("allowed_days", self.allowed_days.to_string());
        put("alpha", self.alpha.to_string());
        put("calib_firms", self.calib_firms.to_string());
        put("calib_insiders", self.calib_insiders.to_string());
        put("closeness_weighted", self.closeness_weighted.to_string());
        put("horizon_end", self.horizon.end.to_string());
        put("horizon_start", self.horizon.start.to_string());
        put("input", self.input.display().to_string());
        put("keep_latest_amendment", self.keep_latest_amendment.to_string());
        put("kernel_width_days", self.kernel_width_days.to_string());
        put("lof_k", self.lof_k.to_string());
        put("method", self.method.name().to_string());
        put("min_overlap_weeks", self.min_overlap_weeks.to_string());
        put("min_trades", self.min_trades.to_string());
        put("null_calibrated", self.null_calibrated.to_string());
        put("null_shuffle", self.null_shuffle.to_string());
        put("oddball_law", self.oddball_law.name().to_string());
        put("open_days_per_quarter", self.open_days_per_quarter.to_string());
        put("output", self.output.display().to_string());
        put("p_buy", self.p_buy.to_string());
        put("quarter_length_days", self.quarter_length_days.to_string());
        put("replicas", self.replicas.to_string());
        put("score_threshold", self.score_threshold.to_string());
        put("seed", self.seed.to_string());
        put("shuffle_bin", self.shuffle_bin.name().to_string());
        put("threads", self.threads.to_string());
        put("top_k", self.top_k.to_string());
        s
    }

    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        let parse_err = |what: &str| format!("invalid {what} value {value:?} for key {key:?}");
        match key {
            "input" => self.input = PathBuf::from(value),
            "output" => self.output = PathBuf::from(value),
            "seed" => self.seed = value.parse().map_err(|_| parse_err("integer"))?,
            "threads" => self.threads = value.parse().map_err(|_| parse_err("integer"))?,
            "horizon_start" => {
                self.horizon.start =
                    NaiveDate::parse_from_str(value, "%Y-%m-%d").map_err(|_| parse_err("date"))?
            }
            "horizon_end" => {
                self.horizon.end =
                    NaiveDate::parse_from_str(value, "%Y-%m-%d").map_err(|_| parse_err("date"))?
            }
            "kernel_width_days" => {
                self.kernel_width_days = value.parse().map_err(|_| parse_err("integer"))?
            }
            "min_trades" => self.min_trades = value.parse().map_err(|_| parse_err("integer"))?,
            "min_overlap_weeks" => {
                self.min_overlap_weeks = value.parse().map_err(|_| parse_err("integer"))?
            }
            "score_threshold" => {
                self.score_threshold = value.parse().map_err(|_| parse_err("number"))?
            }
            "require_tenure_overlap" => {
                self.require_tenure_overlap = value.parse().map_err(|_| parse_err("bool"))?
            }
            "method" => {
                self.method =
                    SimilarityMethod::parse(value).ok_or_else(|| parse_err("method"))?
            }
            "replicas" => self.replicas = value.parse().map_err(|_| parse_err("integer"))?,
            "null_calibrated" => {
                self.null_calibrated = value.parse().map_err(|_| parse_err("bool"))?
            }
            "null_shuffle" => self.null_shuffle = value.parse().map_err(|_| parse_err("bool"))?,
            "shuffle_bin" => {
                self.shuffle_bin = ShuffleBin::parse(value).ok_or_else(|| parse_err("bin"))?
            }
            "p_buy" => self.p_buy = value.parse().map_err(|_| parse_err("number"))?,
            "quarter_length_days" => {
                self.quarter_length_days = value.parse().map_err(|_| parse_err("integer"))?
            }
            "open_days_per_quarter" => {
                self.open_days_per_quarter = value.parse().map_err(|_| parse_err("integer"))?
            }
            "closeness_weighted" => {
                self.closeness_weighted = value.parse().map_err(|_| parse_err("bool"))?
            }
            "top_k" => self.top_k = value.parse().map_err(|_| parse_err("integer"))?,
            "oddball_law" => {
                self.oddball_law = PowerLawKind::parse(value).ok_or_else(|| parse_err("law"))?
            }
            "lof_k" => self.lof_k = value.parse().map_err(|_| parse_err("integer"))?,
            "alpha" => self.alpha = value.parse().map_err(|_| parse_err("number"))?,
            "allowed_days" => {
                self.allowed_days = value.parse().map_err(|_| parse_err("integer"))?
            }
            "calib_firms" => self.calib_firms = value.parse().map_err(|_| parse_err("number"))?,
            "calib_insiders" => {
                self.calib_insiders = value.parse().map_err(|_| parse_err("number"))?
            }
            "keep_latest_amendment" => {
                self.keep_latest_amendment = value.parse().map_err(|_| parse_err("bool"))?
            }
            _ => return Err(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    /// Parse a flat config file: `key = value` lines, `#` comments.
    pub fn from_flat_text(text: &str) -> Result<PipelineConfig, String> {
        let mut cfg = PipelineConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("line {}: expected 'key = value'", lineno + 1));
            };
            cfg.set(key.trim(), value)
                .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        }
        Ok(cfg)
    }
}

/// Ingested dataset plus bookkeeping for the summary JSON.
pub struct IngestedData {
    pub logs: Vec<InsiderFirmLog>,
    pub events: Vec<TradeEvent>,
    pub rejects_csv: String,
    pub summary: serde_json::Value,
}

/// Shared ingest path: parse, filter institutions, aggregate daily.
pub fn ingest_input(input: &Path, cfg: &IngestConfig) -> Result<IngestedData, String> {
    if !input.exists() {
        return Err(format!("input path {} does not exist", input.display()));
    }
    let outcome: IngestOutcome = if input.is_dir() {
        ingest_form4_dir(input, cfg).map_err(|e| e.to_string())?
    } else {
        read_trades_csv(input, cfg).map_err(|e| e.to_string())?
    };
    let parsed = outcome.events.len();
    let (kept, institutions_removed) = filter_institutions(outcome.events, cfg);
    let logs = aggregate_daily(&kept);
    let events = expand_logs(&logs);
    let insiders: BTreeSet<&str> = logs.iter().map(|l| l.insider_id.as_str()).collect();
    let firms: BTreeSet<&str> = logs.iter().map(|l| l.firm_id.as_str()).collect();
    let summary = json!({
        "events_parsed": parsed,
        "events_rejected": outcome.rejects.len(),
        "institution_events_removed": institutions_removed,
        "superseded_filings": outcome.superseded_filings,
        "canonical_events": events.len(),
        "logs": logs.len(),
        "insiders": insiders.len(),
        "firms": firms.len(),
    });
    let mut rejects_csv = Vec::new();
    write_rejects_csv(&outcome.rejects, &mut rejects_csv).map_err(|e| e.to_string())?;
    Ok(IngestedData {
        logs,
        events,
        rejects_csv: String::from_utf8(rejects_csv).expect("csv is utf-8"),
        summary,
    })
}

/// Metric vectors of null replicas, computed in parallel but collected in
/// replica order.
pub fn replica_metrics(
    logs: &[InsiderFirmLog],
    events: &[TradeEvent],
    cfg: &PipelineConfig,
    model: NullModel,
) -> Vec<MetricVector> {
    let filter = cfg.edge_filter();
    match model {
        NullModel::Calibrated => {
            let null_cfg = cfg.calibrated_null();
            let calendar = open_day_calendar(&null_cfg);
            (0..cfg.replicas as u64)
                .into_par_iter()
                .map(|replica| {
                    let draw =
                        generate_calibrated_with_calendar(logs, &null_cfg, replica, &calendar);
                    let replica_logs = aggregate_daily(&draw.events);
                    compute_metrics(&build_graph(&replica_logs, &filter))
                })
                .collect()
        }
        NullModel::Shuffle => {
            let null_cfg = cfg.shuffle_null();
            (0..cfg.replicas as u64)
                .into_par_iter()
                .map(|replica| {
                    let shuffled = generate_shuffled(events, &null_cfg, replica);
                    let replica_logs = aggregate_daily(&shuffled);
                    compute_metrics(&build_graph(&replica_logs, &filter))
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullModel {
    Calibrated,
    Shuffle,
}

impl NullModel {
    pub fn name(self) -> &'static str {
        match self {
            NullModel::Calibrated => "calibrated",
            NullModel::Shuffle => "shuffle",
        }
    }
}

/// Render a centrality ranking as `rank,insider_id,score,component_id`.
pub fn centrality_csv(ranking: &CentralityRanking, graph: &CoTradeGraph, top_k: usize) -> String {
    let mut out = String::from("rank,insider_id,score,component_id\n");
    for (i, (id, score, component)) in ranking.rows(graph).into_iter().enumerate() {
        if top_k > 0 && i >= top_k {
            break;
        }
        let _ = writeln!(out, "{},{},{},{}", i + 1, id, score, component);
    }
    out
}

/// Render the anomaly ranking as the documented CSV.
pub fn oddball_csv(scores: &[crate::oddball::OutlierScore], top_k: usize) -> String {
    let mut out =
        String::from("rank,insider_id,outline,lof,combined,n_nodes,n_edges,total_weight,lambda_w\n");
    for score in scores {
        if top_k > 0 && score.combined_rank > top_k {
            continue;
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            score.combined_rank,
            score.ego,
            score.outline,
            score.lof,
            score.combined,
            score.n_nodes,
            score.n_edges,
            score.total_weight,
            score.lambda_w,
        );
    }
    out
}

fn write_file(stage: Stage, path: &Path, contents: &str) -> Result<(), StageError> {
    fs::write(path, contents)
        .map_err(|e| StageError::new(stage, format!("writing {}: {e}", path.display())))
}

/// Counters the caller can log after a successful run.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PipelineReport {
    pub canonical_events: usize,
    pub nodes: usize,
    pub edges: usize,
    pub components: usize,
    pub replicas_run: usize,
}

/// Run every stage, writing artifacts under `cfg.output`.
///
/// An `_INCOMPLETE` marker exists while the run is in flight and on any
/// failure; it is removed at the very end of a successful run.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport, StageError> {
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| StageError::new(Stage::Ingest, e))?;
        pool.install(|| run_pipeline_inner(cfg))
    } else {
        run_pipeline_inner(cfg)
    }
}

fn run_pipeline_inner(cfg: &PipelineConfig) -> Result<PipelineReport, StageError> {
    let out = &cfg.output;
    fs::create_dir_all(out).map_err(|e| StageError::new(Stage::Ingest, e))?;
    let marker = out.join("_INCOMPLETE");
    fs::write(&marker, "run in progress or aborted\n")
        .map_err(|e| StageError::new(Stage::Ingest, e))?;
    write_file(Stage::Ingest, &out.join("config.resolved.txt"), &cfg.to_flat_text())?;

    // Ingest.
    let data = ingest_input(&cfg.input, &cfg.ingest_config())
        .map_err(|e| StageError::new(Stage::Ingest, e))?;
    let mut canonical = Vec::new();
    write_canonical_csv(&data.logs, &mut canonical)
        .map_err(|e| StageError::new(Stage::Ingest, e))?;
    write_file(
        Stage::Ingest,
        &out.join("canonical.csv"),
        std::str::from_utf8(&canonical).expect("csv is utf-8"),
    )?;
    write_file(Stage::Ingest, &out.join("rejects.csv"), &data.rejects_csv)?;
    write_file(
        Stage::Ingest,
        &out.join("ingest_summary.json"),
        &serde_json::to_string_pretty(&data.summary).expect("json"),
    )?;

    // Build.
    let filter = cfg.edge_filter();
    let graph = build_graph(&data.logs, &filter);
    write_file(Stage::Build, &out.join("edges.csv"), &graph.to_edge_csv())?;
    write_file(Stage::Build, &out.join("graph.graphml"), &graph.to_graphml())?;
    write_file(
        Stage::Build,
        &out.join("graph.json"),
        &serde_json::to_string_pretty(&graph.to_json()).expect("json"),
    )?;
    let build_summary = json!({
        "filters": {
            "min_trades": cfg.min_trades,
            "min_overlap_weeks": cfg.min_overlap_weeks,
            "score_threshold": cfg.score_threshold,
            "require_tenure_overlap": cfg.require_tenure_overlap,
            "method": cfg.method.name(),
        },
        "stages": graph.summary(),
        "components": graph.component_info(),
    });
    write_file(
        Stage::Build,
        &out.join("build_summary.json"),
        &serde_json::to_string_pretty(&build_summary).expect("json"),
    )?;

    // Nulls and stats.
    let observed = compute_metrics(&graph);
    let mut summaries: Vec<(NullModel, NullSummary)> = Vec::new();
    let mut replicas_run = 0usize;
    if cfg.replicas > 0 {
        for model in [NullModel::Calibrated, NullModel::Shuffle] {
            let enabled = match model {
                NullModel::Calibrated => cfg.null_calibrated,
                NullModel::Shuffle => cfg.null_shuffle,
            };
            if !enabled {
                continue;
            }
            let dir = out.join("nulls").join(model.name());
            fs::create_dir_all(&dir).map_err(|e| StageError::new(Stage::Null, e))?;
            write_file(
                Stage::Null,
                &dir.join("manifest.json"),
                &serde_json::to_string_pretty(&null_manifest(cfg, model)).expect("json"),
            )?;
            let metrics = replica_metrics(&data.logs, &data.events, cfg, model);
            replicas_run += metrics.len();
            let summary = summarize_nulls(&observed, &metrics)
                .map_err(|e| StageError::new(Stage::Stats, e))?;
            summaries.push((model, summary));
        }
    }
    let named: Vec<(&str, &NullSummary)> = summaries
        .iter()
        .map(|(model, s)| (model.name(), s))
        .collect();
    write_file(
        Stage::Stats,
        &out.join("stats.csv"),
        &summaries_to_csv(&named, &observed),
    )?;
    let stats_json = json!({
        "observed": observed,
        "replicas": cfg.replicas,
        "models": named
            .iter()
            .map(|(name, s)| ((*name).to_string(), serde_json::to_value(s).expect("json")))
            .collect::<serde_json::Map<String, serde_json::Value>>(),
    });
    write_file(
        Stage::Stats,
        &out.join("stats.json"),
        &serde_json::to_string_pretty(&stats_json).expect("json"),
    )?;

    // Analyze: centrality rankings and the anomaly ranking.
    let mode = if cfg.closeness_weighted {
        DistanceMode::InverseWeight
    } else {
        DistanceMode::Unit
    };
    let closeness_out = if graph.node_count() > 0 {
        let ranking =
            closeness_with(&graph, mode).map_err(|e| StageError::new(Stage::Analyze, e))?;
        centrality_csv(&ranking, &graph, cfg.top_k)
    } else {
        String::from("rank,insider_id,score,component_id\n")
    };
    write_file(Stage::Analyze, &out.join("centrality_closeness.csv"), &closeness_out)?;
    let eigen_out = if graph.node_count() > 0 {
        let ranking = eigenvector(&graph).map_err(|e| StageError::new(Stage::Analyze, e))?;
        centrality_csv(&ranking, &graph, cfg.top_k)
    } else {
        String::from("rank,insider_id,score,component_id\n")
    };
    write_file(Stage::Analyze, &out.join("centrality_eigenvector.csv"), &eigen_out)?;

    let oddball_out = if graph.node_count() >= 3 {
        let k = if cfg.lof_k > 0 {
            cfg.lof_k
        } else {
            default_lof_k(graph.node_count())
        };
        let scores = rank_anomalies(&graph, cfg.oddball_law, k)
            .map_err(|e| StageError::new(Stage::Analyze, e))?;
        oddball_csv(&scores, cfg.top_k)
    } else {
        String::from("rank,insider_id,outline,lof,combined,n_nodes,n_edges,total_weight,lambda_w\n")
    };
    write_file(Stage::Analyze, &out.join("oddball.csv"), &oddball_out)?;
    write_file(
        Stage::Analyze,
        &out.join("oddball_conditions.json"),
        &serde_json::to_string_pretty(&verify_conditions(&graph)).expect("json"),
    )?;

    // Calibrate: population from the data unless overridden.
    let firms = data.summary["firms"].as_u64().unwrap_or(0) as f64;
    let insiders = data.summary["insiders"].as_u64().unwrap_or(0) as f64;
    let calib_cfg = CalibrationConfig {
        allowed_days: cfg.allowed_days,
        min_trades_x: cfg.min_trades as u32,
        min_trades_y: cfg.min_trades as u32,
        n_firms: if cfg.calib_firms > 0.0 { cfg.calib_firms } else { firms.max(1.0) },
        n_insiders: if cfg.calib_insiders > 0.0 {
            cfg.calib_insiders
        } else {
            insiders.max(1.0)
        },
        alpha: cfg.alpha,
        kernel_width_days: cfg.kernel_width_days,
    };
    let calibration = calibrate_threshold(&calib_cfg)
        .map(|r| serde_json::to_value(&r).expect("json"))
        .unwrap_or_else(|e| json!({ "error": e.to_string() }));
    write_file(
        Stage::Calibrate,
        &out.join("calibration.json"),
        &serde_json::to_string_pretty(&json!({
            "inputs": {
                "allowed_days": calib_cfg.allowed_days,
                "min_trades": cfg.min_trades,
                "n_firms": calib_cfg.n_firms,
                "n_insiders": calib_cfg.n_insiders,
                "alpha": calib_cfg.alpha,
                "kernel_width_days": calib_cfg.kernel_width_days,
            },
            "result": calibration,
        }))
        .expect("json"),
    )?;

    fs::remove_file(&marker).map_err(|e| StageError::new(Stage::Calibrate, e))?;
    Ok(PipelineReport {
        canonical_events: data.events.len(),
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        components: graph.components().len(),
        replicas_run,
    })
}

fn null_manifest(cfg: &PipelineConfig, model: NullModel) -> serde_json::Value {
    let mut manifest = json!({
        "model": model.name(),
        "seed": cfg.seed,
        "replicas": cfg.replicas,
        "horizon": { "start": cfg.horizon.start.to_string(), "end": cfg.horizon.end.to_string() },
    });
    match model {
        NullModel::Calibrated => {
            manifest["p_buy"] = json!(cfg.p_buy);
            manifest["quarter_length_days"] = json!(cfg.quarter_length_days);
            manifest["open_days_per_quarter"] = json!(cfg.open_days_per_quarter);
        }
        NullModel::Shuffle => {
            manifest["bin"] = json!(cfg.shuffle_bin.name());
        }
    }
    manifest
}

/// Write one null model's replica datasets as canonical CSVs plus manifest.
pub fn write_null_replicas(
    cfg: &PipelineConfig,
    model: NullModel,
    logs: &[InsiderFirmLog],
    events: &[TradeEvent],
) -> Result<PathBuf, StageError> {
    let dir = cfg.output.join("nulls").join(model.name());
    fs::create_dir_all(&dir).map_err(|e| StageError::new(Stage::Null, e))?;
    write_file(
        Stage::Null,
        &dir.join("manifest.json"),
        &serde_json::to_string_pretty(&null_manifest(cfg, model)).expect("json"),
    )?;
    let calendar = match model {
        NullModel::Calibrated => open_day_calendar(&cfg.calibrated_null()),
        NullModel::Shuffle => Vec::new(),
    };
    let results: Vec<(u64, String)> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let replica_events = match model {
                NullModel::Calibrated => {
                    generate_calibrated_with_calendar(
                        logs,
                        &cfg.calibrated_null(),
                        replica,
                        &calendar,
                    )
                    .events
                }
                NullModel::Shuffle => generate_shuffled(events, &cfg.shuffle_null(), replica),
            };
            let replica_logs = aggregate_daily(&replica_events);
            let mut bytes = Vec::new();
            write_canonical_csv(&replica_logs, &mut bytes).expect("in-memory write");
            (replica, String::from_utf8(bytes).expect("csv is utf-8"))
        })
        .collect();
    for (replica, csv) in results {
        write_file(Stage::Null, &dir.join(format!("replica_{replica:04}.csv")), &csv)?;
    }
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::bundled_fixture;

    #[test]
    fn config_round_trips_through_flat_text() {
        let mut cfg = PipelineConfig::default();
        cfg.input = PathBuf::from("trades.csv");
        cfg.seed = 99;
        cfg.replicas = 42;
        cfg.method = SimilarityMethod::Assignment;
        cfg.shuffle_bin = ShuffleBin::Month;
        cfg.score_threshold = 0.75;
        let text = cfg.to_flat_text();
        let parsed = PipelineConfig::from_flat_text(&text).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.to_flat_text(), text);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = PipelineConfig::from_flat_text("bogus = 1\n").unwrap_err();
        assert!(err.contains("unknown config key"));
        let err = PipelineConfig::from_flat_text("seed 42\n").unwrap_err();
        assert!(err.contains("key = value"));
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = PipelineConfig::from_flat_text("# comment\n\nseed = 7\n").unwrap();
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn pipeline_runs_end_to_end_on_the_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let trades = dir.path().join("trades.csv");
        let logs = crate::ingest::aggregate_daily(&bundled_fixture().events);
        let mut bytes = Vec::new();
        write_canonical_csv(&logs, &mut bytes).unwrap();
        fs::write(&trades, bytes).unwrap();

        let mut cfg = PipelineConfig::default();
        cfg.input = trades;
        cfg.output = dir.path().join("out");
        cfg.seed = 1;
        cfg.replicas = 5;
        let report = run_pipeline(&cfg).unwrap();
        assert_eq!(report.nodes, 40);
        assert_eq!(report.edges, 140);
        assert_eq!(report.replicas_run, 10); // two models
        for artifact in [
            "config.resolved.txt",
            "canonical.csv",
            "rejects.csv",
            "ingest_summary.json",
            "edges.csv",
            "graph.graphml",
            "graph.json",
            "build_summary.json",
            "stats.csv",
            "stats.json",
            "centrality_closeness.csv",
            "centrality_eigenvector.csv",
            "oddball.csv",
            "oddball_conditions.json",
            "calibration.json",
            "nulls/calibrated/manifest.json",
            "nulls/shuffle/manifest.json",
        ] {
            assert!(cfg.output.join(artifact).exists(), "missing {artifact}");
        }
        assert!(!cfg.output.join("_INCOMPLETE").exists());
    }

    #[test]
    fn zero_replicas_skips_null_stages() {
        let dir = tempfile::tempdir().unwrap();
        let trades = dir.path().join("trades.csv");
        let logs = crate::ingest::aggregate_daily(&bundled_fixture().events);
        let mut bytes = Vec::new();
        write_canonical_csv(&logs, &mut bytes).unwrap();
        fs::write(&trades, bytes).unwrap();

        let mut cfg = PipelineConfig::default();
        cfg.input = trades;
        cfg.output = dir.path().join("out");
        cfg.replicas = 0;
        let report = run_pipeline(&cfg).unwrap();
        assert_eq!(report.replicas_run, 0);
        let stats = fs::read_to_string(cfg.output.join("stats.csv")).unwrap();
        assert!(stats.lines().nth(1).unwrap().contains(",none,"));
        assert!(!cfg.output.join("nulls").exists());
    }

    #[test]
    fn missing_input_fails_in_the_ingest_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.input = dir.path().join("nope.csv");
        cfg.output = dir.path().join("out");
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.stage, Stage::Ingest);
        assert_eq!(err.stage.exit_code(), 10);
        assert!(cfg.output.join("_INCOMPLETE").exists());
    }
}
