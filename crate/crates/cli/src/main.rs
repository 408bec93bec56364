//! Command-line pipeline for co-trading network screening.
//!
//! Data goes to files or standard output; progress and logs go to standard
//! error. Exit codes identify the failing stage: 10 ingest, 20 build,
//! 30 null, 40 stats, 50 analyze, 60 calibrate.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cotrade_core::calibration::{
    calibrate_threshold, empirical_false_positive_rate, pair_tail_bound, CalibrationConfig,
};
use cotrade_core::centrality::{closeness_with, eigenvector, CentralityMeasure, DistanceMode};
use cotrade_core::graph::{build_graph, SimilarityMethod};
use cotrade_core::nulls::ShuffleBin;
use cotrade_core::oddball::{default_lof_k, rank_anomalies, verify_conditions, PowerLawKind};
use cotrade_core::pipeline::{
    centrality_csv, ingest_input, oddball_csv, replica_metrics, run_pipeline, write_null_replicas,
    NullModel, PipelineConfig, Stage,
};
use cotrade_core::similarity::KernelConfig;
use cotrade_core::stats::{compute_metrics, summaries_to_csv, summarize_nulls, NullSummary};
use cotrade_core::{assignment_similarity, combined_similarity};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cotrade",
    about = "Co-trading similarity networks from insider trade disclosures",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command that loads a trade dataset.
#[derive(Args, Clone)]
struct InputOpts {
    /// Trade CSV (insider_id,firm_id,date,direction[,...]) or a directory of
    /// Form 4 XML filings.
    #[arg(long, value_name = "PATH")]
    trades: PathBuf,
    /// Study horizon start (inclusive).
    #[arg(long, default_value = "2014-01-01")]
    horizon_start: String,
    /// Study horizon end (inclusive).
    #[arg(long, default_value = "2024-12-31")]
    horizon_end: String,
}

/// Edge-filter options shared by graph-building commands.
#[derive(Args, Clone)]
struct FilterOpts {
    /// Kernel window in days.
    #[arg(long, default_value_t = 7)]
    width: u32,
    /// Minimum trades per insider at the shared firm.
    #[arg(long, default_value_t = 8)]
    min_trades: usize,
    /// Minimum matched ISO weeks.
    #[arg(long, default_value_t = 4)]
    min_overlap_weeks: usize,
    /// Strict edge threshold on the similarity score.
    #[arg(long, default_value_t = 0.8)]
    score_threshold: f64,
    /// Similarity backend: best-match or assignment.
    #[arg(long, default_value = "best-match")]
    method: String,
    /// Drop the tenure-overlap requirement.
    #[arg(long)]
    no_tenure_overlap: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse filings or a trade CSV into the canonical aggregated dataset.
    Ingest {
        #[command(flatten)]
        input: InputOpts,
        /// Output directory for canonical.csv, rejects.csv and the summary.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Keep superseded filings instead of applying amendments.
        #[arg(long)]
        keep_all_filings: bool,
    },
    /// Score one within-firm pair and print the result as JSON.
    PairScore {
        #[command(flatten)]
        input: InputOpts,
        /// Shared firm id.
        #[arg(long)]
        firm: String,
        /// First insider id.
        #[arg(long)]
        a: String,
        /// Second insider id.
        #[arg(long)]
        b: String,
        /// Kernel window in days.
        #[arg(long, default_value_t = 7)]
        width: u32,
    },
    /// Build the co-trading graph and export it.
    Build {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        filters: FilterOpts,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Generate null-model replica datasets.
    Null {
        #[command(subcommand)]
        model: NullCommand,
    },
    /// Compute observed metrics and null-ensemble summaries.
    Stats {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        filters: FilterOpts,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated models: calibrated,shuffle.
        #[arg(long, default_value = "calibrated,shuffle")]
        models: String,
        /// Shuffle stratum: quarter or month.
        #[arg(long, default_value = "quarter")]
        bin: String,
        /// Calibrated-null purchase probability.
        #[arg(long, default_value_t = 0.528)]
        p_buy: f64,
    },
    /// Rank insiders by centrality or egonet anomaly.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCommand,
    },
    /// Evaluate the chance-overlap threshold calibration.
    Calibrate {
        #[arg(long, default_value_t = 9426.0)]
        firms: f64,
        #[arg(long, default_value_t = 70941.0)]
        insiders: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 8)]
        min_trades: u32,
        #[arg(long, default_value_t = 1200)]
        allowed_days: u32,
        /// Also Monte-Carlo simulate the false-positive rate at --tau.
        #[arg(long, value_name = "TRIALS")]
        simulate: Option<u64>,
        /// Threshold for the simulation and tail bound.
        #[arg(long, default_value_t = 0.8)]
        tau: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the full pipeline: ingest, build, nulls, stats, analyze, calibrate.
    Run {
        /// Flat key-value config file; command-line flags override it.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicas: Option<usize>,
        /// Worker threads for parallel stages (0 = default pool).
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Subcommand)]
enum NullCommand {
    /// Calibrated generative model: uniform redraws over open trading days.
    Calibrated {
        #[command(flatten)]
        input: InputOpts,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.528)]
        p_buy: f64,
        #[arg(long, default_value_t = 91)]
        quarter_length_days: u32,
        #[arg(long, default_value_t = 30)]
        open_days_per_quarter: u32,
    },
    /// Constrained shuffle: permute insider identities within firm-time bins.
    Shuffle {
        #[command(flatten)]
        input: InputOpts,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stratum granularity: quarter or month.
        #[arg(long, default_value = "quarter")]
        bin: String,
    },
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Closeness or eigenvector centrality ranking.
    Centrality {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        filters: FilterOpts,
        /// closeness or eigenvector.
        #[arg(long)]
        measure: String,
        /// Keep only the top K rows (0 = all).
        #[arg(long, default_value_t = 0)]
        top: usize,
        /// Use 1/weight edge lengths for closeness distances.
        #[arg(long)]
        weighted: bool,
        /// Output CSV path (default: standard output).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Egonet anomaly ranking (out-line score and local outlier factor).
    Oddball {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        filters: FilterOpts,
        /// Power law feeding the out-line score: edpl, ewpl or elwpl.
        #[arg(long, default_value = "edpl")]
        law: String,
        /// LOF neighbourhood size (0 = min(20, egos-1)).
        #[arg(long, default_value_t = 0)]
        lof_k: usize,
        #[arg(long, default_value_t = 0)]
        top: usize,
        /// Also print the four power-law condition checks to stderr.
        #[arg(long)]
        conditions: bool,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

fn horizon_from(opts: &InputOpts) -> Result<cotrade_core::Horizon> {
    let start = chrono::NaiveDate::parse_from_str(&opts.horizon_start, "%Y-%m-%d")
        .context("invalid --horizon-start")?;
    let end = chrono::NaiveDate::parse_from_str(&opts.horizon_end, "%Y-%m-%d")
        .context("invalid --horizon-end")?;
    if start > end {
        bail!("horizon start is after horizon end");
    }
    Ok(cotrade_core::Horizon::new(start, end))
}

fn filter_config(opts: &FilterOpts) -> Result<cotrade_core::EdgeFilterConfig> {
    let Some(method) = SimilarityMethod::parse(&opts.method) else {
        bail!("unknown method {:?}; use best-match or assignment", opts.method);
    };
    Ok(cotrade_core::EdgeFilterConfig {
        min_trades: opts.min_trades,
        min_overlap_weeks: opts.min_overlap_weeks,
        score_threshold: opts.score_threshold,
        require_tenure_overlap: !opts.no_tenure_overlap,
        method,
        kernel: KernelConfig::new(opts.width),
    })
}

fn load_logs(
    input: &InputOpts,
) -> Result<(Vec<cotrade_core::InsiderFirmLog>, Vec<cotrade_core::TradeEvent>), (Stage, anyhow::Error)>
{
    let horizon = horizon_from(input).map_err(|e| (Stage::Ingest, e))?;
    let cfg = cotrade_core::ingest::IngestConfig {
        horizon,
        ..Default::default()
    };
    let data = ingest_input(&input.trades, &cfg)
        .map_err(|e| (Stage::Ingest, anyhow::anyhow!(e)))?;
    eprintln!(
        "ingest: {} canonical events, {} logs",
        data.events.len(),
        data.logs.len()
    );
    Ok((data.logs, data.events))
}

fn stage_exit(stage: Stage, err: anyhow::Error) -> ExitCode {
    eprintln!("error ({} stage): {err:#}", stage.name());
    ExitCode::from(stage.exit_code() as u8)
}

fn write_or_print(out: Option<&PathBuf>, data: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, data).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{data}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((stage, err)) => stage_exit(stage, err),
    }
}

fn run(cli: Cli) -> Result<(), (Stage, anyhow::Error)> {
    match cli.command {
        Command::Ingest {
            input,
            out,
            keep_all_filings,
        } => {
            let horizon = horizon_from(&input).map_err(|e| (Stage::Ingest, e))?;
            let cfg = cotrade_core::ingest::IngestConfig {
                horizon,
                keep_latest_amendment: !keep_all_filings,
                ..Default::default()
            };
            let data = ingest_input(&input.trades, &cfg)
                .map_err(|e| (Stage::Ingest, anyhow::anyhow!(e)))?;
            fs::create_dir_all(&out).map_err(|e| (Stage::Ingest, e.into()))?;
            let mut canonical = Vec::new();
            cotrade_core::ingest::write_canonical_csv(&data.logs, &mut canonical)
                .map_err(|e| (Stage::Ingest, e.into()))?;
            fs::write(out.join("canonical.csv"), canonical)
                .map_err(|e| (Stage::Ingest, e.into()))?;
            fs::write(out.join("rejects.csv"), data.rejects_csv)
                .map_err(|e| (Stage::Ingest, e.into()))?;
            fs::write(
                out.join("ingest_summary.json"),
                serde_json_pretty(&data.summary),
            )
            .map_err(|e| (Stage::Ingest, e.into()))?;
            eprintln!("ingest summary: {}", data.summary);
            Ok(())
        }
        Command::PairScore { input, firm, a, b, width } => {
            let (logs, _) = load_logs(&input)?;
            let kernel = KernelConfig::new(width);
            let find = |id: &str| {
                logs.iter()
                    .find(|l| l.insider_id == id && l.firm_id == firm)
                    .ok_or_else(|| anyhow::anyhow!("no log for insider {id:?} at firm {firm:?}"))
            };
            let (x, y) = (
                find(&a).map_err(|e| (Stage::Analyze, e))?,
                find(&b).map_err(|e| (Stage::Analyze, e))?,
            );
            let best = combined_similarity(x, y, &kernel)
                .map_err(|e| (Stage::Analyze, anyhow::anyhow!(e)))?;
            let assign = assignment_similarity(x, y, &kernel)
                .map_err(|e| (Stage::Analyze, anyhow::anyhow!(e)))?;
            let json = serde_json::json!({
                "firm": firm,
                "a": a,
                "b": b,
                "width_days": width,
                "best_match": {
                    "s_acquire": best.s_acquire,
                    "s_dispose": best.s_dispose,
                    "combined": best.combined,
                    "matched_weeks": best.matched_weeks,
                    "counts": {
                        "acquire_a": best.n_acquire_x,
                        "acquire_b": best.n_acquire_y,
                        "dispose_a": best.n_dispose_x,
                        "dispose_b": best.n_dispose_y,
                    },
                },
                "assignment": {
                    "acquire_score": assign.acquire.score,
                    "dispose_score": assign.dispose.score,
                    "combined": assign.combined,
                    "overlap_weeks": {
                        "acquire": assign.acquire.overlap_weeks,
                        "dispose": assign.dispose.overlap_weeks,
                    },
                    "exceeds_unit": assign.exceeds_unit,
                },
            });
            println!("{}", serde_json_pretty(&json));
            Ok(())
        }
        Command::Build { input, filters, out } => {
            let (logs, _) = load_logs(&input)?;
            let cfg = filter_config(&filters).map_err(|e| (Stage::Build, e))?;
            let graph = build_graph(&logs, &cfg);
            fs::create_dir_all(&out).map_err(|e| (Stage::Build, e.into()))?;
            fs::write(out.join("edges.csv"), graph.to_edge_csv())
                .map_err(|e| (Stage::Build, e.into()))?;
            fs::write(out.join("graph.graphml"), graph.to_graphml())
                .map_err(|e| (Stage::Build, e.into()))?;
            fs::write(out.join("graph.json"), serde_json_pretty(&graph.to_json()))
                .map_err(|e| (Stage::Build, e.into()))?;
            eprintln!(
                "build: {} nodes, {} edges, {} components; stages {:?}",
                graph.node_count(),
                graph.edge_count(),
                graph.components().len(),
                graph.summary()
            );
            Ok(())
        }
        Command::Null { model } => {
            let (input, out, base) = match &model {
                NullCommand::Calibrated {
                    input,
                    out,
                    replicas,
                    seed,
                    p_buy,
                    quarter_length_days,
                    open_days_per_quarter,
                } => {
                    let mut cfg = PipelineConfig::default();
                    cfg.replicas = *replicas;
                    cfg.seed = *seed;
                    cfg.p_buy = *p_buy;
                    cfg.quarter_length_days = *quarter_length_days;
                    cfg.open_days_per_quarter = *open_days_per_quarter;
                    (input.clone(), out.clone(), cfg)
                }
                NullCommand::Shuffle {
                    input,
                    out,
                    replicas,
                    seed,
                    bin,
                } => {
                    let mut cfg = PipelineConfig::default();
                    cfg.replicas = *replicas;
                    cfg.seed = *seed;
                    cfg.shuffle_bin = ShuffleBin::parse(bin)
                        .ok_or_else(|| (Stage::Null, anyhow::anyhow!("unknown bin {bin:?}")))?;
                    (input.clone(), out.clone(), cfg)
                }
            };
            let (logs, events) = load_logs(&input)?;
            let mut cfg = base;
            cfg.output = out;
            cfg.horizon = horizon_from(&input).map_err(|e| (Stage::Null, e))?;
            let which = match model {
                NullCommand::Calibrated { .. } => NullModel::Calibrated,
                NullCommand::Shuffle { .. } => NullModel::Shuffle,
            };
            let dir = write_null_replicas(&cfg, which, &logs, &events)
                .map_err(|e| (e.stage, anyhow::anyhow!(e.message)))?;
            eprintln!("null: wrote {} replicas under {}", cfg.replicas, dir.display());
            Ok(())
        }
        Command::Stats {
            input,
            filters,
            out,
            replicas,
            seed,
            models,
            bin,
            p_buy,
        } => {
            let (logs, events) = load_logs(&input)?;
            let filter = filter_config(&filters).map_err(|e| (Stage::Stats, e))?;
            let mut cfg = PipelineConfig::default();
            cfg.horizon = horizon_from(&input).map_err(|e| (Stage::Stats, e))?;
            cfg.seed = seed;
            cfg.replicas = replicas;
            cfg.p_buy = p_buy;
            cfg.kernel_width_days = filters.width;
            cfg.min_trades = filters.min_trades;
            cfg.min_overlap_weeks = filters.min_overlap_weeks;
            cfg.score_threshold = filters.score_threshold;
            cfg.require_tenure_overlap = !filters.no_tenure_overlap;
            cfg.method = filter.method;
            cfg.shuffle_bin = ShuffleBin::parse(&bin)
                .ok_or_else(|| (Stage::Stats, anyhow::anyhow!("unknown bin {bin:?}")))?;
            let graph = build_graph(&logs, &filter);
            let observed = compute_metrics(&graph);
            let mut summaries: Vec<(String, NullSummary)> = Vec::new();
            for model in models.split(',').filter(|m| !m.trim().is_empty()) {
                let which = match model.trim() {
                    "calibrated" => NullModel::Calibrated,
                    "shuffle" => NullModel::Shuffle,
                    other => {
                        return Err((Stage::Stats, anyhow::anyhow!("unknown model {other:?}")))
                    }
                };
                if replicas == 0 {
                    continue;
                }
                let metrics = replica_metrics(&logs, &events, &cfg, which);
                let summary = summarize_nulls(&observed, &metrics)
                    .map_err(|e| (Stage::Stats, anyhow::anyhow!(e)))?;
                summaries.push((which.name().to_string(), summary));
            }
            let named: Vec<(&str, &NullSummary)> =
                summaries.iter().map(|(n, s)| (n.as_str(), s)).collect();
            fs::create_dir_all(&out).map_err(|e| (Stage::Stats, e.into()))?;
            fs::write(out.join("stats.csv"), summaries_to_csv(&named, &observed))
                .map_err(|e| (Stage::Stats, e.into()))?;
            let json = serde_json::json!({
                "observed": observed,
                "replicas": replicas,
                "models": named
                    .iter()
                    .map(|(name, s)| ((*name).to_string(), serde_json::to_value(s).expect("json")))
                    .collect::<serde_json::Map<String, serde_json::Value>>(),
            });
            fs::write(out.join("stats.json"), serde_json_pretty(&json))
                .map_err(|e| (Stage::Stats, e.into()))?;
            eprintln!("stats: wrote {}", out.join("stats.csv").display());
            Ok(())
        }
        Command::Analyze { what } => match what {
            AnalyzeCommand::Centrality {
                input,
                filters,
                measure,
                top,
                weighted,
                out,
            } => {
                let Some(measure) = CentralityMeasure::parse(&measure) else {
                    return Err((Stage::Analyze, anyhow::anyhow!("unknown measure {measure:?}")));
                };
                let (logs, _) = load_logs(&input)?;
                let cfg = filter_config(&filters).map_err(|e| (Stage::Analyze, e))?;
                let graph = build_graph(&logs, &cfg);
                let ranking = match measure {
                    CentralityMeasure::Closeness => {
                        let mode = if weighted {
                            DistanceMode::InverseWeight
                        } else {
                            DistanceMode::Unit
                        };
                        closeness_with(&graph, mode)
                    }
                    CentralityMeasure::Eigenvector => eigenvector(&graph),
                }
                .map_err(|e| (Stage::Analyze, anyhow::anyhow!(e)))?;
                write_or_print(out.as_ref(), &centrality_csv(&ranking, &graph, top))
                    .map_err(|e| (Stage::Analyze, e))?;
                Ok(())
            }
            AnalyzeCommand::Oddball {
                input,
                filters,
                law,
                lof_k,
                top,
                conditions,
                out,
            } => {
                let Some(law) = PowerLawKind::parse(&law) else {
                    return Err((Stage::Analyze, anyhow::anyhow!("unknown law {law:?}")));
                };
                let (logs, _) = load_logs(&input)?;
                let cfg = filter_config(&filters).map_err(|e| (Stage::Analyze, e))?;
                let graph = build_graph(&logs, &cfg);
                let k = if lof_k > 0 {
                    lof_k
                } else {
                    default_lof_k(graph.node_count())
                };
                let scores = rank_anomalies(&graph, law, k)
                    .map_err(|e| (Stage::Analyze, anyhow::anyhow!(e)))?;
                if conditions {
                    for check in verify_conditions(&graph) {
                        eprintln!("{}", serde_json::to_string(&check).expect("json"));
                    }
                }
                write_or_print(out.as_ref(), &oddball_csv(&scores, top))
                    .map_err(|e| (Stage::Analyze, e))?;
                Ok(())
            }
        },
        Command::Calibrate {
            firms,
            insiders,
            alpha,
            min_trades,
            allowed_days,
            simulate,
            tau,
            seed,
        } => {
            let cfg = CalibrationConfig {
                allowed_days,
                min_trades_x: min_trades,
                min_trades_y: min_trades,
                n_firms: firms,
                n_insiders: insiders,
                alpha,
                kernel_width_days: 7,
            };
            let result =
                calibrate_threshold(&cfg).map_err(|e| (Stage::Calibrate, anyhow::anyhow!(e)))?;
            let mut json = serde_json::json!({
                "inputs": {
                    "allowed_days": allowed_days,
                    "min_trades": min_trades,
                    "n_firms": firms,
                    "n_insiders": insiders,
                    "alpha": alpha,
                },
                "result": result,
            });
            if let Some(trials) = simulate {
                let bound = pair_tail_bound(min_trades, min_trades, tau, allowed_days);
                let rate = empirical_false_positive_rate(
                    min_trades,
                    min_trades,
                    tau,
                    allowed_days,
                    trials,
                    seed,
                );
                json["simulation"] = serde_json::json!({
                    "tau": tau,
                    "trials": trials,
                    "false_positive_rate": rate,
                    "chernoff_bound": bound,
                    "seed": seed,
                });
            }
            println!("{}", serde_json_pretty(&json));
            Ok(())
        }
        Command::Run {
            config,
            input,
            out,
            seed,
            replicas,
            threads,
        } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))
                        .map_err(|e| (Stage::Ingest, e))?;
                    PipelineConfig::from_flat_text(&text)
                        .map_err(|e| (Stage::Ingest, anyhow::anyhow!(e)))?
                }
                None => PipelineConfig::default(),
            };
            if let Some(input) = input {
                cfg.input = input;
            }
            if let Some(out) = out {
                cfg.output = out;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(replicas) = replicas {
                cfg.replicas = replicas;
            }
            if let Some(threads) = threads {
                cfg.threads = threads;
            }
            if cfg.input.as_os_str().is_empty() {
                return Err((
                    Stage::Ingest,
                    anyhow::anyhow!("no input: set --input or the config file's input key"),
                ));
            }
            let report = run_pipeline(&cfg).map_err(|e| (e.stage, anyhow::anyhow!(e.message)))?;
            eprintln!(
                "run: {} events -> {} nodes, {} edges, {} components; {} replicas; artifacts in {}",
                report.canonical_events,
                report.nodes,
                report.edges,
                report.components,
                report.replicas_run,
                cfg.output.display()
            );
            Ok(())
        }
    }
}

fn serde_json_pretty<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("json serialization")
}
