//! Co-trading similarity networks from time-stamped insider trade
//! disclosures: ingestion, temporal similarity scoring, network assembly,
//! Monte-Carlo null models, and anomaly ranking.

pub mod assignment;
pub mod calibration;
pub mod centrality;
pub mod graph;
pub mod ingest;
pub mod matching;
pub mod nulls;
pub mod oddball;
pub mod pipeline;
pub mod seeding;
pub mod similarity;
pub mod stats;
pub mod synth;
pub mod types;

pub use assignment::{assignment_similarity, AssignmentScore, CategoryAssignment};
pub use graph::{build_graph, CoTradeGraph, EdgeFilterConfig, SimilarityMethod};
pub use similarity::{
    best_match_similarity, combined_similarity, kernel, matched_weeks, KernelConfig,
    SimilarityError, SimilarityScore,
};
pub use stats::{compute_metrics, summarize_nulls, MetricVector, NullSummary};
pub use types::{Direction, EntityKind, FirmId, Horizon, InsiderFirmLog, InsiderId, TradeEvent};
