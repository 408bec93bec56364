//! Sensitivity of the null-comparison machinery: planting more coordinated
//! cliques into the same calibrated background must push the edge Z-score up
//! monotonically.

use cotrade_core::graph::{build_graph, EdgeFilterConfig};
use cotrade_core::ingest::aggregate_daily;
use cotrade_core::nulls::{
    generate_calibrated_with_calendar, open_day_calendar, CalibratedNullConfig,
};
use cotrade_core::stats::{compute_metrics, summarize_nulls};
use cotrade_core::synth::{planted_fixture, BUNDLED_FIXTURE_SEED};
use rayon::prelude::*;

#[test]
fn edge_z_score_grows_with_planted_cliques() {
    let filter = EdgeFilterConfig::default();
    let mut last_z = f64::NEG_INFINITY;
    for k in [1usize, 3, 5] {
        let fixture = planted_fixture(BUNDLED_FIXTURE_SEED, k);
        let logs = aggregate_daily(&fixture.events);
        let graph = build_graph(&logs, &filter);
        let observed = compute_metrics(&graph);

        let null_cfg = CalibratedNullConfig {
            seed: 2025,
            ..CalibratedNullConfig::default()
        };
        let calendar = open_day_calendar(&null_cfg);
        let replicas: Vec<_> = (0..100u64)
            .into_par_iter()
            .map(|replica| {
                let draw = generate_calibrated_with_calendar(&logs, &null_cfg, replica, &calendar);
                let replica_logs = aggregate_daily(&draw.events);
                compute_metrics(&build_graph(&replica_logs, &filter))
            })
            .collect();
        let summary = summarize_nulls(&observed, &replicas).unwrap();
        let edges = summary
            .metrics
            .iter()
            .find(|m| m.metric == "edges")
            .unwrap();
        let z = edges.z.expect("edge Z-score defined");
        assert!(
            z > last_z,
            "Z must grow with planted cliques: k={k} gave {z} after {last_z}"
        );
        last_z = z;
    }
    assert!(last_z > 10.0);
}
