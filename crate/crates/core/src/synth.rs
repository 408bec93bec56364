//! Synthetic fixtures: coordinated cliques planted into a calibrated-null
//! background.
//!
//! The background is one draw of the calibrated generative model over a
//! population of profile logs. Most profiles are sparse, but a handful are
//! dense single-window pairs whose redraws land near the edge threshold, so
//! replica graphs vary instead of collapsing to a constant. Clique members
//! follow a shared schedule with member-specific 0/+1 day jitter, which
//! bounds every pairwise gap by one day and keeps all planted scores above
//! the default threshold by construction.

use crate::nulls::{generate_calibrated_with_calendar, open_day_calendar, CalibratedNullConfig};
use crate::seeding::derive_rng;
use crate::types::{date, Direction, InsiderFirmLog, InsiderId, TradeEvent};
use chrono::{Days, NaiveDate};
use rand::Rng;
use std::collections::BTreeSet;

/// Seed of the bundled 200-insider fixture (fixtures/trades_200.csv).
///
/// Chosen so that the observed background draw produces zero edges under the
/// default filters, which pins planted-edge precision at 1.
pub const BUNDLED_FIXTURE_SEED: u64 = 12;

/// Replica stream reserved for the observed background draw; test replicas
/// count from zero, so they never collide with it.
const OBSERVED_DRAW_STREAM: u64 = u64::MAX;

/// A generated dataset with the ground truth of what was planted.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub events: Vec<TradeEvent>,
    /// Unordered planted pairs, endpoints sorted.
    pub planted_pairs: BTreeSet<(InsiderId, InsiderId)>,
    pub clique_members: Vec<Vec<InsiderId>>,
}

/// Day offsets of the 12 clique events (multiples of 7 keep the weekday).
const CLIQUE_STEPS: [u64; 12] = [0, 14, 35, 49, 63, 84, 98, 112, 133, 147, 161, 182];
const CLIQUE_DIRECTIONS: [Direction; 12] = [
    Direction::Acquire,
    Direction::Acquire,
    Direction::Dispose,
    Direction::Acquire,
    Direction::Dispose,
    Direction::Acquire,
    Direction::Acquire,
    Direction::Dispose,
    Direction::Acquire,
    Direction::Dispose,
    Direction::Acquire,
    Direction::Acquire,
];

const CLIQUE_SIZE: usize = 8;
const N_DENSE_FIRMS: usize = 8;
const DENSE_TRADES: usize = 16;
const N_NORMAL: usize = 144;
const N_FIRMS: usize = 30;

fn firm_name(index: usize) -> String {
    format!("F{index:02}")
}

/// Profile logs for the calibrated background: dense single-window pairs
/// plus a sparse crowd.
fn background_profiles(calendar: &[NaiveDate]) -> Vec<InsiderFirmLog> {
    let mut logs = Vec::new();
    // Dense pairs: one per firm, both insiders confined to a short window.
    // Window lengths grade from tight to loose across firms, so the pairs'
    // chance of crossing the threshold under redraws spans a range instead
    // of clustering at 0 or 1.
    for d in 0..N_DENSE_FIRMS {
        let firm = firm_name(5 + d);
        // A window well inside the horizon, staggered per firm.
        let window_start = (8 + 4 * d) * 30;
        let window_len = 17 + 2 * d;
        let days: Vec<NaiveDate> = (0..DENSE_TRADES)
            .map(|k| calendar[window_start + k * (window_len - 1) / (DENSE_TRADES - 1)])
            .collect();
        for suffix in ["a", "b"] {
            let (acquires, disposes): (Vec<_>, Vec<_>) = days
                .iter()
                .enumerate()
                .partition(|(k, _)| k % 2 == 0);
            logs.push(
                InsiderFirmLog::new(
                    format!("D{d:02}_{suffix}"),
                    firm.clone(),
                    acquires.into_iter().map(|(_, &d)| d).collect(),
                    disposes.into_iter().map(|(_, &d)| d).collect(),
                )
                .unwrap(),
            );
        }
    }
    // Sparse crowd spread over every firm.
    for i in 0..N_NORMAL {
        let firm = firm_name(i % N_FIRMS);
        let count = 8 + (i % 13);
        let start = date(2014, 1, 6) + Days::new((i as u64 * 37) % 2500);
        let span_days = 200 + (i as u64 * 91) % 1800;
        let step = span_days / count as u64;
        let dates: Vec<NaiveDate> = (0..count)
            .map(|k| start + Days::new(k as u64 * step))
            .collect();
        let (acquires, disposes): (Vec<_>, Vec<_>) =
            dates.iter().enumerate().partition(|(k, _)| k % 3 != 0);
        logs.push(
            InsiderFirmLog::new(
                format!("N{i:03}"),
                firm,
                acquires.into_iter().map(|(_, &d)| d).collect(),
                disposes.into_iter().map(|(_, &d)| d).collect(),
            )
            .unwrap(),
        );
    }
    logs
}

/// Events of one planted clique. Every member trades the clique schedule
/// with an independent 0/+1 day offset per event, so each pairwise gap is at
/// most one day.
fn clique_events(seed: u64, clique: usize, size: usize) -> (Vec<TradeEvent>, Vec<InsiderId>) {
    let firm = firm_name(clique);
    let start = date(2015, 1, 6) + Days::new(clique as u64 * 140); // Tuesdays
    let mut events = Vec::new();
    let mut members = Vec::new();
    for member in 0..size {
        let id = format!("P{clique}_{member}");
        members.push(id.clone());
        let mut rng = derive_rng(seed, &[0x504c54 /* PLT */, clique as u64, member as u64]);
        for (&step, &direction) in CLIQUE_STEPS.iter().zip(CLIQUE_DIRECTIONS.iter()) {
            let jitter: u64 = rng.random_range(0..=1);
            events.push(TradeEvent::new(
                id.clone(),
                firm.clone(),
                start + Days::new(step + jitter),
                direction,
            ));
        }
    }
    (events, members)
}

/// A 200-insider dataset: `n_cliques` coordinated cliques embedded into one
/// calibrated-null background draw. The background is identical across
/// `n_cliques` values at a fixed seed, so Z-score growth with the planted
/// count is attributable to the cliques alone.
pub fn planted_fixture(seed: u64, n_cliques: usize) -> Fixture {
    assert!(n_cliques <= 5, "the fixture reserves five clique slots");
    let null_cfg = CalibratedNullConfig {
        seed,
        ..CalibratedNullConfig::default()
    };
    let calendar = open_day_calendar(&null_cfg);
    let profiles = background_profiles(&calendar);
    let draw =
        generate_calibrated_with_calendar(&profiles, &null_cfg, OBSERVED_DRAW_STREAM, &calendar);

    let mut events = draw.events;
    let mut planted_pairs = BTreeSet::new();
    let mut clique_members = Vec::new();
    for clique in 0..n_cliques {
        let (clique_evts, members) = clique_events(seed, clique, CLIQUE_SIZE);
        events.extend(clique_evts);
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                let pair = if a <= b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                };
                planted_pairs.insert(pair);
            }
        }
        clique_members.push(members);
    }
    events.sort_by(|x, y| {
        (&x.firm_id, &x.insider_id, x.date, x.direction)
            .cmp(&(&y.firm_id, &y.insider_id, y.date, y.direction))
    });
    Fixture {
        events,
        planted_pairs,
        clique_members,
    }
}

/// The bundled fixture: five cliques at the frozen seed; matches
/// `fixtures/trades_200.csv` after daily aggregation.
pub fn bundled_fixture() -> Fixture {
    planted_fixture(BUNDLED_FIXTURE_SEED, 5)
}

/// A population of insider-firm logs with varied counts and tenures, for
/// exercising null-model preservation invariants. Each tenure starts on an
/// open trading day, so every log meets the open-day calendar.
pub fn log_population(n_pairs: usize, seed: u64) -> Vec<InsiderFirmLog> {
    let calendar = open_day_calendar(&CalibratedNullConfig::default());
    let mut logs = Vec::new();
    for i in 0..n_pairs {
        let mut rng = derive_rng(seed, &[0x504f50 /* POP */, i as u64]);
        let firm = format!("F{:02}", i % 50);
        let count = 1 + rng.random_range(0..40usize);
        let anchor = calendar[rng.random_range(0..calendar.len() - 400)];
        let span = 120 + rng.random_range(0..800u64);
        let mut dates = BTreeSet::from([anchor]);
        while dates.len() < count {
            dates.insert(anchor + Days::new(rng.random_range(0..=span)));
        }
        let (acquires, disposes): (Vec<_>, Vec<_>) = dates
            .iter()
            .enumerate()
            .partition(|(k, _)| k % 2 == 0);
        logs.push(
            InsiderFirmLog::new(
                format!("P{i:04}"),
                firm,
                acquires.into_iter().map(|(_, &d)| d).collect(),
                disposes.into_iter().map(|(_, &d)| d).collect(),
            )
            .unwrap(),
        );
    }
    logs
}
