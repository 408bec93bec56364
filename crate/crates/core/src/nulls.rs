//! Synthetic trade datasets under the two null hypotheses.
//!
//! The calibrated generative model redraws each insider-firm pair's trades
//! uniformly over legally open days inside the pair's real tenure, keeping
//! counts intact. The constrained shuffle keeps every timestamp and direction
//! in place and permutes insider identities within firm-time strata.
//!
//! Replicas are pure functions of `(seed, replica_index)`: every pair and
//! every stratum derives its own RNG stream, so results are identical no
//! matter how work is scheduled.

use crate::seeding::{derive_rng, fnv1a64};
use crate::types::{
    month_key, quarter_key, Direction, EntityKind, FirmId, Horizon, InsiderFirmLog, InsiderId,
    TradeEvent,
};
use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const STREAM_CALIBRATED: u64 = 0x43414c; // "CAL"
const STREAM_SHUFFLE: u64 = 0x534846; // "SHF"

/// Parameters of the calibrated generative null.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedNullConfig {
    pub horizon: Horizon,
    /// Quarters tile the horizon in blocks of this many calendar days.
    pub quarter_length_days: u32,
    /// Open trading window: the first this-many business days per quarter.
    pub open_days_per_quarter: u32,
    /// Probability that a synthetic trade is an acquisition.
    pub p_buy: f64,
    pub seed: u64,
    pub replicas: usize,
}

impl Default for CalibratedNullConfig {
    fn default() -> Self {
        CalibratedNullConfig {
            horizon: Horizon::default(),
            quarter_length_days: 91,
            open_days_per_quarter: 30,
            p_buy: 0.528,
            seed: 0,
            replicas: 1000,
        }
    }
}

/// Stratum granularity for the constrained shuffle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShuffleBin {
    Quarter,
    Month,
}

impl ShuffleBin {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quarter" | "quarterly" => Some(ShuffleBin::Quarter),
            "month" | "monthly" => Some(ShuffleBin::Month),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ShuffleBin::Quarter => "quarter",
            ShuffleBin::Month => "month",
        }
    }

    fn key(self, date: NaiveDate) -> (i32, u32) {
        match self {
            ShuffleBin::Quarter => quarter_key(date),
            ShuffleBin::Month => month_key(date),
        }
    }
}

/// Parameters of the constrained temporal shuffle.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuffleConfig {
    pub bin: ShuffleBin,
    pub seed: u64,
    pub replicas: usize,
}

impl Default for ShuffleConfig {
    fn default() -> Self {
        ShuffleConfig {
            bin: ShuffleBin::Quarter,
            seed: 0,
            replicas: 1000,
        }
    }
}

/// Global open-day calendar: quarters tile the horizon from its start in
/// fixed-length calendar blocks and the first `open_days_per_quarter`
/// weekdays of each block are open. All firms share the same phase.
pub fn open_day_calendar(cfg: &CalibratedNullConfig) -> Vec<NaiveDate> {
    let mut open = Vec::new();
    let mut quarter_start = cfg.horizon.start;
    while quarter_start <= cfg.horizon.end {
        let quarter_end = quarter_start + Days::new(u64::from(cfg.quarter_length_days) - 1);
        let mut day = quarter_start;
        let mut taken = 0;
        while day <= quarter_end && day <= cfg.horizon.end && taken < cfg.open_days_per_quarter {
            let wd = day.weekday();
            if wd != Weekday::Sat && wd != Weekday::Sun {
                open.push(day);
                taken += 1;
            }
            day = day + Days::new(1);
        }
        quarter_start = quarter_start + Days::new(u64::from(cfg.quarter_length_days));
    }
    open
}

/// A pair whose tenure met no open day; its trades were snapped to the open
/// day nearest the tenure midpoint so counts stay preserved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FallbackRecord {
    pub insider_id: InsiderId,
    pub firm_id: FirmId,
    pub snapped_to: NaiveDate,
}

/// One calibrated replica: synthetic events plus any fallback placements.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedReplica {
    pub events: Vec<TradeEvent>,
    pub fallbacks: Vec<FallbackRecord>,
}

/// Draw one calibrated replica. Every insider-firm pair keeps its empirical
/// trade count; dates are uniform (with replacement) over open days inside
/// the pair's tenure; directions are i.i.d. Bernoulli(p_buy).
pub fn generate_calibrated(
    logs: &[InsiderFirmLog],
    cfg: &CalibratedNullConfig,
    replica_index: u64,
) -> CalibratedReplica {
    let calendar = open_day_calendar(cfg);
    generate_calibrated_with_calendar(logs, cfg, replica_index, &calendar)
}

/// As [`generate_calibrated`] with a precomputed calendar, for replica loops.
pub fn generate_calibrated_with_calendar(
    logs: &[InsiderFirmLog],
    cfg: &CalibratedNullConfig,
    replica_index: u64,
    calendar: &[NaiveDate],
) -> CalibratedReplica {
    assert!(!calendar.is_empty(), "open-day calendar is empty");
    let mut events = Vec::new();
    let mut fallbacks = Vec::new();
    for log in logs {
        let lo = calendar.partition_point(|&d| d < log.first_date);
        let hi = calendar.partition_point(|&d| d <= log.last_date);
        let eligible = &calendar[lo..hi];
        let mut rng = derive_rng(
            cfg.seed,
            &[
                STREAM_CALIBRATED,
                replica_index,
                fnv1a64(log.insider_id.as_bytes()),
                fnv1a64(log.firm_id.as_bytes()),
            ],
        );
        let snapped = if eligible.is_empty() {
            let midpoint = log.first_date
                + Days::new(((log.last_date - log.first_date).num_days() / 2) as u64);
            let idx = calendar.partition_point(|&d| d < midpoint);
            let candidates = [idx.checked_sub(1), (idx < calendar.len()).then_some(idx)];
            let nearest = candidates
                .into_iter()
                .flatten()
                .min_by_key(|&i| {
                    ((calendar[i] - midpoint).num_days().abs(), calendar[i])
                })
                .unwrap();
            let day = calendar[nearest];
            fallbacks.push(FallbackRecord {
                insider_id: log.insider_id.clone(),
                firm_id: log.firm_id.clone(),
                snapped_to: day,
            });
            Some(day)
        } else {
            None
        };
        for _ in 0..log.n_trades() {
            let date = match snapped {
                Some(day) => day,
                None => eligible[rng.random_range(0..eligible.len())],
            };
            let direction = if rng.random_bool(cfg.p_buy) {
                Direction::Acquire
            } else {
                Direction::Dispose
            };
            events.push(TradeEvent {
                insider_id: log.insider_id.clone(),
                firm_id: log.firm_id.clone(),
                date,
                direction,
                insider_name: None,
                entity_kind: EntityKind::Person,
                quantity: None,
            });
        }
    }
    events.sort_by(|x, y| {
        (&x.firm_id, &x.insider_id, x.date, x.direction)
            .cmp(&(&y.firm_id, &y.insider_id, y.date, y.direction))
    });
    CalibratedReplica { events, fallbacks }
}

/// One shuffled replica: within each (firm, bin) stratum the vector of
/// insider identities is permuted uniformly while timestamps and directions
/// stay fixed.
pub fn generate_shuffled(
    events: &[TradeEvent],
    cfg: &ShuffleConfig,
    replica_index: u64,
) -> Vec<TradeEvent> {
    let mut strata: BTreeMap<(&FirmId, (i32, u32)), Vec<&TradeEvent>> = BTreeMap::new();
    for event in events {
        strata
            .entry((&event.firm_id, cfg.bin.key(event.date)))
            .or_default()
            .push(event);
    }
    let mut out = Vec::with_capacity(events.len());
    for ((firm, bin), mut stratum) in strata {
        stratum.sort_by(|x, y| {
            (x.date, x.direction, &x.insider_id).cmp(&(y.date, y.direction, &y.insider_id))
        });
        let mut identities: Vec<(&InsiderId, &Option<String>, EntityKind)> = stratum
            .iter()
            .map(|e| (&e.insider_id, &e.insider_name, e.entity_kind))
            .collect();
        let mut rng = derive_rng(
            cfg.seed,
            &[
                STREAM_SHUFFLE,
                replica_index,
                fnv1a64(firm.as_bytes()),
                (bin.0 as u64) << 8 | u64::from(bin.1),
            ],
        );
        identities.shuffle(&mut rng);
        for (slot, (insider, name, kind)) in stratum.iter().zip(identities) {
            out.push(TradeEvent {
                insider_id: insider.clone(),
                firm_id: slot.firm_id.clone(),
                date: slot.date,
                direction: slot.direction,
                insider_name: name.clone(),
                entity_kind: kind,
                quantity: slot.quantity,
            });
        }
    }
    out.sort_by(|x, y| {
        (&x.firm_id, x.date, x.direction, &x.insider_id)
            .cmp(&(&y.firm_id, y.date, y.direction, &y.insider_id))
    });
    out
}
