//! Core domain types: trade events, per-pair trade logs, and calendar helpers.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque insider key (CIK or synthetic id).
pub type InsiderId = String;
/// Opaque firm key (issuer CIK or synthetic id).
pub type FirmId = String;

/// Trade direction from the Form 4 acquired/disposed code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    Acquire,
    Dispose,
}

impl Direction {
    pub fn code(self) -> &'static str {
        match self {
            Direction::Acquire => "A",
            Direction::Dispose => "D",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code.trim() {
            "A" | "a" => Some(Direction::Acquire),
            "D" | "d" => Some(Direction::Dispose),
            _ => None,
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// Whether a reporting owner is a natural person or an institutional entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EntityKind {
    Person,
    Institution,
    #[default]
    Unknown,
}

impl EntityKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "person" => Some(EntityKind::Person),
            "institution" => Some(EntityKind::Institution),
            "unknown" | "" => Some(EntityKind::Unknown),
            _ => None,
        }
    }
}

/// One reported transaction after horizon filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeEvent {
    pub insider_id: InsiderId,
    pub firm_id: FirmId,
    pub date: NaiveDate,
    pub direction: Direction,
    pub insider_name: Option<String>,
    pub entity_kind: EntityKind,
    /// Share quantity when the source provides one. Parsed and carried along
    /// for export; the core pipeline does not use it.
    pub quantity: Option<f64>,
}

impl TradeEvent {
    pub fn new(
        insider_id: impl Into<InsiderId>,
        firm_id: impl Into<FirmId>,
        date: NaiveDate,
        direction: Direction,
    ) -> Self {
        TradeEvent {
            insider_id: insider_id.into(),
            firm_id: firm_id.into(),
            date,
            direction,
            insider_name: None,
            entity_kind: EntityKind::Unknown,
            quantity: None,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.insider_name = Some(name.into());
        self
    }

    pub fn with_entity_kind(mut self, kind: EntityKind) -> Self {
        self.entity_kind = kind;
        self
    }
}

/// Inclusive study horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Horizon {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Horizon {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        assert!(start <= end, "horizon start after end");
        Horizon { start, end }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon {
            start: NaiveDate::from_ymd_opt(2014, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2024, 12, 31).unwrap(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LogError {
    #[error("log for ({insider}, {firm}) has no trades")]
    Empty { insider: InsiderId, firm: FirmId },
    #[error("dates for ({insider}, {firm}) are not strictly increasing")]
    Unsorted { insider: InsiderId, firm: FirmId },
}

/// Daily-aggregated trade dates for one insider at one firm.
///
/// Both date lists are strictly increasing (daily aggregation removes
/// duplicates); the tenure anchors are derived from the union of the lists.
#[derive(Debug, Clone, PartialEq)]
pub struct InsiderFirmLog {
    pub insider_id: InsiderId,
    pub firm_id: FirmId,
    pub acquire_dates: Vec<NaiveDate>,
    pub dispose_dates: Vec<NaiveDate>,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
}

impl InsiderFirmLog {
    pub fn new(
        insider_id: impl Into<InsiderId>,
        firm_id: impl Into<FirmId>,
        acquire_dates: Vec<NaiveDate>,
        dispose_dates: Vec<NaiveDate>,
    ) -> Result<Self, LogError> {
        let insider_id = insider_id.into();
        let firm_id = firm_id.into();
        if acquire_dates.is_empty() && dispose_dates.is_empty() {
            return Err(LogError::Empty {
                insider: insider_id,
                firm: firm_id,
            });
        }
        for list in [&acquire_dates, &dispose_dates] {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LogError::Unsorted {
                    insider: insider_id,
                    firm: firm_id,
                });
            }
        }
        let first_date = acquire_dates
            .first()
            .into_iter()
            .chain(dispose_dates.first())
            .min()
            .copied()
            .unwrap();
        let last_date = acquire_dates
            .last()
            .into_iter()
            .chain(dispose_dates.last())
            .max()
            .copied()
            .unwrap();
        Ok(InsiderFirmLog {
            insider_id,
            firm_id,
            acquire_dates,
            dispose_dates,
            first_date,
            last_date,
        })
    }

    /// Total daily-aggregated trade count at this firm.
    pub fn n_trades(&self) -> usize {
        self.acquire_dates.len() + self.dispose_dates.len()
    }

    /// All trade dates, sorted ascending, duplicates kept once per direction.
    pub fn all_dates(&self) -> Vec<NaiveDate> {
        let mut merged = Vec::with_capacity(self.n_trades());
        merged.extend_from_slice(&self.acquire_dates);
        merged.extend_from_slice(&self.dispose_dates);
        merged.sort_unstable();
        merged
    }

    /// Whether the [first_date, last_date] spans of two logs share a day.
    pub fn tenure_overlaps(&self, other: &InsiderFirmLog) -> bool {
        self.first_date <= other.last_date && other.first_date <= self.last_date
    }
}

/// ISO-8601 calendar week of a date, as (iso year, iso week number).
pub fn iso_week_key(date: NaiveDate) -> (i32, u32) {
    let week = date.iso_week();
    (week.year(), week.week())
}

/// Calendar quarter of a date, as (year, quarter 1..=4).
pub fn quarter_key(date: NaiveDate) -> (i32, u32) {
    (date.year(), (date.month0() / 3) + 1)
}

/// Calendar month of a date, as (year, month 1..=12).
pub fn month_key(date: NaiveDate) -> (i32, u32) {
    (date.year(), date.month())
}

/// Convenience for tests and fixtures.
pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_derives_tenure_anchors() {
        let log = InsiderFirmLog::new(
            "i1",
            "f1",
            vec![date(2015, 3, 2), date(2015, 6, 1)],
            vec![date(2014, 12, 30)],
        )
        .unwrap();
        assert_eq!(log.first_date, date(2014, 12, 30));
        assert_eq!(log.last_date, date(2015, 6, 1));
        assert_eq!(log.n_trades(), 3);
    }

    #[test]
    fn log_rejects_empty_and_unsorted() {
        assert!(matches!(
            InsiderFirmLog::new("i", "f", vec![], vec![]),
            Err(LogError::Empty { .. })
        ));
        assert!(matches!(
            InsiderFirmLog::new("i", "f", vec![date(2015, 1, 2), date(2015, 1, 2)], vec![]),
            Err(LogError::Unsorted { .. })
        ));
    }

    #[test]
    fn tenure_overlap_is_symmetric_and_inclusive() {
        let a = InsiderFirmLog::new("a", "f", vec![date(2015, 1, 1)], vec![date(2015, 2, 1)]).unwrap();
        let b = InsiderFirmLog::new("b", "f", vec![date(2015, 2, 1)], vec![date(2015, 3, 1)]).unwrap();
        let c = InsiderFirmLog::new("c", "f", vec![date(2015, 3, 2)], vec![date(2015, 4, 1)]).unwrap();
        assert!(a.tenure_overlaps(&b));
        assert!(b.tenure_overlaps(&a));
        assert!(!a.tenure_overlaps(&c));
    }

    #[test]
    fn iso_week_straddles_year_boundary() {
        // 2014-12-29 is a Monday in ISO week 1 of 2015.
        assert_eq!(iso_week_key(date(2014, 12, 29)), (2015, 1));
        assert_eq!(quarter_key(date(2014, 12, 29)), (2014, 4));
        assert_eq!(month_key(date(2014, 12, 29)), (2014, 12));
    }
}
