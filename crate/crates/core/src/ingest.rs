//! Ingestion: Form 4 XML filings and tabular trade CSVs into canonical
//! daily-aggregated trade logs.
//!
//! Record-level problems (missing mandatory fields, out-of-horizon dates) do
//! not abort a parse; the offending row is skipped and accounted for in the
//! rejects report. Only malformed XML or unreadable input is a hard error.

use crate::types::{
    Direction, EntityKind, FirmId, Horizon, InsiderFirmLog, InsiderId, TradeEvent,
};
use chrono::NaiveDate;
use quick_xml::events::Event as XmlEvent;
use quick_xml::Reader;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed XML in {source_name} at byte offset {offset}: {message}")]
    Xml {
        source_name: String,
        offset: u64,
        message: String,
    },
    #[error("CSV error in {source_name}: {message}")]
    Csv {
        source_name: String,
        message: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A skipped record and why it was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectRecord {
    /// File name or `csv` for tabular input.
    pub source: String,
    /// Row locator: transaction index within a filing or CSV line number.
    pub locator: String,
    pub reason: String,
}

/// Ingestion configuration shared by the XML and CSV paths.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub horizon: Horizon,
    /// Name suffixes marking institutional entities; compared on uppercase
    /// alphanumeric tokens, so "L.L.C." and "LLC" both match.
    pub institution_suffixes: Vec<String>,
    /// Keep only the latest filing per (owner, issuer, period); amendments
    /// replace originals in file order.
    pub keep_latest_amendment: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            horizon: Horizon::default(),
            institution_suffixes: [
                "LLC", "L.L.C.", "LP", "L.P.", "INC", "CORP", "LTD", "TRUST", "FUND",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            keep_latest_amendment: true,
        }
    }
}

/// A parsed Form 4 document: identity fields plus the non-derivative events.
#[derive(Debug, Clone, PartialEq)]
pub struct Form4Document {
    /// "4" or "4/A".
    pub document_type: String,
    pub period_of_report: Option<NaiveDate>,
    pub issuer_cik: Option<FirmId>,
    pub owner_cik: Option<InsiderId>,
    pub owner_name: Option<String>,
    pub events: Vec<TradeEvent>,
    pub rejects: Vec<RejectRecord>,
}

#[derive(Default)]
struct TransactionRow {
    date: Option<String>,
    code: Option<String>,
    shares: Option<String>,
}

/// Parse one Form 4 XML document. Non-derivative transaction rows map to
/// trade events; the derivative table and holding rows are ignored. A filing
/// with several reporting owners is attributed to the first one.
pub fn parse_form4(
    xml: &[u8],
    source_name: &str,
    cfg: &IngestConfig,
) -> Result<Form4Document, IngestError> {
    let mut reader = Reader::from_reader(xml);
    reader.config_mut().trim_text(true);

    let mut doc = Form4Document {
        document_type: String::new(),
        period_of_report: None,
        issuer_cik: None,
        owner_cik: None,
        owner_name: None,
        events: Vec::new(),
        rejects: Vec::new(),
    };

    let mut path: Vec<String> = Vec::new();
    let mut row = TransactionRow::default();
    let mut rows: Vec<TransactionRow> = Vec::new();
    let mut buf = Vec::new();
    loop {
        match reader.read_event_into(&mut buf) {
            Ok(XmlEvent::Start(start)) => {
                let name = String::from_utf8_lossy(start.name().as_ref()).into_owned();
                if name == "nonDerivativeTransaction" {
                    row = TransactionRow::default();
                }
                path.push(name);
            }
            Ok(XmlEvent::End(end)) => {
                let name = String::from_utf8_lossy(end.name().as_ref()).into_owned();
                if name == "nonDerivativeTransaction" {
                    rows.push(std::mem::take(&mut row));
                }
                path.pop();
            }
            Ok(XmlEvent::Text(text)) => {
                let value = text
                    .unescape()
                    .map_err(|e| IngestError::Xml {
                        source_name: source_name.to_string(),
                        offset: reader.buffer_position(),
                        message: e.to_string(),
                    })?
                    .trim()
                    .to_string();
                if value.is_empty() {
                    continue;
                }
                let at = |suffix: &[&str]| path_ends_with(&path, suffix);
                let in_transaction = path.iter().any(|p| p == "nonDerivativeTransaction");
                if at(&["documentType"]) && doc.document_type.is_empty() {
                    doc.document_type = value;
                } else if at(&["periodOfReport"]) && doc.period_of_report.is_none() {
                    doc.period_of_report = NaiveDate::parse_from_str(&value, "%Y-%m-%d").ok();
                } else if at(&["issuer", "issuerCik"]) && doc.issuer_cik.is_none() {
                    doc.issuer_cik = Some(value);
                } else if at(&["reportingOwnerId", "rptOwnerCik"]) && doc.owner_cik.is_none() {
                    doc.owner_cik = Some(value);
                } else if at(&["reportingOwnerId", "rptOwnerName"]) && doc.owner_name.is_none() {
                    doc.owner_name = Some(value);
                } else if in_transaction {
                    if at(&["transactionDate", "value"]) {
                        row.date = Some(value);
                    } else if at(&["transactionAcquiredDisposedCode", "value"]) {
                        row.code = Some(value);
                    } else if at(&["transactionShares", "value"]) {
                        row.shares = Some(value);
                    }
                }
            }
            Ok(XmlEvent::Eof) => break,
            Ok(_) => {}
            Err(e) => {
                return Err(IngestError::Xml {
                    source_name: source_name.to_string(),
                    offset: reader.buffer_position(),
                    message: e.to_string(),
                });
            }
        }
        buf.clear();
    }

    for (index, row) in rows.into_iter().enumerate() {
        let locator = format!("transaction {}", index + 1);
        let reject = |reason: String, rejects: &mut Vec<RejectRecord>| {
            rejects.push(RejectRecord {
                source: source_name.to_string(),
                locator: locator.clone(),
                reason,
            });
        };
        let Some(owner) = doc.owner_cik.clone() else {
            reject("missing owner CIK".into(), &mut doc.rejects);
            continue;
        };
        let Some(issuer) = doc.issuer_cik.clone() else {
            reject("missing issuer CIK".into(), &mut doc.rejects);
            continue;
        };
        let Some(date_raw) = row.date else {
            reject("missing transaction date".into(), &mut doc.rejects);
            continue;
        };
        let Ok(date) = NaiveDate::parse_from_str(&date_raw, "%Y-%m-%d") else {
            reject(format!("unparseable transaction date {date_raw:?}"), &mut doc.rejects);
            continue;
        };
        let Some(code) = row.code else {
            reject("missing acquired/disposed code".into(), &mut doc.rejects);
            continue;
        };
        let Some(direction) = Direction::from_code(&code) else {
            reject(format!("invalid acquired/disposed code {code:?}"), &mut doc.rejects);
            continue;
        };
        if !cfg.horizon.contains(date) {
            reject(format!("date {date} outside study horizon"), &mut doc.rejects);
            continue;
        }
        let quantity = row.shares.and_then(|s| s.parse::<f64>().ok());
        doc.events.push(TradeEvent {
            insider_id: owner,
            firm_id: issuer,
            date,
            direction,
            insider_name: doc.owner_name.clone(),
            entity_kind: EntityKind::Unknown,
            quantity,
        });
    }
    Ok(doc)
}

fn path_ends_with(path: &[String], suffix: &[&str]) -> bool {
    path.len() >= suffix.len()
        && path[path.len() - suffix.len()..]
            .iter()
            .zip(suffix)
            .all(|(a, b)| a == b)
}

/// Pooled result of ingesting a filing directory or a CSV.
#[derive(Debug, Clone, Default)]
pub struct IngestOutcome {
    pub events: Vec<TradeEvent>,
    pub rejects: Vec<RejectRecord>,
    /// Filings replaced by a later amendment or duplicate.
    pub superseded_filings: usize,
}

/// Parse every `*.xml` file under `dir` (sorted by file name, which mirrors
/// accession order) and pool the events. With `keep_latest_amendment`, a
/// later filing for the same (owner, issuer, period) replaces the earlier
/// one.
pub fn ingest_form4_dir(dir: &Path, cfg: &IngestConfig) -> Result<IngestOutcome, IngestError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| IngestError::Io {
            path: dir.display().to_string(),
            source: e,
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("xml")))
        .collect();
    paths.sort();

    let mut outcome = IngestOutcome::default();
    // Filing slot per amendment key; identity-less docs never coalesce.
    let mut slots: Vec<Form4Document> = Vec::new();
    let mut by_key: BTreeMap<(InsiderId, FirmId, NaiveDate), usize> = BTreeMap::new();
    for path in &paths {
        let bytes = std::fs::read(path).map_err(|e| IngestError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let doc = parse_form4(&bytes, &name, cfg)?;
        let key = match (&doc.owner_cik, &doc.issuer_cik, doc.period_of_report) {
            (Some(owner), Some(issuer), Some(period)) if cfg.keep_latest_amendment => {
                Some((owner.clone(), issuer.clone(), period))
            }
            _ => None,
        };
        match key.and_then(|k| by_key.get(&k).copied().map(|slot| (k, slot))) {
            Some((_, slot)) => {
                outcome.superseded_filings += 1;
                slots[slot] = doc;
            }
            None => {
                if let (Some(owner), Some(issuer), Some(period)) =
                    (&doc.owner_cik, &doc.issuer_cik, doc.period_of_report)
                {
                    if cfg.keep_latest_amendment {
                        by_key.insert((owner.clone(), issuer.clone(), period), slots.len());
                    }
                }
                slots.push(doc);
            }
        }
    }
    for doc in slots {
        outcome.events.extend(doc.events);
        outcome.rejects.extend(doc.rejects);
    }
    sort_events(&mut outcome.events);
    Ok(outcome)
}

/// Read trade events from CSV with header
/// `insider_id,firm_id,date,direction[,insider_name,entity_kind,quantity]`.
pub fn read_trades_csv(path: &Path, cfg: &IngestConfig) -> Result<IngestOutcome, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let source = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".to_string());

    let headers = reader
        .headers()
        .map_err(|e| IngestError::Csv {
            source_name: source.clone(),
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(c_insider), Some(c_firm), Some(c_date), Some(c_dir)) = (
        col("insider_id"),
        col("firm_id"),
        col("date"),
        col("direction"),
    ) else {
        return Err(IngestError::Csv {
            source_name: source,
            message: "header must contain insider_id,firm_id,date,direction".into(),
        });
    };
    let c_name = col("insider_name");
    let c_kind = col("entity_kind");
    let c_qty = col("quantity");

    let mut outcome = IngestOutcome::default();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let record = record.map_err(|e| IngestError::Csv {
            source_name: source.clone(),
            message: e.to_string(),
        })?;
        let reject = |reason: String, rejects: &mut Vec<RejectRecord>| {
            rejects.push(RejectRecord {
                source: source.clone(),
                locator: format!("line {line}"),
                reason,
            });
        };
        let field = |idx: usize| record.get(idx).unwrap_or("").trim();
        let insider = field(c_insider);
        let firm = field(c_firm);
        if insider.is_empty() || firm.is_empty() {
            reject("missing insider_id or firm_id".into(), &mut outcome.rejects);
            continue;
        }
        let Ok(date) = NaiveDate::parse_from_str(field(c_date), "%Y-%m-%d") else {
            reject(
                format!("unparseable date {:?}", field(c_date)),
                &mut outcome.rejects,
            );
            continue;
        };
        let Some(direction) = Direction::from_code(field(c_dir)) else {
            reject(
                format!("invalid direction {:?}", field(c_dir)),
                &mut outcome.rejects,
            );
            continue;
        };
        if !cfg.horizon.contains(date) {
            reject(format!("date {date} outside study horizon"), &mut outcome.rejects);
            continue;
        }
        let insider_name = c_name
            .map(|c| field(c).to_string())
            .filter(|s| !s.is_empty());
        let entity_kind = match c_kind {
            Some(c) => match EntityKind::parse(field(c)) {
                Some(kind) => kind,
                None => {
                    reject(
                        format!("invalid entity_kind {:?}", field(c)),
                        &mut outcome.rejects,
                    );
                    continue;
                }
            },
            None => EntityKind::Unknown,
        };
        outcome.events.push(TradeEvent {
            insider_id: insider.to_string(),
            firm_id: firm.to_string(),
            date,
            direction,
            insider_name,
            entity_kind,
            quantity: c_qty.and_then(|c| field(c).parse::<f64>().ok()),
        });
    }
    sort_events(&mut outcome.events);
    Ok(outcome)
}

fn sort_events(events: &mut [TradeEvent]) {
    events.sort_by(|x, y| {
        (&x.firm_id, &x.insider_id, x.date, x.direction)
            .cmp(&(&y.firm_id, &y.insider_id, y.date, y.direction))
    });
}

fn normalize_token(token: &str) -> String {
    token
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_uppercase()
}

/// Remove institutional entities: an explicit institution flag dominates,
/// otherwise any name token matching the suffix list (after stripping
/// punctuation) marks the record institutional. Returns the survivors and
/// the removed count; the filter is idempotent.
pub fn filter_institutions(
    events: Vec<TradeEvent>,
    cfg: &IngestConfig,
) -> (Vec<TradeEvent>, usize) {
    let suffixes: BTreeSet<String> = cfg
        .institution_suffixes
        .iter()
        .map(|s| normalize_token(s))
        .collect();
    let is_institution = |event: &TradeEvent| -> bool {
        match event.entity_kind {
            EntityKind::Institution => true,
            EntityKind::Person => false,
            EntityKind::Unknown => event.insider_name.as_deref().is_some_and(|name| {
                name.split_whitespace()
                    .any(|token| suffixes.contains(&normalize_token(token)))
            }),
        }
    };
    let before = events.len();
    let kept: Vec<TradeEvent> = events.into_iter().filter(|e| !is_institution(e)).collect();
    let removed = before - kept.len();
    (kept, removed)
}

/// Collapse events to one entry per (insider, firm, direction, date) and
/// group into per-(insider, firm) logs, ordered by (firm, insider).
pub fn aggregate_daily(events: &[TradeEvent]) -> Vec<InsiderFirmLog> {
    let mut grouped: BTreeMap<(&FirmId, &InsiderId), (BTreeSet<NaiveDate>, BTreeSet<NaiveDate>)> =
        BTreeMap::new();
    for event in events {
        let entry = grouped
            .entry((&event.firm_id, &event.insider_id))
            .or_default();
        match event.direction {
            Direction::Acquire => entry.0.insert(event.date),
            Direction::Dispose => entry.1.insert(event.date),
        };
    }
    grouped
        .into_iter()
        .map(|((firm, insider), (acquires, disposes))| {
            InsiderFirmLog::new(
                insider.clone(),
                firm.clone(),
                acquires.into_iter().collect(),
                disposes.into_iter().collect(),
            )
            .expect("grouped logs are non-empty")
        })
        .collect()
}

/// Expand logs back into one event per (insider, firm, direction, date);
/// inverse of [`aggregate_daily`] up to ordering.
pub fn expand_logs(logs: &[InsiderFirmLog]) -> Vec<TradeEvent> {
    let mut events = Vec::new();
    for log in logs {
        for &date in &log.acquire_dates {
            events.push(TradeEvent::new(
                log.insider_id.clone(),
                log.firm_id.clone(),
                date,
                Direction::Acquire,
            ));
        }
        for &date in &log.dispose_dates {
            events.push(TradeEvent::new(
                log.insider_id.clone(),
                log.firm_id.clone(),
                date,
                Direction::Dispose,
            ));
        }
    }
    sort_events(&mut events);
    events
}

/// Canonical aggregated CSV: `insider_id,firm_id,date,direction`, ordered by
/// (firm, insider, date, direction).
pub fn write_canonical_csv<W: Write>(logs: &[InsiderFirmLog], mut out: W) -> std::io::Result<()> {
    writeln!(out, "insider_id,firm_id,date,direction")?;
    for event in expand_logs(logs) {
        writeln!(
            out,
            "{},{},{},{}",
            event.insider_id, event.firm_id, event.date, event.direction
        )?;
    }
    Ok(())
}

/// Rejects report CSV: `source,locator,reason`.
pub fn write_rejects_csv<W: Write>(rejects: &[RejectRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "source,locator,reason")?;
    for r in rejects {
        let escape = |s: &str| {
            if s.contains(',') || s.contains('"') {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        writeln!(out, "{},{},{}", escape(&r.source), escape(&r.locator), escape(&r.reason))?;
    }
    Ok(())
}
