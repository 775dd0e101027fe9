//! Active-case histories in CSV (`region,date,active`) or JSON
//! (`[{"region", "date", "active"}]`) form.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use hieralloc_core::HistoryPoint;
use serde::{Deserialize, Serialize};

use crate::error::IngestError;

/// Per-region series, sorted by date, keyed by region name.
pub type CaseHistory = BTreeMap<String, Vec<HistoryPoint>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryFormat {
    Csv,
    Json,
}

impl HistoryFormat {
    /// `.json` files are JSON, everything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => HistoryFormat::Json,
            _ => HistoryFormat::Csv,
        }
    }
}

/// Wire shape of one history observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub region: String,
    pub date: String,
    pub active: i64,
}

fn parse_date(raw: &str, row: u64) -> Result<NaiveDate, IngestError> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map_err(|_| IngestError::row(row, "date", format!("unparseable date \"{raw}\"")))
}

/// Validates raw records and groups them into sorted per-region series.
/// `row` numbers are used for error messages only.
pub fn collect_history(
    records: impl IntoIterator<Item = (u64, HistoryRecord)>,
) -> Result<CaseHistory, IngestError> {
    let mut out: CaseHistory = BTreeMap::new();
    for (row, rec) in records {
        if rec.region.is_empty() {
            return Err(IngestError::row(row, "region", "region must not be empty"));
        }
        let date = parse_date(&rec.date, row)?;
        if rec.active < 0 {
            return Err(IngestError::row(row, "active", "active must be ≥ 0"));
        }
        out.entry(rec.region).or_default().push(HistoryPoint {
            date,
            active: rec.active as u64,
        });
    }
    for (region, series) in out.iter_mut() {
        series.sort_by_key(|p| p.date);
        if let Some(w) = series.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(IngestError::DuplicateDate {
                region: region.clone(),
                date: w[0].date.to_string(),
                row: 0,
            });
        }
    }
    Ok(out)
}

fn csv_records<R: Read>(input: R) -> Result<Vec<(u64, HistoryRecord)>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_owned()))
    };
    let (region_col, date_col, active_col) = (col("region")?, col("date")?, col("active")?);
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line());
        let raw_active = record.get(active_col).unwrap_or("");
        let active = raw_active.parse::<i64>().map_err(|_| {
            IngestError::row(row, "active", format!("invalid count \"{raw_active}\""))
        })?;
        out.push((
            row,
            HistoryRecord {
                region: record.get(region_col).unwrap_or("").to_owned(),
                date: record.get(date_col).unwrap_or("").to_owned(),
                active,
            },
        ));
    }
    Ok(out)
}

/// Parses a JSON array of history records. Element `k` reports as row `k + 1`.
pub fn parse_history_json(bytes: &[u8]) -> Result<Vec<HistoryRecord>, serde_json::Error> {
    serde_json::from_slice(bytes)
}

pub fn load_case_history<R: Read>(mut input: R, format: HistoryFormat) -> Result<CaseHistory, IngestError> {
    match format {
        HistoryFormat::Csv => collect_history(csv_records(input)?),
        HistoryFormat::Json => {
            let mut bytes = Vec::new();
            input.read_to_end(&mut bytes).map_err(|source| IngestError::Io {
                path: "<history>".into(),
                source,
            })?;
            let records = parse_history_json(&bytes)?;
            collect_history(records.into_iter().enumerate().map(|(i, r)| (i as u64 + 1, r)))
        }
    }
}

fn flatten(history: &CaseHistory) -> Vec<HistoryRecord> {
    history
        .iter()
        .flat_map(|(region, series)| {
            series.iter().map(move |p| HistoryRecord {
                region: region.clone(),
                date: p.date.format("%Y-%m-%d").to_string(),
                active: p.active as i64,
            })
        })
        .collect()
}

pub fn write_history_csv<W: Write>(history: &CaseHistory, out: W) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(out);
    for rec in flatten(history) {
        wtr.serialize(rec)?;
    }
    wtr.flush().map_err(|source| IngestError::Io {
        path: "<history>".into(),
        source,
    })
}

pub fn write_history_json<W: Write>(history: &CaseHistory, out: W) -> Result<(), IngestError> {
    serde_json::to_writer(out, &flatten(history))?;
    Ok(())
}
