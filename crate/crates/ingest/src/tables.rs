//! Per-region tables: demands, predicted maxima and re-optimization weights.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use hieralloc_core::RegionRecord;
use serde::{Deserialize, Serialize};

use crate::error::IngestError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandRecord {
    pub region: String,
    pub demand: f64,
    pub severity: f64,
}

/// Every row accounted for: each data row yields a record or an error.
#[derive(Debug, Default)]
pub struct DemandParse {
    pub records: Vec<DemandRecord>,
    pub errors: Vec<IngestError>,
    pub rows_read: usize,
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn require_column(headers: &csv::StringRecord, name: &str) -> Result<usize, IngestError> {
    column_index(headers, name).ok_or_else(|| IngestError::MissingColumn(name.to_owned()))
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input)
}

fn line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_number(raw: Option<&str>, row: u64, column: &str) -> Result<f64, IngestError> {
    let raw = raw.unwrap_or("");
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| IngestError::row(row, column, format!("invalid number \"{raw}\"")))
}

/// Parses a `region,demand_mt,severity` table, collecting per-row errors
/// instead of stopping at the first one. Severity may be absent or blank.
pub fn parse_demands<R: Read>(input: R) -> Result<DemandParse, IngestError> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let region_col = require_column(&headers, "region")?;
    let demand_col = require_column(&headers, "demand_mt")?;
    let severity_col = column_index(&headers, "severity");

    let mut out = DemandParse::default();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for record in rdr.records() {
        out.rows_read += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                out.errors.push(e.into());
                continue;
            }
        };
        let row = line(&record);
        let parsed = (|| {
            let region = record.get(region_col).unwrap_or("").to_owned();
            if region.is_empty() {
                return Err(IngestError::row(row, "region", "region must not be empty"));
            }
            let demand = parse_number(record.get(demand_col), row, "demand_mt")?;
            if demand < 0.0 {
                return Err(IngestError::row(row, "demand_mt", "demand must be ≥ 0"));
            }
            let severity = match severity_col.and_then(|c| record.get(c)).filter(|s| !s.is_empty()) {
                Some(raw) => parse_number(Some(raw), row, "severity")?,
                None => 1.0,
            };
            if severity <= 0.0 {
                return Err(IngestError::row(row, "severity", "severity must be > 0"));
            }
            if seen.insert(region.clone(), row).is_some() {
                return Err(IngestError::DuplicateRegion { region, row });
            }
            Ok(DemandRecord {
                region,
                demand,
                severity,
            })
        })();
        match parsed {
            Ok(r) => out.records.push(r),
            Err(e) => out.errors.push(e),
        }
    }
    Ok(out)
}

/// Strict variant of [`parse_demands`]: fails on the first bad row.
pub fn load_demands<R: Read>(input: R) -> Result<Vec<DemandRecord>, IngestError> {
    let mut parsed = parse_demands(input)?;
    if parsed.errors.is_empty() {
        Ok(parsed.records)
    } else {
        Err(parsed.errors.swap_remove(0))
    }
}

/// Reads a two-column `region,<value_column>` table of nonnegative numbers.
pub fn load_region_values<R: Read>(
    input: R,
    value_column: &str,
) -> Result<BTreeMap<String, f64>, IngestError> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let region_col = require_column(&headers, "region")?;
    let value_col = require_column(&headers, value_column)?;
    let mut out = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let row = line(&record);
        let region = record.get(region_col).unwrap_or("").to_owned();
        let value = parse_number(record.get(value_col), row, value_column)?;
        if value < 0.0 {
            return Err(IngestError::row(row, value_column, format!("{value_column} must be ≥ 0")));
        }
        if out.insert(region.clone(), value).is_some() {
            return Err(IngestError::DuplicateRegion { region, row });
        }
    }
    Ok(out)
}

/// `region,predicted` table of horizon maxima.
pub fn load_predicted<R: Read>(input: R) -> Result<BTreeMap<String, f64>, IngestError> {
    load_region_values(input, "predicted")
}

/// `region,weight` table of re-optimization shares.
pub fn load_weights<R: Read>(input: R) -> Result<BTreeMap<String, f64>, IngestError> {
    load_region_values(input, "weight")
}

pub fn write_demands<W: Write>(regions: &[RegionRecord], out: W) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["region", "demand_mt", "severity"])?;
    for r in regions {
        wtr.write_record([r.name.clone(), r.demand.to_string(), r.severity.to_string()])?;
    }
    wtr.flush().map_err(|source| IngestError::Io {
        path: "<demands>".into(),
        source,
    })
}
