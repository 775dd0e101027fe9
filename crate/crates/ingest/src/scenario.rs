//! Assembling a [`Scenario`] from loaded tables.

use std::collections::BTreeMap;

use hieralloc_core::{RegionRecord, Scenario, ScenarioConfig};

use crate::error::IngestError;
use crate::history::CaseHistory;
use crate::tables::DemandRecord;

/// Optional per-region inputs layered on top of the demand table.
#[derive(Debug, Clone, Default)]
pub struct ScenarioParts<'a> {
    pub history: Option<&'a CaseHistory>,
    pub predicted: Option<&'a BTreeMap<String, f64>>,
    pub reopt_weights: Option<&'a BTreeMap<String, f64>>,
}

/// Builds a scenario whose regions follow the order of `demands`.
///
/// Histories for regions absent from the demand table are ignored; predicted
/// values or weights naming an unknown region are an error.
pub fn build_scenario(
    name: &str,
    resource_name: &str,
    supply: f64,
    demands: &[DemandRecord],
    parts: ScenarioParts<'_>,
) -> Result<Scenario, IngestError> {
    for table in [parts.predicted, parts.reopt_weights].into_iter().flatten() {
        if let Some(unknown) = table.keys().find(|k| !demands.iter().any(|d| &d.region == *k)) {
            return Err(IngestError::UnknownRegion(unknown.clone()));
        }
    }
    let regions = demands
        .iter()
        .map(|d| {
            let mut r = RegionRecord::new(d.region.clone(), d.demand).with_severity(d.severity);
            if let Some(series) = parts.history.and_then(|h| h.get(&d.region)) {
                r.history = series.clone();
            }
            r.predicted = parts.predicted.and_then(|p| p.get(&d.region).copied());
            r
        })
        .collect();
    Ok(Scenario {
        id: None,
        name: name.to_owned(),
        resource_name: resource_name.to_owned(),
        supply,
        regions,
        config: ScenarioConfig {
            reopt_weights: parts.reopt_weights.cloned(),
            ..ScenarioConfig::default()
        },
        revision: 0,
    })
}

/// Splits a scenario back into its demand table and history.
pub fn scenario_tables(scenario: &Scenario) -> (Vec<DemandRecord>, CaseHistory) {
    let demands = scenario
        .regions
        .iter()
        .map(|r| DemandRecord {
            region: r.name.clone(),
            demand: r.demand,
            severity: r.severity,
        })
        .collect();
    let history = scenario
        .regions
        .iter()
        .filter(|r| !r.history.is_empty())
        .map(|r| (r.name.clone(), r.history.clone()))
        .collect();
    (demands, history)
}
