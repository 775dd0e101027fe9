//! Bundled oxygen case study (18 Indian states, 20 April 2021).
//!
//! See `fixtures/README.md` for what each file holds. The 60-day histories
//! are synthetic before the final day.

use std::collections::BTreeMap;

use hieralloc_core::Scenario;

use crate::history::{load_case_history, CaseHistory, HistoryFormat};
use crate::scenario::{build_scenario, ScenarioParts};
use crate::tables::{load_demands, load_predicted, load_weights, DemandRecord};

pub const DEMANDS_CSV: &str = include_str!("../fixtures/oxygen_demand_2021-04-20.csv");
pub const PREDICTED_CSV: &str = include_str!("../fixtures/predicted_maxima_2021-04-20.csv");
pub const REOPT_WEIGHTS_CSV: &str = include_str!("../fixtures/reopt_weights_2021-04-20.csv");
pub const HISTORY_CSV: &str = include_str!("../fixtures/active_cases_2021-04-20.csv");

/// Total oxygen available to the center in the case study, MT.
pub const CASE_STUDY_SUPPLY: f64 = 5000.0;

pub fn oxygen_demands() -> Vec<DemandRecord> {
    load_demands(DEMANDS_CSV.as_bytes()).expect("bundled demand fixture parses")
}

pub fn predicted_maxima() -> BTreeMap<String, f64> {
    load_predicted(PREDICTED_CSV.as_bytes()).expect("bundled predicted fixture parses")
}

pub fn reopt_weights() -> BTreeMap<String, f64> {
    load_weights(REOPT_WEIGHTS_CSV.as_bytes()).expect("bundled weight fixture parses")
}

pub fn case_history() -> CaseHistory {
    load_case_history(HISTORY_CSV.as_bytes(), HistoryFormat::Csv).expect("bundled history parses")
}

/// The full case-study scenario: demands, histories, fixture predictions and
/// the published re-optimization shares, with 5000 MT of supply.
pub fn oxygen_case_study() -> Scenario {
    let history = case_history();
    let predicted = predicted_maxima();
    let weights = reopt_weights();
    build_scenario(
        "oxygen-2021-04-20",
        "oxygen (MT)",
        CASE_STUDY_SUPPLY,
        &oxygen_demands(),
        ScenarioParts {
            history: Some(&history),
            predicted: Some(&predicted),
            reopt_weights: Some(&weights),
        },
    )
    .expect("bundled fixtures are consistent")
}
