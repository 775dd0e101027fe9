use chrono::{Days, NaiveDate};
use hieralloc_core::{HistoryPoint, Scenario};
use hieralloc_ingest::history::{write_history_csv, write_history_json};
use hieralloc_ingest::scenario::scenario_tables;
use hieralloc_ingest::tables::{parse_demands, write_demands};
use hieralloc_ingest::{build_scenario, load_case_history, load_demands, HistoryFormat, ScenarioParts};
use proptest::prelude::*;

fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    prop::collection::btree_map(
        "[A-Za-z][A-Za-z ]{0,12}[a-z]",
        (0u32..100_000, 1u32..40, prop::collection::vec(0u64..1_000_000, 0..10)),
        1..8,
    )
    .prop_map(|rows| {
        let start = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let regions = rows
            .into_iter()
            .map(|(name, (demand_cents, severity_tenths, counts))| {
                let history = counts
                    .iter()
                    .enumerate()
                    .map(|(i, &active)| HistoryPoint { date: start + Days::new(i as u64 * 2), active })
                    .collect();
                hieralloc_core::RegionRecord::new(name, demand_cents as f64 / 100.0)
                    .with_severity(severity_tenths as f64 / 10.0)
                    .with_history(history)
            })
            .collect();
        Scenario {
            id: None,
            name: "rt".into(),
            resource_name: "oxygen (MT)".into(),
            supply: 100.0,
            regions,
            config: Default::default(),
            revision: 0,
        }
    })
}

proptest! {
    #[test]
    fn scenario_survives_csv_and_json(s in scenario_strategy(), json in any::<bool>()) {
        let (demands, history) = scenario_tables(&s);
        let mut demand_buf = Vec::new();
        write_demands(&s.regions, &mut demand_buf).unwrap();
        let mut history_buf = Vec::new();
        let format = if json { HistoryFormat::Json } else { HistoryFormat::Csv };
        match format {
            HistoryFormat::Json => write_history_json(&history, &mut history_buf).unwrap(),
            HistoryFormat::Csv => write_history_csv(&history, &mut history_buf).unwrap(),
        }
        let demands_back = load_demands(demand_buf.as_slice()).unwrap();
        prop_assert_eq!(&demands_back, &demands);
        let history_back = if history.is_empty() {
            history.clone()
        } else {
            load_case_history(history_buf.as_slice(), format).unwrap()
        };
        let rebuilt = build_scenario(&s.name, &s.resource_name, s.supply, &demands_back, ScenarioParts {
            history: Some(&history_back),
            ..Default::default()
        }).unwrap();
        prop_assert_eq!(rebuilt, s);
    }

    #[test]
    fn loader_never_drops_rows(rows in prop::collection::vec(("[A-C]", "-?[0-9]{1,3}|x", "[0-2]?"), 0..20)) {
        let mut csv = String::from("region,demand_mt,severity\n");
        for (r, d, s) in &rows {
            csv.push_str(&format!("{r},{d},{s}\n"));
        }
        let parsed = parse_demands(csv.as_bytes()).unwrap();
        prop_assert_eq!(parsed.rows_read, rows.len());
        prop_assert_eq!(parsed.records.len() + parsed.errors.len(), rows.len());
    }
}
