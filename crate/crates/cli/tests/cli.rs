//! Invokes the built binary. Golden files live in `tests/golden`; set
//! `HIERALLOC_BLESS=1` to rewrite them after an intended output change.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../ingest/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hieralloc"))
        .args(args)
        .env_remove("ALLOC_CASE_ENDPOINT")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn golden(name: &str, actual: &str) {
    let path: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("HIERALLOC_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
    assert_eq!(actual, expected, "{name} drifted");
}

fn case_study_args(output: &str) -> Vec<String> {
    [
        "allocate",
        "--demands",
        &fixture("oxygen_demand_2021-04-20.csv"),
        "--predicted",
        &fixture("predicted_maxima_2021-04-20.csv"),
        "--reopt-weights",
        &fixture("reopt_weights_2021-04-20.csv"),
        "--supply",
        "5000",
        "--output",
        output,
    ]
    .map(String::from)
    .to_vec()
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

#[test]
fn allocate_table_is_stable() {
    let args = case_study_args("table");
    let first = stdout(&strs(&args));
    assert_eq!(first, stdout(&strs(&args)));
    assert!(first.contains("remaining supply 3153.00, balance demand 4748.00"));
    golden("case_study_table.txt", &first);
}

#[test]
fn allocate_csv_and_json_are_stable() {
    golden("case_study.csv", &stdout(&strs(&case_study_args("csv"))));
    let json = stdout(&strs(&case_study_args("json")));
    let plan: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(plan["schema"], "alloc-plan/1");
    golden("case_study.json", &json);
}

#[test]
fn forecast_outputs_agree() {
    let history = fixture("active_cases_2021-04-20.csv");
    let table = stdout(&["forecast", "--history", &history]);
    assert_eq!(table.lines().count(), 19);
    assert!(table.lines().next().unwrap().ends_with("horizon_max"));
    golden("forecast_table.txt", &table);

    let json: Vec<serde_json::Value> =
        serde_json::from_str(&stdout(&["forecast", "--history", &history, "--output", "json"])).unwrap();
    assert_eq!(json.len(), 18);
    let csv = stdout(&["forecast", "--history", &history, "--output", "csv"]);
    for (row, entry) in csv.lines().skip(1).zip(&json) {
        let max = row.rsplit(',').next().unwrap();
        let want = entry["horizon_max"].as_f64().unwrap();
        assert_eq!(max, hieralloc_core::report::fmt2(want));
    }
}

#[test]
fn forecast_of_constant_series_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.csv");
    std::fs::write(&path, "region,date,active\nA,2021-04-18,50\nA,2021-04-19,50\nA,2021-04-20,50\n").unwrap();
    let out = stdout(&["forecast", "--history", path.to_str().unwrap(), "--horizon", "1", "--output", "csv"]);
    assert_eq!(out, "region,level,trend,h1,horizon_max\nA,50.00,0.00,50.00,50.00\n");
}

#[test]
fn district_level_hand_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("three_hospitals.csv");
    std::fs::write(&path, "region,demand_mt,severity\nH1,30,1\nH2,20,1\nH3,10,1\n").unwrap();
    let json = stdout(&[
        "allocate", "--level", "district", "--demands", path.to_str().unwrap(), "--supply", "50", "--output", "json",
    ]);
    let plan: hieralloc_core::AllocationPlan = serde_json::from_str(&json).unwrap();
    for (name, want) in [("H1", 165.0 / 7.0), ("H2", 120.0 / 7.0), ("H3", 65.0 / 7.0)] {
        assert!((plan.final_amount(name).unwrap() - want).abs() < 1e-9);
    }
}

#[test]
fn report_round_trip_and_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let plan_path = dir.path().join("plan.json");
    std::fs::write(&plan_path, stdout(&strs(&case_study_args("json")))).unwrap();
    let md = stdout(&["report", "--plan", plan_path.to_str().unwrap(), "--format", "md"]);
    for stage in ["ideal", "prepass", "optimized", "final"] {
        assert_eq!(md.matches(&format!("## Stage: {stage}\n")).count(), 1, "{stage}");
    }
    let direct = stdout(&strs(&case_study_args("md")));
    assert_eq!(md, direct);

    let mut plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&plan_path).unwrap()).unwrap();
    plan.as_object_mut().unwrap().remove("stage_final");
    let tampered = dir.path().join("tampered.json");
    std::fs::write(&tampered, plan.to_string()).unwrap();
    let out = run(&["report", "--plan", tampered.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage_final"));

    plan["schema"] = "alloc-plan/0".into();
    std::fs::write(&tampered, plan.to_string()).unwrap();
    let out = run(&["report", "--plan", tampered.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema mismatch"));
}

#[test]
fn single_region_report_has_one_row_tables() {
    let dir = tempfile::tempdir().unwrap();
    let demands = dir.path().join("d.csv");
    let predicted = dir.path().join("p.csv");
    std::fs::write(&demands, "region,demand_mt\nSolo,80\n").unwrap();
    std::fs::write(&predicted, "region,predicted\nSolo,10\n").unwrap();
    let csv = stdout(&[
        "allocate", "--demands", demands.to_str().unwrap(), "--predicted", predicted.to_str().unwrap(),
        "--supply", "50", "--output", "csv",
    ]);
    let final_rows: Vec<&str> = csv.lines().filter(|l| l.starts_with("final,Solo")).collect();
    assert_eq!(final_rows, ["final,Solo,80.00,50.00"]);
    assert_eq!(csv.lines().filter(|l| l.starts_with("ideal,")).count(), 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "region,demand_mt,severity\nA,10,1\nB,-5,1\n").unwrap();
    let out = run(&["allocate", "--demands", bad.to_str().unwrap(), "--supply", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("demand must be ≥ 0 (row 3) [column demand_mt]"));

    let missing = run(&["forecast", "--history", "/nonexistent/history.csv"]);
    assert_eq!(missing.status.code(), Some(2));

    let demands = dir.path().join("d.csv");
    let zeros = dir.path().join("p.csv");
    std::fs::write(&demands, "region,demand_mt\nA,10\nB,20\n").unwrap();
    std::fs::write(&zeros, "region,predicted\nA,0\nB,0\n").unwrap();
    let out = run(&[
        "allocate", "--demands", demands.to_str().unwrap(), "--predicted", zeros.to_str().unwrap(), "--supply", "5",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(&[
        "allocate", "--demands", demands.to_str().unwrap(), "--predicted", zeros.to_str().unwrap(), "--supply", "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn supply_equal_to_demand_meets_every_demand() {
    let dir = tempfile::tempdir().unwrap();
    let predicted = dir.path().join("p.csv");
    let rows: String = hieralloc_ingest::fixtures::oxygen_demands()
        .iter()
        .map(|d| format!("{},{}\n", d.region, d.demand))
        .collect();
    std::fs::write(&predicted, format!("region,predicted\n{rows}")).unwrap();
    let json = stdout(&[
        "allocate", "--demands", &fixture("oxygen_demand_2021-04-20.csv"), "--predicted",
        predicted.to_str().unwrap(), "--supply", "6595", "--output", "json",
    ]);
    let plan: hieralloc_core::AllocationPlan = serde_json::from_str(&json).unwrap();
    for d in hieralloc_ingest::fixtures::oxygen_demands() {
        assert!((plan.final_amount(&d.region).unwrap() - d.demand).abs() < 1e-9, "{}", d.region);
    }
}
