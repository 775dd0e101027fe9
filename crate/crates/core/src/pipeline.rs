//! End-to-end allocation procedure.
//!
//! For the center level a run goes: predicted maxima → ideal shares →
//! full-demand pre-pass → quadratic re-optimization of the remainder →
//! cap-and-redistribute. The district and proportional levels reuse the
//! same plan shape with fewer stages.

use serde::{Deserialize, Serialize};

use crate::error::{ForecastError, PipelineError};
use crate::exec::{self, Execution};
use crate::forecast::{forecast_all, ideal_allocation, ideal_weights};
use crate::model::{
    validate_scenario, AllocationPlan, AllocationProblem, DistrictProblem, Level, OptimizedStage,
    PrepassStage, RedistributionPolicy, RegionAmount, RegionDemand, Scenario, SolverResult,
    PLAN_SCHEMA,
};
use crate::solver::{lagrangian_residual, solve_center_allocation, solve_district_allocation};

/// Outcome of the full-demand pre-pass. Index sets refer to the input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepass {
    pub satisfied: Vec<usize>,
    pub remaining: Vec<usize>,
    pub remaining_supply: f64,
    pub balance_demand: f64,
}

/// Grants full demand to every region whose demand does not exceed its
/// ideal amount. Membership is decided once against `ideals`.
pub fn prepass_full_allocation(
    demands: &[f64],
    ideals: &[f64],
    total: f64,
) -> Result<Prepass, PipelineError> {
    let (satisfied, remaining): (Vec<usize>, Vec<usize>) =
        (0..demands.len()).partition(|&i| demands[i] <= ideals[i]);
    let granted: f64 = satisfied.iter().map(|&i| demands[i]).sum();
    if granted > total {
        return Err(PipelineError::SupplyExhausted {
            satisfied: granted,
            supply: total,
        });
    }
    Ok(Prepass {
        balance_demand: remaining.iter().map(|&i| demands[i]).sum(),
        satisfied,
        remaining,
        remaining_supply: total - granted,
    })
}

/// Where the ideal amounts of the re-optimization stage come from.
#[derive(Debug, Clone, Copy)]
pub enum Ideals<'a> {
    /// Nonnegative shares (predicted maxima or weights), renormalised to the
    /// stage's supply.
    Shares(&'a [f64]),
    /// Ideal amounts used as given.
    Given(&'a [f64]),
}

/// Re-solves the center problem over the regions left after the pre-pass.
/// Returns the ideal amounts used together with the solver result.
pub fn reoptimize_remaining(
    demands: &[f64],
    ideals: Ideals<'_>,
    severities: &[f64],
    supply: f64,
) -> Result<(Vec<f64>, SolverResult), PipelineError> {
    let ideal_amounts = match ideals {
        Ideals::Shares(shares) => ideal_allocation(&ideal_weights(shares)?, supply),
        Ideals::Given(amounts) => amounts.to_vec(),
    };
    let problem =
        AllocationProblem::new(demands.to_vec(), ideal_amounts.clone(), severities.to_vec(), supply)
            .map_err(crate::error::SolverError::from)?;
    let result = solve_center_allocation(&problem)?;
    Ok((ideal_amounts, result))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Redistribution {
    pub amounts: Vec<f64>,
    /// Indices clamped to their demand, in the order they were capped.
    pub capped: Vec<usize>,
    /// Supply left over once every region sits at its demand.
    pub surplus: f64,
    pub passes: usize,
}

/// Water-filling: clamps amounts above demand, pools the excess and hands it
/// to the regions still under their demand, until nothing exceeds demand or
/// every region is capped.
pub fn cap_and_redistribute(
    amounts: &[f64],
    demands: &[f64],
    policy: RedistributionPolicy,
) -> Redistribution {
    let n = amounts.len();
    let mut out = amounts.to_vec();
    let mut is_capped = vec![false; n];
    let mut capped = Vec::new();
    let mut surplus = 0.0;
    let mut passes = 0;

    loop {
        let over: Vec<usize> = (0..n).filter(|&i| !is_capped[i] && out[i] > demands[i]).collect();
        if over.is_empty() {
            break;
        }
        passes += 1;
        let mut pool = 0.0;
        for &i in &over {
            pool += out[i] - demands[i];
            out[i] = demands[i];
            is_capped[i] = true;
            capped.push(i);
        }
        let open: Vec<usize> = (0..n).filter(|&i| !is_capped[i]).collect();
        if open.is_empty() {
            surplus = pool;
            break;
        }
        let open_sum: f64 = open.iter().map(|&i| out[i]).sum();
        match policy {
            RedistributionPolicy::Proportional if open_sum > 0.0 => {
                for &i in &open {
                    out[i] += pool * out[i] / open_sum;
                }
            }
            _ => {
                let share = pool / open.len() as f64;
                for &i in &open {
                    out[i] += share;
                }
            }
        }
    }
    Redistribution {
        amounts: out,
        capped,
        surplus,
        passes,
    }
}

/// Splits `total` in proportion to the predicted maxima.
pub fn proportional_allocation(predicted: &[f64], total: f64) -> Result<Vec<f64>, ForecastError> {
    Ok(ideal_allocation(&ideal_weights(predicted)?, total))
}

/// Knobs a solve request may override on top of the scenario config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub level: Level,
    pub redistribution: RedistributionPolicy,
    /// Use each region's stored `predicted` value instead of forecasting.
    pub use_fixture_predicted: bool,
}

impl SolveOptions {
    pub fn from_scenario(scenario: &Scenario) -> Self {
        Self {
            level: scenario.config.level,
            redistribution: scenario.config.redistribution,
            use_fixture_predicted: false,
        }
    }
}

fn predicted_maxima(
    scenario: &Scenario,
    options: &SolveOptions,
    mode: Execution,
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>, PipelineError> {
    if options.use_fixture_predicted {
        return scenario
            .regions
            .iter()
            .map(|r| r.predicted.ok_or_else(|| PipelineError::MissingPrediction(r.name.clone())))
            .collect();
    }
    let cfg = &scenario.config;
    let results = forecast_all(&scenario.regions, cfg.horizon, cfg.smoothing, mode);
    let mut maxima = Vec::with_capacity(results.len());
    for (region, result) in scenario.regions.iter().zip(results) {
        let (forecast, warning) = result.map_err(|source| PipelineError::Forecast {
            region: region.name.clone(),
            source,
        })?;
        warnings.extend(warning);
        maxima.push(forecast.horizon_max);
    }
    Ok(maxima)
}

fn amounts_for(names: &[&str], idx: &[usize], values: impl Fn(usize) -> f64) -> Vec<RegionAmount> {
    idx.iter().map(|&i| RegionAmount::new(names[i], values(i))).collect()
}

fn empty_plan(scenario: &Scenario, options: &SolveOptions) -> AllocationPlan {
    AllocationPlan {
        schema: PLAN_SCHEMA.to_owned(),
        level: options.level,
        redistribution: options.redistribution,
        regions: scenario
            .regions
            .iter()
            .map(|r| RegionDemand {
                name: r.name.clone(),
                demand: r.demand,
                severity: r.severity,
            })
            .collect(),
        predicted: Vec::new(),
        stage_ideal: Vec::new(),
        stage_prepass: PrepassStage {
            satisfied: Vec::new(),
            remaining_supply: scenario.supply,
            balance_demand: scenario.regions.iter().map(|r| r.demand).sum(),
        },
        stage_optimized: None,
        capped: Vec::new(),
        stage_final: Vec::new(),
        surplus: 0.0,
        conservation_total: scenario.supply,
        warnings: Vec::new(),
    }
}

fn check_valid(scenario: &Scenario) -> Result<(), PipelineError> {
    let violations = validate_scenario(scenario);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(PipelineError::Invalid(
            violations.iter().map(ToString::to_string).collect(),
        ))
    }
}

/// Runs the center-level procedure on a scenario.
pub fn run_center_pipeline(
    scenario: &Scenario,
    options: &SolveOptions,
    mode: Execution,
) -> Result<AllocationPlan, PipelineError> {
    check_valid(scenario)?;
    let mut plan = empty_plan(scenario, options);
    let regions = &scenario.regions;
    let names: Vec<&str> = regions.iter().map(|r| r.name.as_str()).collect();
    let demands: Vec<f64> = regions.iter().map(|r| r.demand).collect();
    let severities: Vec<f64> = regions.iter().map(|r| r.severity).collect();
    let total = scenario.supply;
    let n = regions.len();

    let predicted = predicted_maxima(scenario, options, mode, &mut plan.warnings)?;
    let ideals = ideal_allocation(&ideal_weights(&predicted)?, total);
    plan.predicted = amounts_for(&names, &(0..n).collect::<Vec<_>>(), |i| predicted[i]);
    plan.stage_ideal = amounts_for(&names, &(0..n).collect::<Vec<_>>(), |i| ideals[i]);
    for (i, r) in regions.iter().enumerate() {
        if r.demand == 0.0 {
            plan.warnings
                .push(format!("{}: zero demand, excluded from optimization", r.name));
        } else if predicted[i] == 0.0 {
            plan.warnings.push(format!(
                "{}: zero predicted demand, served only from leftover supply",
                r.name
            ));
        }
    }

    let mut prepass = prepass_full_allocation(&demands, &ideals, total)?;
    let reopt_shares: Vec<f64> = match &scenario.config.reopt_weights {
        Some(weights) => {
            let missing: Vec<&str> = prepass
                .remaining
                .iter()
                .map(|&i| names[i])
                .filter(|name| !weights.contains_key(*name))
                .collect();
            if missing.is_empty() {
                (0..n)
                    .map(|i| {
                        if prepass.satisfied.contains(&i) {
                            0.0
                        } else {
                            weights[names[i]]
                        }
                    })
                    .collect()
            } else {
                plan.warnings.push(format!(
                    "re-optimization weights missing for {}; using predicted shares",
                    missing.join(", ")
                ));
                predicted.clone()
            }
        }
        None => predicted.clone(),
    };

    if scenario.config.reevaluate_prepass {
        loop {
            let share_sum: f64 = prepass.remaining.iter().map(|&i| reopt_shares[i]).sum();
            if share_sum <= 0.0 {
                break;
            }
            let newly: Vec<usize> = prepass
                .remaining
                .iter()
                .copied()
                .filter(|&i| {
                    demands[i] <= prepass.remaining_supply * reopt_shares[i] / share_sum
                })
                .collect();
            if newly.is_empty() {
                break;
            }
            for &i in &newly {
                prepass.remaining_supply -= demands[i];
                prepass.balance_demand -= demands[i];
            }
            prepass.satisfied.extend(&newly);
            prepass.satisfied.sort_unstable();
            prepass.remaining.retain(|i| !newly.contains(i));
        }
    }

    let mut finals = vec![0.0; n];
    for &i in &prepass.satisfied {
        finals[i] = demands[i];
    }
    let remaining_supply = prepass.remaining_supply;
    plan.stage_prepass = PrepassStage {
        satisfied: amounts_for(&names, &prepass.satisfied, |i| demands[i]),
        remaining_supply,
        balance_demand: prepass.balance_demand,
    };

    let (optimizable, zero_share): (Vec<usize>, Vec<usize>) = prepass
        .remaining
        .iter()
        .partition(|&&i| reopt_shares[i] > 0.0);

    let mut surplus = remaining_supply;
    if !optimizable.is_empty() && remaining_supply > 0.0 {
        let pick = |v: &[f64]| optimizable.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let sub_demands = pick(&demands);
        let sub_shares = pick(&reopt_shares);
        let sub_severities = pick(&severities);
        let (sub_ideals, result) = reoptimize_remaining(
            &sub_demands,
            Ideals::Shares(&sub_shares),
            &sub_severities,
            remaining_supply,
        )?;
        let problem = AllocationProblem::new(
            sub_demands.clone(),
            sub_ideals.clone(),
            sub_severities,
            remaining_supply,
        )
        .map_err(crate::error::SolverError::from)?;
        let kkt_residual = lagrangian_residual(&problem, &result);

        let redistribution = cap_and_redistribute(&result.amounts, &sub_demands, options.redistribution);
        for (k, &i) in optimizable.iter().enumerate() {
            finals[i] = redistribution.amounts[k];
        }
        plan.capped = redistribution
            .capped
            .iter()
            .map(|&k| names[optimizable[k]].to_owned())
            .collect();
        surplus = redistribution.surplus;
        plan.stage_optimized = Some(OptimizedStage {
            regions: optimizable.iter().map(|&i| names[i].to_owned()).collect(),
            ideals: sub_ideals,
            result,
            kkt_residual,
        });
    }

    // Regions with no predicted demand only see what nobody else could take.
    let zero_demand: f64 = zero_share.iter().map(|&i| demands[i]).sum();
    if surplus > 0.0 && zero_demand > 0.0 {
        let pot = surplus;
        for &i in &zero_share {
            let give = demands[i].min(pot * demands[i] / zero_demand);
            finals[i] = give;
            surplus -= give;
        }
    }

    plan.surplus = surplus.max(0.0);
    plan.stage_final = amounts_for(&names, &(0..n).collect::<Vec<_>>(), |i| finals[i]);
    Ok(plan)
}

fn run_district(scenario: &Scenario, options: &SolveOptions) -> Result<AllocationPlan, PipelineError> {
    check_valid(scenario)?;
    let mut plan = empty_plan(scenario, options);
    let names: Vec<&str> = scenario.regions.iter().map(|r| r.name.as_str()).collect();
    let served: Vec<usize> = (0..names.len())
        .filter(|&i| scenario.regions[i].demand > 0.0)
        .collect();
    let mut finals = vec![0.0; names.len()];
    let mut surplus = scenario.supply;
    if !served.is_empty() {
        let demands: Vec<f64> = served.iter().map(|&i| scenario.regions[i].demand).collect();
        let severities: Vec<f64> = served.iter().map(|&i| scenario.regions[i].severity).collect();
        let problem = DistrictProblem::new(demands.clone(), severities, scenario.supply)
            .map_err(crate::error::SolverError::from)?;
        let result = solve_district_allocation(&problem)?;
        let kkt_residual = lagrangian_residual(&problem, &result);
        let redistribution = cap_and_redistribute(&result.amounts, &demands, options.redistribution);
        for (k, &i) in served.iter().enumerate() {
            finals[i] = redistribution.amounts[k];
        }
        plan.capped = redistribution
            .capped
            .iter()
            .map(|&k| names[served[k]].to_owned())
            .collect();
        surplus = redistribution.surplus;
        plan.stage_optimized = Some(OptimizedStage {
            regions: served.iter().map(|&i| names[i].to_owned()).collect(),
            ideals: Vec::new(),
            result,
            kkt_residual,
        });
    }
    plan.surplus = surplus;
    plan.stage_final = amounts_for(&names, &(0..names.len()).collect::<Vec<_>>(), |i| finals[i]);
    Ok(plan)
}

fn run_proportional(
    scenario: &Scenario,
    options: &SolveOptions,
    mode: Execution,
) -> Result<AllocationPlan, PipelineError> {
    check_valid(scenario)?;
    let mut plan = empty_plan(scenario, options);
    let names: Vec<&str> = scenario.regions.iter().map(|r| r.name.as_str()).collect();
    let all: Vec<usize> = (0..names.len()).collect();
    let predicted = predicted_maxima(scenario, options, mode, &mut plan.warnings)?;
    let amounts = proportional_allocation(&predicted, scenario.supply)?;
    plan.predicted = amounts_for(&names, &all, |i| predicted[i]);
    plan.stage_ideal = amounts_for(&names, &all, |i| amounts[i]);
    plan.stage_final = plan.stage_ideal.clone();
    Ok(plan)
}

/// Runs whichever level `options` selects. This is the single entry point
/// shared by the CLI and the HTTP service.
pub fn run_scenario(
    scenario: &Scenario,
    options: &SolveOptions,
    mode: Execution,
) -> Result<AllocationPlan, PipelineError> {
    match options.level {
        Level::Center => run_center_pipeline(scenario, options, mode),
        Level::District => run_district(scenario, options),
        Level::Proportional => run_proportional(scenario, options, mode),
    }
}

/// Re-solves the same scenario at each supply level (what-if sweep).
pub fn supply_sweep(
    scenario: &Scenario,
    supplies: &[f64],
    options: &SolveOptions,
    mode: Execution,
) -> Vec<Result<AllocationPlan, PipelineError>> {
    exec::map(mode, supplies, |&supply| {
        let mut s = scenario.clone();
        s.supply = supply;
        // Per-sweep-point work stays sequential; the sweep itself fans out.
        run_scenario(&s, options, Execution::Sequential)
    })
}

/// Solves many center problems at once.
pub fn solve_batch(
    problems: &[AllocationProblem],
    mode: Execution,
) -> Vec<Result<SolverResult, crate::error::SolverError>> {
    exec::map(mode, problems, solve_center_allocation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RegionRecord, ScenarioConfig};
    use approx::assert_abs_diff_eq;

    fn scenario(regions: Vec<RegionRecord>, supply: f64) -> Scenario {
        Scenario {
            id: None,
            name: "t".into(),
            resource_name: "oxygen".into(),
            supply,
            regions,
            config: ScenarioConfig::default(),
            revision: 0,
        }
    }

    const FIXTURE: SolveOptions = SolveOptions {
        level: Level::Center,
        redistribution: RedistributionPolicy::Proportional,
        use_fixture_predicted: true,
    };

    #[test]
    fn prepass_edge_cases() {
        let p = prepass_full_allocation(&[10.0, 20.0], &[5.0, 5.0], 10.0).unwrap();
        assert!(p.satisfied.is_empty());
        assert_eq!(p.remaining_supply, 10.0);
        assert_eq!(p.balance_demand, 30.0);

        let p = prepass_full_allocation(&[1.0, 2.0], &[5.0, 5.0], 10.0).unwrap();
        assert_eq!(p.satisfied, vec![0, 1]);
        assert_eq!(p.remaining_supply, 7.0);
        assert_eq!(p.balance_demand, 0.0);

        assert!(matches!(
            prepass_full_allocation(&[8.0, 8.0], &[9.0, 9.0], 10.0),
            Err(PipelineError::SupplyExhausted { .. })
        ));
    }

    #[test]
    fn reoptimize_single_and_symmetric() {
        let (_, r) = reoptimize_remaining(&[50.0], Ideals::Shares(&[3.0]), &[1.0], 20.0).unwrap();
        assert_abs_diff_eq!(r.amounts[0], 20.0, epsilon = 1e-9);
        let (ideals, r) =
            reoptimize_remaining(&[40.0; 3], Ideals::Shares(&[7.0; 3]), &[2.0; 3], 30.0).unwrap();
        assert_eq!(ideals, vec![10.0; 3]);
        for x in r.amounts {
            assert_abs_diff_eq!(x, 10.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn cap_examples() {
        let r = cap_and_redistribute(&[10.0, 20.0], &[15.0, 25.0], RedistributionPolicy::Equal);
        assert_eq!(r.amounts, vec![10.0, 20.0]);
        assert_eq!(r.passes, 0);

        let r = cap_and_redistribute(&[10.0, 20.0], &[5.0, 5.0], RedistributionPolicy::Proportional);
        assert_eq!(r.amounts, vec![5.0, 5.0]);
        assert_abs_diff_eq!(r.surplus, 20.0);

        // 30 excess split evenly vs. 2:1 between the open regions.
        let eq = cap_and_redistribute(&[60.0, 20.0, 10.0], &[30.0, 100.0, 100.0], RedistributionPolicy::Equal);
        assert_eq!(eq.amounts, vec![30.0, 35.0, 25.0]);
        let pr = cap_and_redistribute(
            &[60.0, 20.0, 10.0],
            &[30.0, 100.0, 100.0],
            RedistributionPolicy::Proportional,
        );
        assert_eq!(pr.amounts, vec![30.0, 40.0, 20.0]);
        assert_eq!(pr.capped, vec![0]);
    }

    #[test]
    fn cascading_caps() {
        let r = cap_and_redistribute(&[50.0, 9.0, 1.0], &[10.0, 10.0, 100.0], RedistributionPolicy::Equal);
        assert_eq!(r.capped, vec![0, 1]);
        assert_eq!(r.amounts, vec![10.0, 10.0, 40.0]);
        assert_eq!(r.passes, 2);
    }

    #[test]
    fn proportional_examples() {
        assert_eq!(proportional_allocation(&[2.0, 1.0, 1.0], 100.0).unwrap(), vec![50.0, 25.0, 25.0]);
        assert_eq!(proportional_allocation(&[4.0], 9.0).unwrap(), vec![9.0]);
        assert!(proportional_allocation(&[0.0, 0.0], 9.0).is_err());
    }

    #[test]
    fn single_region_gets_min_of_demand_and_supply() {
        for (demand, supply) in [(100.0, 40.0), (40.0, 100.0)] {
            let s = scenario(vec![RegionRecord::new("Solo", demand).with_predicted(5.0)], supply);
            let plan = run_scenario(&s, &FIXTURE, Execution::Sequential).unwrap();
            assert_abs_diff_eq!(plan.stage_final[0].amount, demand.min(supply), epsilon = 1e-9);
            assert_abs_diff_eq!(plan.surplus, (supply - demand).max(0.0), epsilon = 1e-9);
            assert!(plan.is_conserved(1e-9));
        }
    }

    #[test]
    fn abundant_supply_meets_all_demand() {
        let s = scenario(
            vec![
                RegionRecord::new("A", 10.0).with_predicted(100.0),
                RegionRecord::new("B", 20.0).with_predicted(200.0),
            ],
            90.0,
        );
        let plan = run_scenario(&s, &FIXTURE, Execution::Sequential).unwrap();
        assert_eq!(plan.final_amount("A"), Some(10.0));
        assert_eq!(plan.final_amount("B"), Some(20.0));
        assert_abs_diff_eq!(plan.surplus, 60.0);
        assert!(plan.stage_optimized.is_none());
    }

    #[test]
    fn zero_demand_and_zero_prediction_regions() {
        let s = scenario(
            vec![
                RegionRecord::new("Big", 100.0).with_predicted(10.0),
                RegionRecord::new("Idle", 0.0).with_predicted(10.0),
                RegionRecord::new("Unseen", 30.0).with_predicted(0.0),
            ],
            60.0,
        );
        let plan = run_scenario(&s, &FIXTURE, Execution::Sequential).unwrap();
        assert_eq!(plan.final_amount("Idle"), Some(0.0));
        assert_abs_diff_eq!(plan.final_amount("Big").unwrap(), 60.0, epsilon = 1e-9);
        assert_eq!(plan.final_amount("Unseen"), Some(0.0));
        assert_eq!(plan.warnings.len(), 2);

        // With more supply than Big wants, the leftover reaches Unseen.
        let mut rich = s.clone();
        rich.supply = 120.0;
        let plan = run_scenario(&rich, &FIXTURE, Execution::Sequential).unwrap();
        assert_abs_diff_eq!(plan.final_amount("Big").unwrap(), 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(plan.final_amount("Unseen").unwrap(), 20.0, epsilon = 1e-9);
        assert!(plan.is_conserved(1e-9));
    }

    #[test]
    fn missing_prediction_is_a_forecast_stage_error() {
        let s = scenario(vec![RegionRecord::new("A", 10.0)], 5.0);
        let err = run_scenario(&s, &FIXTURE, Execution::Sequential).unwrap_err();
        assert_eq!(err.stage(), crate::error::Stage::Forecast);
        let err = run_scenario(&s, &SolveOptions::default(), Execution::Sequential).unwrap_err();
        assert!(err.to_string().contains("insufficient history"));
    }

    #[test]
    fn partial_reopt_weights_fall_back_to_predicted() {
        let regions = vec![
            RegionRecord::new("A", 100.0).with_predicted(1.0),
            RegionRecord::new("B", 100.0).with_predicted(3.0),
        ];
        let mut s = scenario(regions, 50.0);
        let plain = run_scenario(&s, &FIXTURE, Execution::Sequential).unwrap();
        s.config.reopt_weights = Some([("A".to_string(), 3.0)].into_iter().collect());
        let plan = run_scenario(&s, &FIXTURE, Execution::Sequential).unwrap();
        assert_eq!(plan.stage_final, plain.stage_final);
        assert!(plan.warnings.iter().any(|w| w.contains("missing for B")));
    }

    #[test]
    fn reevaluated_prepass_admits_more_regions() {
        // After A and B are granted, C's renormalised ideal covers its demand.
        let regions = vec![
            RegionRecord::new("A", 10.0).with_predicted(30.0),
            RegionRecord::new("B", 50.0).with_predicted(30.0),
            RegionRecord::new("C", 32.0).with_predicted(30.0),
            RegionRecord::new("D", 200.0).with_predicted(10.0),
        ];
        let mut s = scenario(regions, 100.0);
        let once = run_scenario(&s, &FIXTURE, Execution::Sequential).unwrap();
        assert_eq!(once.stage_prepass.satisfied.len(), 1);
        s.config.reevaluate_prepass = true;
        let again = run_scenario(&s, &FIXTURE, Execution::Sequential).unwrap();
        let names: Vec<_> = again.stage_prepass.satisfied.iter().map(|r| r.region.as_str()).collect();
        assert_eq!(names, vec!["A", "C"]);
        assert!(again.is_conserved(1e-9));
    }

    #[test]
    fn district_level_plan() {
        let s = scenario(
            vec![
                RegionRecord::new("H1", 30.0),
                RegionRecord::new("H2", 20.0),
                RegionRecord::new("H3", 10.0),
            ],
            50.0,
        );
        let options = SolveOptions {
            level: Level::District,
            ..SolveOptions::default()
        };
        let plan = run_scenario(&s, &options, Execution::Sequential).unwrap();
        let opt = plan.stage_optimized.as_ref().unwrap();
        assert_abs_diff_eq!(opt.result.multiplier, 5.0 / 7.0, epsilon = 1e-12);
        assert!(opt.kkt_residual < 1e-9);
        assert_abs_diff_eq!(plan.final_amount("H1").unwrap(), 23.571, epsilon = 1e-3);
        assert!(plan.is_conserved(1e-9));
    }

    #[test]
    fn sweep_modes_agree() {
        let s = scenario(
            vec![
                RegionRecord::new("A", 100.0).with_predicted(40.0),
                RegionRecord::new("B", 60.0).with_predicted(10.0),
                RegionRecord::new("C", 5.0).with_predicted(30.0),
            ],
            50.0,
        );
        let supplies: Vec<f64> = (1..40).map(|k| k as f64 * 5.0).collect();
        let seq = supply_sweep(&s, &supplies, &FIXTURE, Execution::Sequential);
        let par = supply_sweep(&s, &supplies, &FIXTURE, Execution::Parallel);
        assert_eq!(seq, par);
        for (plan, supply) in seq.iter().zip(&supplies) {
            let plan = plan.as_ref().unwrap();
            assert_abs_diff_eq!(plan.final_sum() + plan.surplus, *supply, epsilon = 1e-9);
        }
    }
}
