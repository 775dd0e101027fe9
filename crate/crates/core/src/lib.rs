//! Hierarchical allocation of a scarce resource from a central authority to
//! regions, and from regions to facilities.
//!
//! Each region's share blends its declared demand with an ideal share driven
//! by forecast active cases, solved in closed form as an equality-constrained
//! quadratic program. The [`pipeline`] module strings the steps together into
//! a staged [`AllocationPlan`].

pub mod error;
pub mod exec;
pub mod forecast;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod solver;

pub use error::{ForecastError, ModelError, PipelineError, SolverError, Stage};
pub use exec::Execution;
pub use forecast::{fit_forecast, ideal_allocation, ideal_weights, ForecastResult};
pub use model::{
    validate_scenario, AllocationPlan, AllocationProblem, DistrictProblem, HistoryPoint, Level,
    RedistributionPolicy, RegionAmount, RegionRecord, Scenario, ScenarioConfig, SmoothingParams,
    SolverResult, Violation, PLAN_SCHEMA,
};
pub use oracle::{oracle_solve, OracleSettings};
pub use pipeline::{
    cap_and_redistribute, prepass_full_allocation, proportional_allocation, reoptimize_remaining,
    run_center_pipeline, run_scenario, SolveOptions,
};
pub use solver::{
    lagrangian_residual, solve_center_allocation, solve_district_allocation, QuadraticObjective,
};
