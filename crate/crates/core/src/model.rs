//! Domain types shared by the forecaster, the solvers and the pipeline.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Version tag written into every serialized [`AllocationPlan`].
pub const PLAN_SCHEMA: &str = "alloc-plan/1";

/// Tolerance on `Σ α = 1` for every solver result.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// Relative tolerance used by the conservation checks on a plan.
pub const CONSERVATION_REL_TOL: f64 = 1e-6;

/// One observation of the active-case count of a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub date: NaiveDate,
    pub active: u64,
}

fn default_severity() -> f64 {
    1.0
}

/// One allocatable unit: a state, a district or a hospital.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub name: String,
    /// Declared demand in the scenario's resource unit.
    pub demand: f64,
    /// Criticality weight. The case study uses 1.0 everywhere.
    #[serde(default = "default_severity")]
    pub severity: f64,
    #[serde(default)]
    pub history: Vec<HistoryPoint>,
    /// Externally supplied horizon maximum of predicted active cases. Used
    /// instead of the forecaster when a solve asks for fixture predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<f64>,
}

impl RegionRecord {
    pub fn new(name: impl Into<String>, demand: f64) -> Self {
        Self {
            name: name.into(),
            demand,
            severity: 1.0,
            history: Vec::new(),
            predicted: None,
        }
    }

    pub fn with_severity(mut self, severity: f64) -> Self {
        self.severity = severity;
        self
    }

    pub fn with_history(mut self, history: Vec<HistoryPoint>) -> Self {
        self.history = history;
        self
    }

    pub fn with_predicted(mut self, predicted: f64) -> Self {
        self.predicted = Some(predicted);
        self
    }
}

/// Which allocation rule a solve applies to the scenario's regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// Demand blended with forecast-driven ideal shares, with pre-pass and capping.
    #[default]
    Center,
    /// Demand-only quadratic allocation (district to hospitals).
    District,
    /// Pure share of predicted active cases.
    Proportional,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Center => "center",
            Level::District => "district",
            Level::Proportional => "proportional",
        })
    }
}

/// How the excess pooled from capped regions is handed out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RedistributionPolicy {
    Equal,
    #[default]
    Proportional,
}

impl fmt::Display for RedistributionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RedistributionPolicy::Equal => "equal",
            RedistributionPolicy::Proportional => "proportional",
        })
    }
}

/// Level and trend smoothing factors of the forecaster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub level: f64,
    pub trend: f64,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self {
            level: 0.8,
            trend: 0.2,
        }
    }
}

fn default_horizon() -> usize {
    7
}

/// Per-scenario knobs. Every field has a default so partial JSON is accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub smoothing: SmoothingParams,
    pub level: Level,
    pub redistribution: RedistributionPolicy,
    /// Re-run the pre-pass after renormalising ideals over the remainder.
    pub reevaluate_prepass: bool,
    /// Shares used for the ideal allocation of the re-optimization stage
    /// instead of the predicted maxima. Renormalised over whichever regions
    /// remain after the pre-pass.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reopt_weights: Option<BTreeMap<String, f64>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            smoothing: SmoothingParams::default(),
            level: Level::default(),
            redistribution: RedistributionPolicy::default(),
            reevaluate_prepass: false,
            reopt_weights: None,
        }
    }
}

/// A named, editable bundle of regions and supply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub id: Option<u64>,
    pub name: String,
    #[serde(default)]
    pub resource_name: String,
    pub supply: f64,
    pub regions: Vec<RegionRecord>,
    #[serde(default)]
    pub config: ScenarioConfig,
    #[serde(default)]
    pub revision: u64,
}

/// One failed invariant, tied to a region when it concerns one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.region {
            Some(region) => write!(f, "{region}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

fn violation(region: Option<&str>, field: &str, message: impl Into<String>) -> Violation {
    Violation {
        region: region.map(str::to_owned),
        field: field.to_owned(),
        message: message.into(),
    }
}

/// Checks a single region's invariants.
pub fn validate_region(region: &RegionRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let name = Some(region.name.as_str());
    if region.name.trim().is_empty() {
        out.push(violation(None, "name", "region name must not be empty"));
    }
    if !(region.demand.is_finite() && region.demand >= 0.0) {
        out.push(violation(name, "demand", "demand must be >= 0"));
    }
    if !(region.severity.is_finite() && region.severity > 0.0) {
        out.push(violation(name, "severity", "severity must be > 0"));
    }
    if let Some(p) = region.predicted {
        if !(p.is_finite() && p >= 0.0) {
            out.push(violation(name, "predicted", "predicted must be >= 0"));
        }
    }
    if region.history.windows(2).any(|w| w[0].date >= w[1].date) {
        out.push(violation(
            name,
            "history",
            "history dates must be strictly increasing",
        ));
    }
    out
}

/// Lists every broken invariant of a scenario. Empty means valid.
pub fn validate_scenario(scenario: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(scenario.supply.is_finite() && scenario.supply > 0.0) {
        out.push(violation(None, "supply", "supply must be > 0"));
    }
    if scenario.config.horizon < 1 {
        out.push(violation(None, "horizon", "horizon must be >= 1"));
    }
    let s = scenario.config.smoothing;
    if !(s.level > 0.0 && s.level <= 1.0) {
        out.push(violation(None, "smoothing.level", "must lie in (0, 1]"));
    }
    if !(s.trend > 0.0 && s.trend <= 1.0) {
        out.push(violation(None, "smoothing.trend", "must lie in (0, 1]"));
    }
    let mut seen = HashSet::new();
    for region in &scenario.regions {
        if !seen.insert(region.name.as_str()) {
            out.push(violation(
                Some(&region.name),
                "name",
                format!("duplicate region name \"{}\"", region.name),
            ));
        }
        out.extend(validate_region(region));
    }
    if let Some(weights) = &scenario.config.reopt_weights {
        for (name, w) in weights {
            if !(w.is_finite() && *w > 0.0) {
                out.push(violation(Some(name), "reopt_weights", "weight must be > 0"));
            }
        }
    }
    out
}

/// Input of the center-to-region quadratic allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    demands: Vec<f64>,
    ideals: Vec<f64>,
    severities: Vec<f64>,
    total: f64,
}

fn check_positive(field: &'static str, values: &[f64]) -> Result<(), ModelError> {
    match values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        Some(index) => Err(ModelError::NonPositive { field, index }),
        None => Ok(()),
    }
}

impl AllocationProblem {
    pub fn new(
        demands: Vec<f64>,
        ideals: Vec<f64>,
        severities: Vec<f64>,
        total: f64,
    ) -> Result<Self, ModelError> {
        let n = demands.len();
        if n == 0 {
            return Err(ModelError::Empty);
        }
        if ideals.len() != n || severities.len() != n {
            return Err(ModelError::LengthMismatch {
                demands: n,
                ideals: ideals.len(),
                severities: severities.len(),
            });
        }
        check_positive("demand", &demands)?;
        check_positive("ideal", &ideals)?;
        check_positive("severity", &severities)?;
        if !(total.is_finite() && total > 0.0) {
            return Err(ModelError::NonPositiveTotal(total));
        }
        Ok(Self {
            demands,
            ideals,
            severities,
            total,
        })
    }

    /// Same problem with unit severities.
    pub fn uniform(demands: Vec<f64>, ideals: Vec<f64>, total: f64) -> Result<Self, ModelError> {
        let severities = vec![1.0; demands.len()];
        Self::new(demands, ideals, severities, total)
    }

    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    pub fn demands(&self) -> &[f64] {
        &self.demands
    }

    pub fn ideals(&self) -> &[f64] {
        &self.ideals
    }

    pub fn severities(&self) -> &[f64] {
        &self.severities
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

/// Input of the district-to-hospital demand-only allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct DistrictProblem {
    demands: Vec<f64>,
    severities: Vec<f64>,
    total: f64,
}

impl DistrictProblem {
    pub fn new(demands: Vec<f64>, severities: Vec<f64>, total: f64) -> Result<Self, ModelError> {
        let n = demands.len();
        if n == 0 {
            return Err(ModelError::Empty);
        }
        if severities.len() != n {
            return Err(ModelError::LengthMismatch {
                demands: n,
                ideals: n,
                severities: severities.len(),
            });
        }
        check_positive("demand", &demands)?;
        check_positive("severity", &severities)?;
        if !(total.is_finite() && total > 0.0) {
            return Err(ModelError::NonPositiveTotal(total));
        }
        Ok(Self {
            demands,
            severities,
            total,
        })
    }

    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    pub fn demands(&self) -> &[f64] {
        &self.demands
    }

    pub fn severities(&self) -> &[f64] {
        &self.severities
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

/// Optimal fractions, multiplier and amounts returned by every solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub fractions: Vec<f64>,
    pub multiplier: f64,
    pub amounts: Vec<f64>,
    /// Indices clamped to zero by the nonnegativity loop, ascending.
    pub active_set: Vec<usize>,
}

impl SolverResult {
    pub fn fraction_sum(&self) -> f64 {
        self.fractions.iter().sum()
    }
}

/// A region paired with an amount, the row type of every plan stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAmount {
    pub region: String,
    pub amount: f64,
}

impl RegionAmount {
    pub fn new(region: impl Into<String>, amount: f64) -> Self {
        Self {
            region: region.into(),
            amount,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepassStage {
    pub satisfied: Vec<RegionAmount>,
    pub remaining_supply: f64,
    pub balance_demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizedStage {
    pub regions: Vec<String>,
    /// Ideal amounts fed to the solver, aligned with `regions`.
    pub ideals: Vec<f64>,
    pub result: SolverResult,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDemand {
    pub name: String,
    pub demand: f64,
    pub severity: f64,
}

/// Staged outcome of one allocation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub schema: String,
    pub level: Level,
    pub redistribution: RedistributionPolicy,
    pub regions: Vec<RegionDemand>,
    /// Predicted horizon maxima that drove the ideal shares (empty for the
    /// district level).
    pub predicted: Vec<RegionAmount>,
    pub stage_ideal: Vec<RegionAmount>,
    pub stage_prepass: PrepassStage,
    pub stage_optimized: Option<OptimizedStage>,
    /// Regions clamped to their demand by cap-and-redistribute.
    pub capped: Vec<String>,
    pub stage_final: Vec<RegionAmount>,
    /// Supply that could not be placed because every region hit its demand.
    pub surplus: f64,
    pub conservation_total: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl AllocationPlan {
    pub fn final_amount(&self, region: &str) -> Option<f64> {
        self.stage_final
            .iter()
            .find(|r| r.region == region)
            .map(|r| r.amount)
    }

    pub fn final_sum(&self) -> f64 {
        self.stage_final.iter().map(|r| r.amount).sum()
    }

    /// `|Σ final + surplus − T| ≤ tol · T`.
    pub fn is_conserved(&self, rel_tol: f64) -> bool {
        let total = self.conservation_total;
        (self.final_sum() + self.surplus - total).abs() <= rel_tol * total.abs().max(1.0)
    }
}
