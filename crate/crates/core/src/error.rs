use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("empty problem")]
    Empty,
    #[error("length mismatch: {demands} demands, {ideals} ideals, {severities} severities")]
    LengthMismatch {
        demands: usize,
        ideals: usize,
        severities: usize,
    },
    #[error("{field} must be > 0 (index {index})")]
    NonPositive { field: &'static str, index: usize },
    #[error("total must be > 0, got {0}")]
    NonPositiveTotal(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForecastError {
    #[error("insufficient history: {0} point(s), need at least 2")]
    InsufficientHistory(usize),
    #[error("horizon must be >= 1")]
    ZeroHorizon,
    #[error("smoothing factor {name} must lie in (0, 1], got {value}")]
    BadSmoothing { name: &'static str, value: f64 },
    #[error("no predicted demand: every predicted maximum is zero")]
    NoPredictedDemand,
    #[error("predicted maximum at index {0} is negative or not finite")]
    NegativePrediction(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("oracle did not converge in {steps} steps (residual {residual:e})")]
    NoConvergence {
        steps: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },
}

/// Pipeline step an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Validate,
    Forecast,
    Ideal,
    Prepass,
    Reoptimize,
    Redistribute,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Validate => "validate",
            Stage::Forecast => "forecast",
            Stage::Ideal => "ideal",
            Stage::Prepass => "prepass",
            Stage::Reoptimize => "reoptimize",
            Stage::Redistribute => "redistribute",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("forecast failed for {region}: {source}")]
    Forecast {
        region: String,
        #[source]
        source: ForecastError,
    },
    #[error(transparent)]
    Weights(#[from] ForecastError),
    #[error("supply exhausted by pre-pass: satisfied demand {satisfied} exceeds supply {supply}")]
    SupplyExhausted { satisfied: f64, supply: f64 },
    #[error("region {0} has no predicted value")]
    MissingPrediction(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Invalid(_) => Stage::Validate,
            PipelineError::Forecast { .. } | PipelineError::MissingPrediction(_) => Stage::Forecast,
            PipelineError::Weights(_) => Stage::Ideal,
            PipelineError::SupplyExhausted { .. } => Stage::Prepass,
            PipelineError::Solver(_) => Stage::Reoptimize,
        }
    }

    /// True when the failure comes from the data rather than the solve.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            PipelineError::Invalid(_)
                | PipelineError::Forecast { .. }
                | PipelineError::MissingPrediction(_)
        )
    }
}
