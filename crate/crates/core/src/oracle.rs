//! Iterative reference solver used to check the closed forms.
//!
//! Accelerated projected gradient descent (FISTA with gradient-based
//! restart) on the probability simplex `{α : Σα = 1, α ≥ 0}`. It only
//! touches the objective through [`QuadraticObjective::gradient`], so it
//! shares no algebra with the closed-form path.

use std::cmp::Ordering;

use crate::error::SolverError;
use crate::exec::{self, Execution};
use crate::model::SolverResult;
use crate::solver::QuadraticObjective;

/// Oracle agreement tolerance on fractions.
pub const ORACLE_AGREEMENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    pub max_steps: usize,
    /// Stop once the projected step `‖α − P(α − ∇J/L)‖∞` drops below this.
    pub tolerance: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            max_steps: 2_000_000,
            tolerance: 1e-15,
        }
    }
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

fn gradient_step<P: QuadraticObjective + ?Sized>(problem: &P, point: &[f64], step: f64) -> Vec<f64> {
    let grad = problem.gradient(point);
    let moved: Vec<f64> = point.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
    project_simplex(&moved)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Minimises `problem` over the simplex.
pub fn oracle_solve<P: QuadraticObjective + ?Sized>(
    problem: &P,
    settings: OracleSettings,
) -> Result<SolverResult, SolverError> {
    let n = problem.len();
    if n == 0 {
        return Err(crate::error::ModelError::Empty.into());
    }
    let step = 1.0 / problem.lipschitz();
    let mut x = vec![1.0 / n as f64; n];
    let mut y = x.clone();
    let mut momentum = 1.0_f64;
    let mut residual = f64::INFINITY;

    for _ in 0..settings.max_steps {
        let next = gradient_step(problem, &y, step);

        // Restart when the momentum direction opposes the gradient mapping.
        let restart = y
            .iter()
            .zip(&next)
            .zip(&x)
            .map(|((yi, ni), xi)| (yi - ni) * (ni - xi))
            .sum::<f64>()
            > 0.0;
        let (next_momentum, beta) = if restart {
            (1.0, 0.0)
        } else {
            let t = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
            (t, (momentum - 1.0) / t)
        };
        y = next
            .iter()
            .zip(&x)
            .map(|(ni, xi)| ni + beta * (ni - xi))
            .collect();
        x = next;
        momentum = next_momentum;

        residual = max_abs_diff(&x, &gradient_step(problem, &x, step));
        if residual < settings.tolerance {
            return Ok(finish(problem, x));
        }
    }
    Err(SolverError::NoConvergence {
        steps: settings.max_steps,
        residual,
        last_iterate: x,
    })
}

fn finish<P: QuadraticObjective + ?Sized>(problem: &P, fractions: Vec<f64>) -> SolverResult {
    let grad = problem.gradient(&fractions);
    let active_set: Vec<usize> = (0..fractions.len()).filter(|&i| fractions[i] == 0.0).collect();
    let free: Vec<f64> = (0..fractions.len())
        .filter(|i| active_set.binary_search(i).is_err())
        .map(|i| -grad[i])
        .collect();
    let multiplier = free.iter().sum::<f64>() / free.len().max(1) as f64;
    let total = problem.total();
    let amounts = fractions.iter().map(|a| a * total).collect();
    SolverResult {
        fractions,
        multiplier,
        amounts,
        active_set,
    }
}

/// Runs the oracle over many problems.
pub fn oracle_batch<P>(
    problems: &[P],
    settings: OracleSettings,
    mode: Execution,
) -> Vec<Result<SolverResult, SolverError>>
where
    P: QuadraticObjective + Sync,
{
    exec::map(mode, problems, |p| oracle_solve(p, settings))
}
