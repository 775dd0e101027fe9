//! Closed-form solutions of the two equality-constrained allocation problems.
//!
//! Both objectives are separable quadratics in the fractions `α`:
//!
//! ```text
//! center:   J = Σ δᵢ ((Dᵢ − αᵢT)/Dᵢ)² + Σ δᵢ ((Aᵢ − αᵢT)/Aᵢ)²
//! district: J = Σ δᵢ ((Dᵢ − αᵢT)/Dᵢ)²
//! ```
//!
//! subject to `Σ α = 1`. Writing `J = Σ cᵢαᵢ² − 2bᵢαᵢ + const`, stationarity
//! of the Lagrangian `J + λ(Σα − 1)` gives `αᵢ = (bᵢ − λ/2)/cᵢ` and the
//! constraint fixes `λ = 2(Σ bᵢ/cᵢ − 1)/Σ 1/cᵢ`.
//!
//! Nothing in that derivation keeps `α ≥ 0`. When some fractions come out
//! negative they are clamped to zero and the closed form is re-solved on the
//! rest. Removing entries only raises `λ`, so clamped entries never come back
//! and the loop ends after at most `n` passes.

use crate::error::SolverError;
use crate::model::{AllocationProblem, DistrictProblem, SolverResult};

/// Evaluation surface shared by the closed forms and the iterative oracle.
///
/// `value` and `gradient` are computed straight from the objective
/// expression, not from the `(c, b)` coefficients the closed form uses.
pub trait QuadraticObjective {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn total(&self) -> f64;
    fn value(&self, fractions: &[f64]) -> f64;
    fn gradient(&self, fractions: &[f64]) -> Vec<f64>;
    /// Upper bound on the Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;
}

impl QuadraticObjective for AllocationProblem {
    fn len(&self) -> usize {
        AllocationProblem::len(self)
    }

    fn total(&self) -> f64 {
        AllocationProblem::total(self)
    }

    fn value(&self, fractions: &[f64]) -> f64 {
        let t = self.total();
        fractions
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let x = f * t;
                let (d, a, s) = (self.demands()[i], self.ideals()[i], self.severities()[i]);
                s * ((d - x) / d).powi(2) + s * ((a - x) / a).powi(2)
            })
            .sum()
    }

    fn gradient(&self, fractions: &[f64]) -> Vec<f64> {
        let t = self.total();
        (0..self.len())
            .map(|i| {
                let x = fractions[i] * t;
                let (d, a, s) = (self.demands()[i], self.ideals()[i], self.severities()[i]);
                -2.0 * s * (d - x) * t / (d * d) - 2.0 * s * (a - x) * t / (a * a)
            })
            .collect()
    }

    fn lipschitz(&self) -> f64 {
        let t2 = self.total() * self.total();
        (0..self.len())
            .map(|i| {
                let (d, a, s) = (self.demands()[i], self.ideals()[i], self.severities()[i]);
                2.0 * s * t2 * (1.0 / (d * d) + 1.0 / (a * a))
            })
            .fold(0.0, f64::max)
    }
}

impl QuadraticObjective for DistrictProblem {
    fn len(&self) -> usize {
        DistrictProblem::len(self)
    }

    fn total(&self) -> f64 {
        DistrictProblem::total(self)
    }

    fn value(&self, fractions: &[f64]) -> f64 {
        let t = self.total();
        (0..self.len())
            .map(|i| {
                let (d, s) = (self.demands()[i], self.severities()[i]);
                s * ((d - fractions[i] * t) / d).powi(2)
            })
            .sum()
    }

    fn gradient(&self, fractions: &[f64]) -> Vec<f64> {
        let t = self.total();
        (0..self.len())
            .map(|i| {
                let (d, s) = (self.demands()[i], self.severities()[i]);
                -2.0 * s * (d - fractions[i] * t) * t / (d * d)
            })
            .collect()
    }

    fn lipschitz(&self) -> f64 {
        let t2 = self.total() * self.total();
        (0..self.len())
            .map(|i| {
                let (d, s) = (self.demands()[i], self.severities()[i]);
                2.0 * s * t2 / (d * d)
            })
            .fold(0.0, f64::max)
    }
}

/// Solves `min Σ cᵢαᵢ² − 2bᵢαᵢ` s.t. `Σα = 1, α ≥ 0` by the closed form plus
/// the clamping loop. Returns `(α, λ, clamped indices)`.
fn solve_separable(curvature: &[f64], linear: &[f64]) -> (Vec<f64>, f64, Vec<usize>) {
    let n = curvature.len();
    let mut free = vec![true; n];
    let mut fractions = vec![0.0; n];
    loop {
        let (mut ratio_sum, mut inv_sum) = (0.0, 0.0);
        for i in (0..n).filter(|&i| free[i]) {
            ratio_sum += linear[i] / curvature[i];
            inv_sum += 1.0 / curvature[i];
        }
        let lambda = 2.0 * (ratio_sum - 1.0) / inv_sum;

        let mut clamped_any = false;
        for i in 0..n {
            if free[i] {
                fractions[i] = (linear[i] - 0.5 * lambda) / curvature[i];
                if fractions[i] < 0.0 {
                    free[i] = false;
                    fractions[i] = 0.0;
                    clamped_any = true;
                }
            } else {
                fractions[i] = 0.0;
            }
        }
        if !clamped_any {
            let active = (0..n).filter(|&i| !free[i]).collect();
            return (fractions, lambda, active);
        }
    }
}

fn into_result(fractions: Vec<f64>, lambda: f64, active_set: Vec<usize>, total: f64) -> SolverResult {
    let amounts = fractions.iter().map(|a| a * total).collect();
    SolverResult {
        fractions,
        multiplier: lambda,
        amounts,
        active_set,
    }
}

/// Optimal center-to-region split of `problem.total()`.
pub fn solve_center_allocation(problem: &AllocationProblem) -> Result<SolverResult, SolverError> {
    let t = problem.total();
    let n = problem.len();
    let mut curvature = Vec::with_capacity(n);
    let mut linear = Vec::with_capacity(n);
    for i in 0..n {
        let (d, a, s) = (
            problem.demands()[i],
            problem.ideals()[i],
            problem.severities()[i],
        );
        curvature.push(s * (1.0 / (d * d) + 1.0 / (a * a)) * t * t);
        linear.push(s * (1.0 / d + 1.0 / a) * t);
    }
    let (fractions, lambda, active) = solve_separable(&curvature, &linear);
    Ok(into_result(fractions, lambda, active, t))
}

/// Optimal demand-only split of a district's supply among its hospitals.
pub fn solve_district_allocation(problem: &DistrictProblem) -> Result<SolverResult, SolverError> {
    let t = problem.total();
    let n = problem.len();
    let mut curvature = Vec::with_capacity(n);
    let mut linear = Vec::with_capacity(n);
    for i in 0..n {
        let (d, s) = (problem.demands()[i], problem.severities()[i]);
        curvature.push(s * t * t / (d * d));
        linear.push(s * t / d);
    }
    let (fractions, lambda, active) = solve_separable(&curvature, &linear);
    Ok(into_result(fractions, lambda, active, t))
}

/// Stationarity plus feasibility residual of a result:
/// `max over free i of |∂J/∂αᵢ + λ|` plus `|Σα − 1|`.
pub fn lagrangian_residual<P: QuadraticObjective + ?Sized>(problem: &P, result: &SolverResult) -> f64 {
    let grad = problem.gradient(&result.fractions);
    let stationarity = grad
        .iter()
        .enumerate()
        .filter(|(i, _)| result.active_set.binary_search(i).is_err())
        .map(|(_, g)| (g + result.multiplier).abs())
        .fold(0.0, f64::max);
    stationarity + (result.fraction_sum() - 1.0).abs()
}

/// KKT sign condition on clamped entries: the Lagrangian gradient must not
/// point into the feasible side, i.e. `∂J/∂αᵢ + λ ≥ −tol`.
pub fn clamped_sign_ok<P: QuadraticObjective + ?Sized>(problem: &P, result: &SolverResult, tol: f64) -> bool {
    let grad = problem.gradient(&result.fractions);
    result
        .active_set
        .iter()
        .all(|&i| result.fractions[i] == 0.0 && grad[i] + result.multiplier >= -tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_region_takes_everything() {
        let p = AllocationProblem::new(vec![7.0], vec![3.0], vec![2.5], 40.0).unwrap();
        let r = solve_center_allocation(&p).unwrap();
        assert_abs_diff_eq!(r.fractions[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.amounts[0], 40.0, epsilon = 1e-9);
        assert!(r.active_set.is_empty());
    }

    #[test]
    fn feasible_demand_is_a_fixed_point() {
        let d = vec![10.0, 30.0, 60.0];
        let p = AllocationProblem::new(d.clone(), d.clone(), vec![1.0, 2.0, 0.5], 100.0).unwrap();
        let r = solve_center_allocation(&p).unwrap();
        for (x, want) in r.amounts.iter().zip(&d) {
            assert_abs_diff_eq!(*x, *want, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(r.multiplier, 0.0, epsilon = 1e-12);
    }

    // Expected values from a bounded scalar minimisation of J(t, 1 − t),
    // with λ = −∂J/∂α at the minimiser.
    #[test]
    fn two_region_blend() {
        let p = AllocationProblem::uniform(vec![60.0, 40.0], vec![50.0, 50.0], 100.0).unwrap();
        let r = solve_center_allocation(&p).unwrap();
        assert_abs_diff_eq!(r.amounts[0], 55.30179445, epsilon = 1e-6);
        assert_abs_diff_eq!(r.amounts[1], 44.69820555, epsilon = 1e-6);
        assert_abs_diff_eq!(r.multiplier, -0.16313214, epsilon = 1e-7);
        assert!(lagrangian_residual(&p, &r) < 1e-12);
    }

    #[test]
    fn district_three_hospitals() {
        let p = DistrictProblem::new(vec![30.0, 20.0, 10.0], vec![1.0; 3], 50.0).unwrap();
        let r = solve_district_allocation(&p).unwrap();
        assert_abs_diff_eq!(r.multiplier, 5.0 / 7.0, epsilon = 1e-12);
        // D − λD²/(2T), evaluated by hand.
        assert_abs_diff_eq!(r.amounts[0], 165.0 / 7.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.amounts[1], 120.0 / 7.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.amounts[2], 65.0 / 7.0, epsilon = 1e-9);
    }

    #[test]
    fn district_exact_supply_meets_demand() {
        let d = vec![12.0, 5.0, 33.0];
        let p = DistrictProblem::new(d.clone(), vec![1.0, 4.0, 0.7], 50.0).unwrap();
        let r = solve_district_allocation(&p).unwrap();
        assert_abs_diff_eq!(r.multiplier, 0.0, epsilon = 1e-12);
        for (x, want) in r.amounts.iter().zip(&d) {
            assert_abs_diff_eq!(*x, *want, epsilon = 1e-9);
        }
        let single = DistrictProblem::new(vec![8.0], vec![1.0], 3.0).unwrap();
        assert_abs_diff_eq!(solve_district_allocation(&single).unwrap().fractions[0], 1.0);
    }

    #[test]
    fn clamping_keeps_fractions_nonnegative() {
        // A large, loosely weighted region next to small tight ones under a
        // deep shortage drives the unconstrained optimum negative.
        let p = AllocationProblem::uniform(
            vec![1000.0, 1.0, 1.0, 1.0],
            vec![1000.0, 1.0, 1.0, 1.0],
            2.0,
        )
        .unwrap();
        let r = solve_center_allocation(&p).unwrap();
        assert_eq!(r.active_set, vec![0]);
        assert_eq!(r.fractions[0], 0.0);
        assert!(r.fractions.iter().all(|a| *a >= 0.0));
        assert_abs_diff_eq!(r.fraction_sum(), 1.0, epsilon = 1e-12);
        assert!(lagrangian_residual(&p, &r) < 1e-9);
        assert!(clamped_sign_ok(&p, &r, 1e-9));
    }

    #[test]
    fn residual_detects_perturbation() {
        let p = AllocationProblem::uniform(vec![60.0, 40.0], vec![50.0, 50.0], 100.0).unwrap();
        let mut r = solve_center_allocation(&p).unwrap();
        r.fractions[0] += 0.01;
        assert!(lagrangian_residual(&p, &r) > 0.01);
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let p = AllocationProblem::new(vec![60.0, 40.0, 9.0], vec![50.0, 50.0, 20.0], vec![1.0, 2.0, 0.5], 100.0)
            .unwrap();
        let a = [0.3, 0.5, 0.2];
        let g = p.gradient(&a);
        let h = 1e-6;
        for i in 0..3 {
            let mut up = a;
            let mut dn = a;
            up[i] += h;
            dn[i] -= h;
            let fd = (p.value(&up) - p.value(&dn)) / (2.0 * h);
            assert_abs_diff_eq!(g[i], fd, epsilon = 1e-5);
        }
    }
}
