//! Upper-level pricing: maximize revenue minus matching cost over the rate box.
//!
//! `g(l) = sum_i l_i p_i(l_i) - c(l)`. Because `c` is (weakly) concave on
//! much of the box, `g` is a difference of concave functions and the
//! minorize-maximization scheme in [`mm_solve`] ascends monotonically;
//! [`pg_solve`] is the projected-gradient baseline.

mod benchmark;
mod demand;
mod solvers;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::MatchingInstance;
use crate::lp::{solve_fluid_lp, FluidSolution};

pub use benchmark::{
    benchmark, start_point, BenchmarkCase, BenchmarkOptions, BenchmarkRow, BenchmarkSummary,
    BenchmarkTable, SolverSpec, CSV_HEADER,
};
pub use demand::{CustomDemand, DemandModel, LinearDemand, ScalarFn};
pub use solvers::{default_delta_mm, maximize_surrogate, mm_solve, pg_solve, MmOptions, PgOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    MM,
    PG,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingResult {
    pub solver: SolverKind,
    pub lambda_star: Vec<f64>,
    pub objective: f64,
    /// `g` at the start point and after every iteration.
    pub trajectory: Vec<f64>,
    pub iterations: usize,
    /// Curvature shift used in the last accepted MM step (0 for PG).
    pub rho_final: f64,
    /// Largest curvature shift any MM step needed.
    pub rho_max: f64,
    pub stepsize_initial: Option<f64>,
    pub stepsize_final: Option<f64>,
    pub lp_solves: usize,
    pub wall_time: f64,
    pub converged: bool,
}

/// `g(l) = revenue(l) - c(l)`.
pub fn objective_g(inst: &MatchingInstance, demand: &DemandModel, lambda: &[f64]) -> Result<f64> {
    demand.check_compatible(inst)?;
    let sol = solve_fluid_lp(inst, lambda)?;
    Ok(demand.total_revenue(lambda) - sol.objective)
}

/// `v_i = gamma_i + sum_j y_j eta_{j,i} - rho * lambda_i`, a supergradient of
/// `c(l) - rho |l|^2 / 2` at the rates `sol` was computed for.
pub fn supergradient(lambda: &[f64], rho: f64, sol: &FluidSolution) -> Result<Vec<f64>> {
    if lambda.len() != sol.n_types() {
        return Err(Error::DimensionMismatch {
            expected: sol.n_types(),
            got: lambda.len(),
        });
    }
    Ok(sol
        .envelope_gradient()
        .into_iter()
        .zip(lambda)
        .map(|(v, l)| v - rho * l)
        .collect())
}

/// Gradient of `g` wherever `c` is differentiable: revenue derivative minus
/// the envelope gradient of `c`.
pub fn objective_gradient(
    demand: &DemandModel,
    lambda: &[f64],
    sol: &FluidSolution,
) -> Result<Vec<f64>> {
    Ok(supergradient(lambda, 0.0, sol)?
        .into_iter()
        .enumerate()
        .map(|(i, v)| demand.revenue_derivative(i, lambda[i]) - v)
        .collect())
}

/// Surrogate `Q(l | anchor)`, a concave minorant of `g` tight at `anchor`
/// whenever `c - rho |.|^2 / 2` is concave.
pub fn surrogate_value(
    demand: &DemandModel,
    lambda: &[f64],
    anchor: &[f64],
    anchor_sol: &FluidSolution,
    rho: f64,
) -> Result<f64> {
    let v = supergradient(anchor, rho, anchor_sol)?;
    let sq = |p: &[f64]| p.iter().map(|x| x * x).sum::<f64>();
    let linear: f64 = v
        .iter()
        .zip(lambda)
        .zip(anchor)
        .map(|((vi, l), a)| vi * (l - a))
        .sum();
    Ok(
        demand.total_revenue(lambda) - 0.5 * rho * sq(lambda) - anchor_sol.objective
            + 0.5 * rho * sq(anchor)
            - linear,
    )
}

/// Uniform draw from the box.
pub fn sample_in_box<R: rand::Rng>(inst: &MatchingInstance, rng: &mut R) -> Vec<f64> {
    inst.lambda_lower
        .iter()
        .zip(&inst.lambda_upper)
        .map(|(&lo, &hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
        .collect()
}
