//! The fluid matching LP
//!
//! ```text
//! c(lambda) = min  sum_ij c(i,j) x[i][j] + sum_i c(i) y[i]
//!             s.t. sum_j x[j][i] + sum_j x[i][j] + y[i] = lambda[i]   (flow, dual gamma[i])
//!                  theta[i] x[i][j] <= lambda[j] y[i]                  (patience, dual eta[i][j])
//!                  x, y >= 0
//! ```
//!
//! solved as a parametric program in the rate vector `lambda`.

pub mod simplex;
pub mod standard_form;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::MatchingInstance;
pub use simplex::SimplexOptions;
use standard_form::Layout;
pub use standard_form::{build_standard_form, StandardFormLP};

/// Optimal basic solution of the fluid LP at one rate vector.
///
/// Duals follow the usual convention for `min` problems: `gamma` is free and
/// `eta <= 0`. With that convention `gamma[i] + sum_j y[j] eta[j][i]` is a
/// supergradient of `c` at `lambda` (the envelope formula), matching finite
/// differences wherever `c` is smooth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidSolution {
    /// Match rates, `x[i][j]` with `i` active and `j` passive.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub objective: f64,
    pub gamma: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
    /// Stable hash of the optimal basis; equal tags mean the same vertex
    /// structure.
    pub basis_tag: String,
}

impl FluidSolution {
    pub fn n_types(&self) -> usize {
        self.y.len()
    }

    /// `gamma[i] + sum_j y[j] * eta[j][i]`, the supergradient of `c` at the
    /// rates this solution was computed for.
    pub fn envelope_gradient(&self) -> Vec<f64> {
        let n = self.n_types();
        (0..n)
            .map(|i| self.gamma[i] + (0..n).map(|j| self.y[j] * self.eta[j][i]).sum::<f64>())
            .collect()
    }
}

/// Worst violations of the optimality conditions of a [`FluidSolution`],
/// all in absolute units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct OptimalityResiduals {
    pub flow: f64,
    pub patience: f64,
    pub negativity: f64,
    pub objective: f64,
    /// Most negative reduced cost over all columns (dual feasibility).
    pub dual: f64,
    /// Largest `|value * reduced cost|` (complementary slackness).
    pub complementarity: f64,
    /// Largest positive `eta` entry (sign convention).
    pub eta_sign: f64,
}

impl OptimalityResiduals {
    pub fn max(&self) -> f64 {
        [
            self.flow,
            self.patience,
            self.negativity,
            self.objective,
            self.dual,
            self.complementarity,
            self.eta_sign,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn solve_fluid_lp(inst: &MatchingInstance, lambda: &[f64]) -> Result<FluidSolution> {
    solve_with(inst, lambda, SimplexOptions::default())
}

pub fn solve_with(
    inst: &MatchingInstance,
    lambda: &[f64],
    opts: SimplexOptions,
) -> Result<FluidSolution> {
    inst.check_rates(lambda)?;
    solve_unboxed(inst, lambda, opts)
}

/// Solves without the box check (rates must still be positive). Finite
/// difference probes step slightly outside the box on purpose.
pub(crate) fn solve_unboxed(
    inst: &MatchingInstance,
    lambda: &[f64],
    opts: SimplexOptions,
) -> Result<FluidSolution> {
    inst.check_positive_rates(lambda)?;
    let v = simplex::solve(inst, lambda, opts)?;
    let n = inst.n_types();
    let lay = Layout { n };
    let x: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| v.values[lay.x(i, j)]).collect())
        .collect();
    let y: Vec<f64> = (0..n).map(|i| v.values[lay.y(i)]).collect();
    let gamma = v.duals[..n].to_vec();
    let eta = (0..n)
        .map(|i| (0..n).map(|j| v.duals[lay.patience_row(i, j)]).collect())
        .collect();
    let objective = objective_of(inst, &x, &y);
    Ok(FluidSolution {
        x,
        y,
        objective,
        gamma,
        eta,
        basis_tag: basis_tag(&v.basis),
    })
}

/// Optimal cost `c(lambda)`.
pub fn cost(inst: &MatchingInstance, lambda: &[f64]) -> Result<f64> {
    Ok(solve_fluid_lp(inst, lambda)?.objective)
}

pub fn objective_of(inst: &MatchingInstance, x: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = inst.n_types();
    let mut total = 0.0;
    for i in 0..n {
        total += inst.solo_cost[i] * y[i];
        for j in 0..n {
            total += inst.pair_cost[i][j] * x[i][j];
        }
    }
    total
}

fn basis_tag(basis: &[usize]) -> String {
    // FNV-1a over the sorted basic column indices.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in basis {
        for byte in (b as u64).to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Measures primal feasibility, dual feasibility and complementary
/// slackness of `sol` against the LP at `lambda`.
pub fn optimality_residuals(
    inst: &MatchingInstance,
    lambda: &[f64],
    sol: &FluidSolution,
) -> OptimalityResiduals {
    let n = inst.n_types();
    let mut r = OptimalityResiduals::default();
    for i in 0..n {
        let inflow: f64 = (0..n).map(|j| sol.x[j][i] + sol.x[i][j]).sum::<f64>() + sol.y[i];
        r.flow = r.flow.max((inflow - lambda[i]).abs());
        r.negativity = r.negativity.max(-sol.y[i]);
        for j in 0..n {
            r.negativity = r.negativity.max(-sol.x[i][j]);
            r.patience = r
                .patience
                .max(inst.theta[i] * sol.x[i][j] - lambda[j] * sol.y[i]);
            r.eta_sign = r.eta_sign.max(sol.eta[i][j]);
        }
    }
    r.objective = (objective_of(inst, &sol.x, &sol.y) - sol.objective).abs();

    let mut check = |value: f64, reduced: f64| {
        r.dual = r.dual.max(-reduced);
        r.complementarity = r.complementarity.max((value * reduced).abs());
    };
    for i in 0..n {
        for j in 0..n {
            let d =
                inst.pair_cost[i][j] - sol.gamma[i] - sol.gamma[j] - inst.theta[i] * sol.eta[i][j];
            check(sol.x[i][j], d);
            // Patience slack: cost 0, column e_(i,j).
            let slack = lambda[j] * sol.y[i] - inst.theta[i] * sol.x[i][j];
            check(slack, -sol.eta[i][j]);
        }
        let d = inst.solo_cost[i] - sol.gamma[i]
            + (0..n).map(|j| lambda[j] * sol.eta[i][j]).sum::<f64>();
        check(sol.y[i], d);
    }
    r
}
