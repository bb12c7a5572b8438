//! Problem data for the fluid matching LP.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when checking the cost assumptions (symmetry,
/// diagonal consistency, dominance) on user-supplied data.
const COST_TOL: f64 = 1e-12;

/// One matching market: `N` agent types with patience rates, solo and pooled
/// costs, and the box of admissible arrival-rate vectors.
///
/// `pair_cost[i][j]` is the cost of matching an active type-`i` agent with a
/// passive type-`j` agent. Costs must satisfy `c(i,i) = c(i)`,
/// `c(i,j) = c(j,i)` and `c(i,j) >= max(c(i), c(j))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingInstance {
    pub theta: Vec<f64>,
    pub solo_cost: Vec<f64>,
    pub pair_cost: Vec<Vec<f64>>,
    pub lambda_lower: Vec<f64>,
    pub lambda_upper: Vec<f64>,
}

impl MatchingInstance {
    pub fn new(
        theta: Vec<f64>,
        solo_cost: Vec<f64>,
        pair_cost: Vec<Vec<f64>>,
        lambda_lower: Vec<f64>,
        lambda_upper: Vec<f64>,
    ) -> Result<Self> {
        let inst = Self {
            theta,
            solo_cost,
            pair_cost,
            lambda_lower,
            lambda_upper,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Builds an instance from a full cost matrix whose diagonal holds the
    /// solo costs.
    pub fn from_cost_matrix(
        theta: Vec<f64>,
        cost: Vec<Vec<f64>>,
        lambda_lower: Vec<f64>,
        lambda_upper: Vec<f64>,
    ) -> Result<Self> {
        let solo = cost
            .iter()
            .enumerate()
            .map(|(i, row)| row.get(i).copied().unwrap_or(f64::NAN))
            .collect();
        Self::new(theta, solo, cost, lambda_lower, lambda_upper)
    }

    /// Two-type instance with scalar costs, the shape used throughout the
    /// closed-form analysis.
    pub fn two_type(
        theta: [f64; 2],
        c1: f64,
        c2: f64,
        c12: f64,
        lower: [f64; 2],
        upper: [f64; 2],
    ) -> Result<Self> {
        Self::new(
            theta.to_vec(),
            vec![c1, c2],
            vec![vec![c1, c12], vec![c12, c2]],
            lower.to_vec(),
            upper.to_vec(),
        )
    }

    pub fn n_types(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.theta.len();
        if n == 0 {
            return Err(Error::InvalidInstance("instance has no agent types".into()));
        }
        for (name, len) in [
            ("solo_cost", self.solo_cost.len()),
            ("pair_cost", self.pair_cost.len()),
            ("lambda_lower", self.lambda_lower.len()),
            ("lambda_upper", self.lambda_upper.len()),
        ] {
            if len != n {
                return Err(Error::InvalidInstance(format!(
                    "{name} has length {len}, expected {n}"
                )));
            }
        }
        for (i, row) in self.pair_cost.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInstance(format!(
                    "pair_cost row {i} has length {}, expected {n}",
                    row.len()
                )));
            }
        }
        for i in 0..n {
            let th = self.theta[i];
            if !(th.is_finite() && th >= 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "theta[{i}] = {th} must be >= 0"
                )));
            }
            let ci = self.solo_cost[i];
            if !(ci.is_finite() && ci > 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "solo_cost[{i}] = {ci} must be positive"
                )));
            }
            let (lo, hi) = (self.lambda_lower[i], self.lambda_upper[i]);
            if !(lo.is_finite() && lo > 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "lambda_lower[{i}] = {lo} must be strictly positive"
                )));
            }
            if !(hi.is_finite() && hi >= lo) {
                return Err(Error::InvalidInstance(format!(
                    "lambda_upper[{i}] = {hi} must be finite and >= lambda_lower[{i}] = {lo}"
                )));
            }
        }
        for i in 0..n {
            let ci = self.solo_cost[i];
            let cii = self.pair_cost[i][i];
            if (cii - ci).abs() > COST_TOL * ci.max(1.0) {
                return Err(Error::InvalidInstance(format!(
                    "pair_cost[{i}][{i}] = {cii} differs from solo_cost[{i}] = {ci}"
                )));
            }
            for j in 0..n {
                let cij = self.pair_cost[i][j];
                let cji = self.pair_cost[j][i];
                if !(cij.is_finite() && cij > 0.0) {
                    return Err(Error::InvalidInstance(format!(
                        "pair_cost[{i}][{j}] = {cij} must be positive"
                    )));
                }
                let scale = cij.abs().max(1.0);
                if (cij - cji).abs() > COST_TOL * scale {
                    return Err(Error::InvalidInstance(format!(
                        "pair_cost not symmetric at ({i},{j}): {cij} vs {cji}"
                    )));
                }
                let floor = ci.max(self.solo_cost[j]);
                if cij < floor - COST_TOL * scale {
                    return Err(Error::InvalidInstance(format!(
                        "pair_cost[{i}][{j}] = {cij} below max(c({i}), c({j})) = {floor}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks that `lambda` has the right length, is strictly positive and
    /// lies inside the box (a degenerate box `lower == upper` is fine).
    pub fn check_rates(&self, lambda: &[f64]) -> Result<()> {
        self.check_positive_rates(lambda)?;
        for (i, &l) in lambda.iter().enumerate() {
            let (lo, hi) = (self.lambda_lower[i], self.lambda_upper[i]);
            if l < lo || l > hi {
                return Err(Error::OutOfBox {
                    index: i,
                    value: l,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(())
    }

    /// Like [`check_rates`](Self::check_rates) but without the box test.
    pub fn check_positive_rates(&self, lambda: &[f64]) -> Result<()> {
        let n = self.n_types();
        if lambda.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: lambda.len(),
            });
        }
        for (i, &l) in lambda.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::NonPositiveRate { index: i, value: l });
            }
        }
        Ok(())
    }

    /// Projects `lambda` onto the box.
    pub fn clamp_to_box(&self, lambda: &mut [f64]) {
        for (i, l) in lambda.iter_mut().enumerate() {
            *l = l.clamp(self.lambda_lower[i], self.lambda_upper[i]);
        }
    }

    pub fn max_cost(&self) -> f64 {
        self.pair_cost
            .iter()
            .flatten()
            .fold(0.0_f64, |m, &c| m.max(c))
    }

    pub fn all_theta_zero(&self) -> bool {
        self.theta.iter().all(|&t| t == 0.0)
    }

    pub fn all_theta_equal(&self) -> bool {
        self.theta.windows(2).all(|w| w[0] == w[1])
    }

    /// Same instance with the box replaced.
    pub fn with_box(&self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(
            self.theta.clone(),
            self.solo_cost.clone(),
            self.pair_cost.clone(),
            lower,
            upper,
        )
    }

    /// Instance with types reordered so that new type `k` is old type `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let pick = |v: &Vec<f64>| perm.iter().map(|&p| v[p]).collect::<Vec<_>>();
        Self {
            theta: pick(&self.theta),
            solo_cost: pick(&self.solo_cost),
            pair_cost: perm
                .iter()
                .map(|&a| perm.iter().map(|&b| self.pair_cost[a][b]).collect())
                .collect(),
            lambda_lower: pick(&self.lambda_lower),
            lambda_upper: pick(&self.lambda_upper),
        }
    }
}
