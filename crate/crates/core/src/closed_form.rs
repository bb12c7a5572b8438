//! Analytic optima of the fluid LP for one and two agent types.
//!
//! These are independent of the simplex and serve as its oracle. Only primal
//! values are available in closed form, so results carry no duals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::MatchingInstance;

/// Slack allowed before a case-(iv) negative self-match is treated as an
/// error rather than rounding noise.
const CLAMP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormSolution {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum N2Case {
    /// No cross matching between the two types.
    NoCross,
    /// Every patience constraint binds.
    FullyMatched,
    /// Type 1 never matches with itself.
    NoSelfMatch1,
    /// Type 2 is always matched passively (`y[1] = 0`).
    Y2Zero,
}

impl N2Case {
    pub fn name(self) -> &'static str {
        match self {
            N2Case::NoCross => "NoCross",
            N2Case::FullyMatched => "FullyMatched",
            N2Case::NoSelfMatch1 => "NoSelfMatch1",
            N2Case::Y2Zero => "Y2Zero",
        }
    }
}

/// Case of a two-type point together with the indicator values that select it.
/// Indicators refer to the types sorted by patience rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct N2CaseLabel {
    pub case_id: N2Case,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
}

impl N2CaseLabel {
    pub fn from_indicators(delta1: f64, delta2: f64, delta3: f64) -> Self {
        let case_id = if delta1 <= 0.0 {
            N2Case::NoCross
        } else if delta2 < 0.0 {
            N2Case::FullyMatched
        } else if delta3 < 0.0 {
            N2Case::NoSelfMatch1
        } else {
            N2Case::Y2Zero
        };
        Self {
            case_id,
            delta1,
            delta2,
            delta3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SameThetaCase {
    Decoupled,
    FullyMatched,
}

fn n1_cost(theta: f64, c: f64, lambda: f64) -> f64 {
    c * lambda * (theta + lambda) / (theta + 2.0 * lambda)
}

pub fn solve_n1(theta1: f64, c1: f64, lambda1: f64) -> Result<ClosedFormSolution> {
    if !(lambda1.is_finite() && lambda1 > 0.0) {
        return Err(Error::NonPositiveRate {
            index: 0,
            value: lambda1,
        });
    }
    if !(theta1.is_finite() && theta1 >= 0.0) {
        return Err(Error::Precondition(format!(
            "theta = {theta1} must be >= 0"
        )));
    }
    if !(c1.is_finite() && c1 > 0.0) {
        return Err(Error::Precondition(format!("cost = {c1} must be positive")));
    }
    let denom = theta1 + 2.0 * lambda1;
    Ok(ClosedFormSolution {
        x: vec![vec![lambda1 * lambda1 / denom]],
        y: vec![lambda1 * theta1 / denom],
        objective: n1_cost(theta1, c1, lambda1),
    })
}

/// Second derivative of the single-type cost in the rate.
pub fn n1_curvature(theta1: f64, c1: f64, lambda1: f64) -> f64 {
    -2.0 * c1 * theta1 * theta1 / (theta1 + 2.0 * lambda1).powi(3)
}

fn require_two(inst: &MatchingInstance, lambda: &[f64]) -> Result<()> {
    if inst.n_types() != 2 {
        return Err(Error::Precondition(format!(
            "two-type closed form needs N = 2, got N = {}",
            inst.n_types()
        )));
    }
    inst.check_positive_rates(lambda)
}

/// `(delta1, delta2, delta3)` for a two-type instance with
/// `theta[0] <= theta[1]`.
pub fn indicators_n2(inst: &MatchingInstance, lambda: &[f64]) -> Result<(f64, f64, f64)> {
    require_two(inst, lambda)?;
    let (t1, t2) = (inst.theta[0], inst.theta[1]);
    if t1 > t2 {
        return Err(Error::Precondition(format!(
            "indicators need theta sorted ascending, got ({t1}, {t2})"
        )));
    }
    let (c1, c2, c12) = (inst.solo_cost[0], inst.solo_cost[1], inst.pair_cost[0][1]);
    let (l1, l2) = (lambda[0], lambda[1]);
    let type2_share = c2 * (t2 + l2) / (t2 + 2.0 * l2);
    let d1 = c1 * (t1 + l1) / (t1 + 2.0 * l1) + type2_share - c12;
    let d2 =
        0.5 * c1 * (1.0 - t1 * (t2 + l1 + 2.0 * l2) / (l2 * (t2 + 2.0 * l2))) + type2_share - c12;
    let d3 = l1 - l2 - t1;
    Ok((d1, d2, d3))
}

/// Case label and closed-form optimum for `N = 2`. Instances with
/// `theta[0] > theta[1]` are solved with the types swapped and mapped back;
/// the label then describes the swapped order.
pub fn solve_n2(
    inst: &MatchingInstance,
    lambda: &[f64],
) -> Result<(N2CaseLabel, ClosedFormSolution)> {
    require_two(inst, lambda)?;
    inst.check_rates(lambda)?;
    if inst.theta[0] > inst.theta[1] {
        let swapped = inst.permuted(&[1, 0]);
        let (label, s) = solve_sorted(&swapped, &[lambda[1], lambda[0]])?;
        let x = vec![vec![s.x[1][1], s.x[1][0]], vec![s.x[0][1], s.x[0][0]]];
        let y = vec![s.y[1], s.y[0]];
        return Ok((
            label,
            ClosedFormSolution {
                x,
                y,
                objective: s.objective,
            },
        ));
    }
    solve_sorted(inst, lambda)
}

fn solve_sorted(
    inst: &MatchingInstance,
    lambda: &[f64],
) -> Result<(N2CaseLabel, ClosedFormSolution)> {
    let (d1, d2, d3) = indicators_n2(inst, lambda)?;
    let label = N2CaseLabel::from_indicators(d1, d2, d3);
    let (t1, t2) = (inst.theta[0], inst.theta[1]);
    let (l1, l2) = (lambda[0], lambda[1]);

    // Binding patience constraints are written as x[i][j] = lambda[j] * u[i]
    // with u[i] = y[i] / theta[i] expanded, so theta = 0 needs no division.
    let (x, y) = match label.case_id {
        N2Case::NoCross => {
            let (a, b) = (t1 + 2.0 * l1, t2 + 2.0 * l2);
            (
                [[l1 * l1 / a, 0.0], [0.0, l2 * l2 / b]],
                [t1 * l1 / a, t2 * l2 / b],
            )
        }
        N2Case::FullyMatched => {
            let s = l1 + l2;
            let d = 2.0 * s * s + t1 * (l1 + 2.0 * l2) + t2 * (l2 + 2.0 * l1) + t1 * t2;
            let u1 = l1 * (t2 + s) / d;
            let u2 = l2 * (t1 + s) / d;
            ([[l1 * u1, l2 * u1], [l1 * u2, l2 * u2]], [t1 * u1, t2 * u2])
        }
        N2Case::NoSelfMatch1 => {
            let d = 2.0 * l2 * l2 + t1 * (l1 + 2.0 * l2) + t2 * l2 + t1 * t2;
            let u1 = l1 * (t2 + l1 + l2) / d;
            let u2 = l2 * (t1 + l2 - l1) / d;
            ([[0.0, l2 * u1], [l1 * u2, l2 * u2]], [t1 * u1, t2 * u2])
        }
        N2Case::Y2Zero => {
            let mut x11 = 0.5 * (l1 - l2 - t1);
            let mut y1 = t1;
            if x11 < 0.0 {
                if x11 < -CLAMP_TOL * l1.max(1.0) {
                    return Err(Error::Precondition(format!(
                        "Y2Zero case with negative self-match {x11} at lambda = ({l1}, {l2})"
                    )));
                }
                x11 = 0.0;
                y1 = l1 - l2;
            }
            ([[x11, l2], [0.0, 0.0]], [y1, 0.0])
        }
    };
    let x: Vec<Vec<f64>> = x.iter().map(|r| r.to_vec()).collect();
    let y = y.to_vec();
    let objective = crate::lp::objective_of(inst, &x, &y);
    Ok((label, ClosedFormSolution { x, y, objective }))
}

/// Closed form for two types sharing one patience rate.
pub fn solve_n2_same_theta(
    inst: &MatchingInstance,
    lambda: &[f64],
) -> Result<(SameThetaCase, ClosedFormSolution)> {
    require_two(inst, lambda)?;
    inst.check_rates(lambda)?;
    let theta = inst.theta[0];
    if inst.theta[1] != theta {
        return Err(Error::Precondition(format!(
            "same-theta closed form needs equal patience rates, got ({theta}, {})",
            inst.theta[1]
        )));
    }
    let (l1, l2) = (lambda[0], lambda[1]);
    let (d1, _, _) = indicators_n2(inst, lambda)?;
    let (case, x, y) = if d1 <= 0.0 {
        let (a, b) = (theta + 2.0 * l1, theta + 2.0 * l2);
        (
            SameThetaCase::Decoupled,
            vec![vec![l1 * l1 / a, 0.0], vec![0.0, l2 * l2 / b]],
            vec![l1 * theta / a, l2 * theta / b],
        )
    } else {
        let s = theta + 2.0 * l1 + 2.0 * l2;
        (
            SameThetaCase::FullyMatched,
            vec![
                vec![l1 * l1 / s, l1 * l2 / s],
                vec![l1 * l2 / s, l2 * l2 / s],
            ],
            vec![l1 * theta / s, l2 * theta / s],
        )
    };
    let objective = crate::lp::objective_of(inst, &x, &y);
    Ok((case, ClosedFormSolution { x, y, objective }))
}

/// The decoupled and fully matched cost expressions for two types with a
/// common patience rate; the optimal cost is their minimum.
pub fn same_theta_costs(inst: &MatchingInstance, lambda: &[f64]) -> Result<(f64, f64)> {
    require_two(inst, lambda)?;
    let theta = inst.theta[0];
    let (c1, c2, c12) = (inst.solo_cost[0], inst.solo_cost[1], inst.pair_cost[0][1]);
    let (l1, l2) = (lambda[0], lambda[1]);
    let decoupled = n1_cost(theta, c1, l1) + n1_cost(theta, c2, l2);
    let matched = (c1 * l1 * (theta + l1) + c2 * l2 * (theta + l2) + 2.0 * c12 * l1 * l2)
        / (theta + 2.0 * l1 + 2.0 * l2);
    Ok((decoupled, matched))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(theta: [f64; 2], c1: f64, c2: f64, c12: f64) -> MatchingInstance {
        MatchingInstance::two_type(theta, c1, c2, c12, [1e-3, 1e-3], [1e5, 1e5]).unwrap()
    }

    #[test]
    fn n1_values() {
        let s = solve_n1(1.0, 1.0, 1.0).unwrap();
        assert!((s.y[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.x[0][0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.objective - 2.0 / 3.0).abs() < 1e-15);

        let s = solve_n1(0.0, 1.0, 5.0).unwrap();
        assert_eq!(s.y[0], 0.0);
        assert_eq!(s.x[0][0], 2.5);
        assert_eq!(s.objective, 2.5);

        assert!((solve_n1(2.0, 3.0, 2.0).unwrap().objective - 4.0).abs() < 1e-14);
        assert!(solve_n1(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn delta3_is_plain_difference() {
        let inst = two([1.0, 2.0], 1.0, 1.0, 1.5);
        let (_, _, d3) = indicators_n2(&inst, &[3.0, 1.0]).unwrap();
        assert_eq!(d3, 1.0);
    }

    #[test]
    fn indicators_require_sorted_theta() {
        let inst = two([2.0, 1.0], 1.0, 1.0, 1.5);
        assert!(indicators_n2(&inst, &[1.0, 1.0]).is_err());
        assert!(solve_n2(&inst, &[1.0, 1.0]).is_ok());
    }

    #[test]
    fn same_theta_delta2_negative() {
        let inst = two([0.7, 0.7], 1.0, 1.3, 1.6);
        for &(a, b) in &[(0.1, 5.0), (3.0, 0.2), (1.0, 1.0), (50.0, 40.0)] {
            let (_, d2, _) = indicators_n2(&inst, &[a, b]).unwrap();
            assert!(d2 < 0.0, "delta2 = {d2} at ({a}, {b})");
        }
    }

    #[test]
    fn huge_cross_cost_decouples() {
        let inst = two([1.0, 1.0], 1.0, 1.0, 10.0);
        let (label, s) = solve_n2(&inst, &[0.7, 1.9]).unwrap();
        assert_eq!(label.case_id, N2Case::NoCross);
        let sum =
            solve_n1(1.0, 1.0, 0.7).unwrap().objective + solve_n1(1.0, 1.0, 1.9).unwrap().objective;
        assert!((s.objective - sum).abs() < 1e-14);
    }

    #[test]
    fn additive_cross_cost_always_decoupled() {
        let inst = two([0.4, 0.4], 1.0, 2.0, 3.0);
        for &(a, b) in &[(0.01, 0.01), (1.0, 3.0), (100.0, 0.5)] {
            let (case, _) = solve_n2_same_theta(&inst, &[a, b]).unwrap();
            assert_eq!(case, SameThetaCase::Decoupled);
        }
    }

    #[test]
    fn same_theta_min_of_two_expressions() {
        let inst = two([0.3, 0.3], 1.1, 1.1, 1.65);
        let lambda = [0.5, 0.5];
        let (_, s) = solve_n2_same_theta(&inst, &lambda).unwrap();
        let (a, b) = same_theta_costs(&inst, &lambda).unwrap();
        assert!((s.objective - a.min(b)).abs() < 1e-14);
    }

    #[test]
    fn relabeling_maps_back() {
        let a = two([1.0, 3.0], 1.0, 1.2, 1.5);
        let b = two([3.0, 1.0], 1.2, 1.0, 1.5);
        let (_, sa) = solve_n2(&a, &[0.4, 0.9]).unwrap();
        let (_, sb) = solve_n2(&b, &[0.9, 0.4]).unwrap();
        assert!((sa.objective - sb.objective).abs() < 1e-14);
        assert_eq!(sa.y[0], sb.y[1]);
        assert_eq!(sa.x[0][1], sb.x[1][0]);
    }

    #[test]
    fn y2_zero_case_solution() {
        // Efficient cross matching and a large type-1 surplus.
        let inst = two([1.0, 8.0], 1.0, 1.0, 1.0);
        let (label, s) = solve_n2(&inst, &[30.0, 10.0]).unwrap();
        assert_eq!(label.case_id, N2Case::Y2Zero);
        assert_eq!(s.y, vec![1.0, 0.0]);
        assert_eq!(s.x[0][0], 9.5);
        assert_eq!(s.x[0][1], 10.0);
    }
}
