//! Worked instances showing where the cost fails to be concave, fails to be
//! weakly concave, and where the pricing objective has several local maxima.
//!
//! Each example rebuilds its instance, runs the matching diagnostic and
//! compares against the published figures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concavity::{numerical_hessian, one_sided_partials, tau_threshold, tau_values};
use crate::error::{Error, Result};
use crate::instance::MatchingInstance;
use crate::lp::solve_fluid_lp;
use crate::pricing::DemandModel;

/// Relative step of the Hessian and one-sided difference stencils.
pub const FD_STEP: f64 = 1e-6;
pub const HESSIAN_STEP: f64 = 1e-4;
/// Points per axis of the pricing-objective grid.
pub const GRID_RESOLUTION: usize = 200;
pub const GRID_RANGE: (f64, f64) = (0.01, 1.0);
/// Smallest slope jump counted as a kink of the pricing objective.
pub const KINK_MISMATCH: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub passed: bool,
}

impl Check {
    fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lo,
            hi,
            passed: value >= lo && value <= hi,
        }
    }

    fn near(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::within(name, value, target - tol, target + tol)
    }

    fn at_least(name: impl Into<String>, value: f64, lo: f64) -> Self {
        Self::within(name, value, lo, f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleReport {
    pub id: u8,
    pub title: String,
    pub checks: Vec<Check>,
    /// Extra numbers worth printing (maxima, kinks, Hessians).
    pub details: serde_json::Value,
}

impl ExampleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Points where Example 4 evaluates one-sided slopes.
pub const EXAMPLE4_POINTS: [[f64; 2]; 4] = [
    [11.0, 10.0],
    [101.0, 100.0],
    [1001.0, 1000.0],
    [10001.0, 10000.0],
];
pub const EXAMPLE4_LEFT: [f64; 4] = [0.43574, 0.48837, 0.49876, 0.49988];

pub fn example_instance(id: u8) -> Result<MatchingInstance> {
    match id {
        1 => MatchingInstance::two_type([1.0, 2.0], 1.0, 1.0, 1.01, [1e-3; 2], [10.0; 2]),
        2 => MatchingInstance::from_cost_matrix(
            vec![1.0; 4],
            vec![
                vec![0.70, 0.77, 0.83, 0.92],
                vec![0.77, 0.40, 0.62, 0.74],
                vec![0.83, 0.62, 0.50, 0.86],
                vec![0.92, 0.74, 0.86, 0.70],
            ],
            vec![1e-3; 4],
            vec![10.0; 4],
        ),
        3 => MatchingInstance::two_type([1.0, 8.0], 1.0, 1.0, 1.05, [1e-3; 2], [100.0; 2]),
        4 => MatchingInstance::two_type([1.0, 8.0], 1.0, 1.0, 1.0, [1e-3; 2], [2e4; 2]),
        5 => MatchingInstance::two_type(
            [0.3, 0.3],
            1.1,
            1.1,
            1.65,
            [GRID_RANGE.0; 2],
            [GRID_RANGE.1; 2],
        ),
        _ => Err(Error::Precondition(format!(
            "no example {id}; choose 1 to 5"
        ))),
    }
}

/// Linear demand `p_i = 1 - l_i` of the pricing example.
pub fn example5_demand() -> DemandModel {
    DemandModel::linear(vec![1.0; 2], vec![1.0; 2]).expect("valid constants")
}

pub fn run_example(id: u8) -> Result<ExampleReport> {
    let inst = example_instance(id)?;
    match id {
        1 | 2 => {
            let (point, target, title): (Vec<f64>, f64, &str) = if id == 1 {
                (
                    vec![0.1, 0.1],
                    0.03,
                    "two types with different patience: cost not concave",
                )
            } else {
                (
                    vec![0.8, 1.2, 1.2, 0.01],
                    0.04,
                    "four types with equal patience: cost not concave",
                )
            };
            let h = numerical_hessian(&inst, &point, HESSIAN_STEP)?;
            let top = h.max_eigenvalue();
            Ok(ExampleReport {
                id,
                title: title.into(),
                checks: vec![
                    Check::near("max_eigenvalue", top, target, 0.01),
                    Check::within("smooth", f64::from(u8::from(h.smooth)), 1.0, 1.0),
                ],
                details: serde_json::json!({ "lambda": point, "hessian": h }),
            })
        }
        3 => {
            let (t1, t2) = tau_values(&inst);
            let threshold = tau_threshold(&inst).unwrap_or(f64::NAN);
            let p = one_sided_partials(&inst, &[19.5, 18.5], 0, FD_STEP)?;
            Ok(ExampleReport {
                id,
                title: "two types: weak concavity fails just below the threshold".into(),
                checks: vec![
                    Check::near("tau1", t1, 4.2, 1e-9),
                    Check::near("tau2", t2, 10.44, 1e-9),
                    Check::near("threshold", threshold, 18.57, 0.01),
                    Check::near("left_partial", p.left, 0.49986, 1e-4),
                    Check::near("right_partial", p.right, 0.5, 1e-6),
                ],
                details: serde_json::json!({ "lambda": [19.5, 18.5], "partials": p }),
            })
        }
        4 => {
            let mut checks = Vec::new();
            let mut partials = Vec::new();
            for (pt, want) in EXAMPLE4_POINTS.iter().zip(EXAMPLE4_LEFT) {
                let p = one_sided_partials(&inst, pt, 0, FD_STEP)?;
                checks.push(Check::near(
                    format!("left_partial{pt:?}"),
                    p.left,
                    want,
                    1e-4,
                ));
                checks.push(Check::near(
                    format!("right_partial{pt:?}"),
                    p.right,
                    0.5,
                    1e-6,
                ));
                partials.push(p);
            }
            Ok(ExampleReport {
                id,
                title: "perfect pooling efficiency: weak concavity fails at any scale".into(),
                checks,
                details: serde_json::json!({ "points": EXAMPLE4_POINTS, "partials": partials }),
            })
        }
        5 => {
            let scan = scan_objective_grid(&inst, &example5_demand(), GRID_RANGE, GRID_RESOLUTION)?;
            let maxima = scan.strict_local_maxima();
            let kinks = locate_kinks(&inst, &example5_demand(), &scan)?;
            Ok(ExampleReport {
                id,
                title: "pricing objective is multimodal and has kinks".into(),
                checks: vec![
                    Check::at_least("strict_local_maxima", maxima.len() as f64, 2.0),
                    Check::at_least("kinks", kinks.len() as f64, 1.0),
                ],
                details: serde_json::json!({
                    "maxima": maxima,
                    "kinks": kinks.iter().take(20).collect::<Vec<_>>(),
                    "kink_count": kinks.len(),
                }),
            })
        }
        _ => unreachable!("example_instance rejected the id"),
    }
}

/// `g` and the optimal basis on a square grid, row index on the first rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScan {
    pub axis: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub bases: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMaximum {
    pub lambda: [f64; 2],
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kink {
    pub lambda: [f64; 2],
    pub coord: usize,
    pub left: f64,
    pub right: f64,
}

pub fn scan_objective_grid(
    inst: &MatchingInstance,
    demand: &DemandModel,
    range: (f64, f64),
    resolution: usize,
) -> Result<GridScan> {
    if inst.n_types() != 2 || resolution < 2 {
        return Err(Error::Precondition(
            "grid scan needs two types and at least two points per axis".into(),
        ));
    }
    let axis: Vec<f64> = (0..resolution)
        .map(|k| range.0 + (range.1 - range.0) * k as f64 / (resolution - 1) as f64)
        .collect();
    let cells: Vec<(f64, String)> = (0..resolution * resolution)
        .into_par_iter()
        .map(|k| {
            let l = [axis[k / resolution], axis[k % resolution]];
            let sol = solve_fluid_lp(inst, &l)?;
            Ok((demand.total_revenue(&l) - sol.objective, sol.basis_tag))
        })
        .collect::<Result<_>>()?;
    let mut values = vec![Vec::with_capacity(resolution); resolution];
    let mut bases = vec![Vec::with_capacity(resolution); resolution];
    for (k, (v, b)) in cells.into_iter().enumerate() {
        values[k / resolution].push(v);
        bases[k / resolution].push(b);
    }
    Ok(GridScan {
        axis,
        values,
        bases,
    })
}

impl GridScan {
    /// Grid points strictly above every one of their (up to eight) neighbors.
    pub fn strict_local_maxima(&self) -> Vec<GridMaximum> {
        let n = self.axis.len() as isize;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = self.values[i as usize][j as usize];
                let is_max = (-1..=1)
                    .flat_map(|di| (-1..=1).map(move |dj| (di, dj)))
                    .filter(|&(di, dj)| (di, dj) != (0, 0))
                    .map(|(di, dj)| (i + di, j + dj))
                    .filter(|&(a, b)| (0..n).contains(&a) && (0..n).contains(&b))
                    .all(|(a, b)| v > self.values[a as usize][b as usize]);
                if is_max {
                    out.push(GridMaximum {
                        lambda: [self.axis[i as usize], self.axis[j as usize]],
                        value: v,
                    });
                }
            }
        }
        out
    }
}

/// Bisects every grid edge whose endpoints have different optimal bases and
/// keeps the change points where the one-sided slopes of `g` along the edge
/// differ by more than [`KINK_MISMATCH`].
pub fn locate_kinks(
    inst: &MatchingInstance,
    demand: &DemandModel,
    scan: &GridScan,
) -> Result<Vec<Kink>> {
    let n = scan.axis.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i + 1 < n && scan.bases[i][j] != scan.bases[i + 1][j] {
                edges.push(([scan.axis[i], scan.axis[j]], 0usize, scan.axis[i + 1]));
            }
            if j + 1 < n && scan.bases[i][j] != scan.bases[i][j + 1] {
                edges.push(([scan.axis[i], scan.axis[j]], 1usize, scan.axis[j + 1]));
            }
        }
    }
    let found: Vec<Option<Kink>> = edges
        .into_par_iter()
        .map(|(start, coord, end)| kink_on_edge(inst, demand, start, coord, end))
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}

fn kink_on_edge(
    inst: &MatchingInstance,
    demand: &DemandModel,
    start: [f64; 2],
    coord: usize,
    end: f64,
) -> Result<Option<Kink>> {
    let at = |t: f64| {
        let mut p = start;
        p[coord] = t;
        p
    };
    let g = |t: f64| -> Result<f64> {
        let p = at(t);
        Ok(demand.total_revenue(&p) - solve_fluid_lp(inst, &p)?.objective)
    };
    let tag = |t: f64| -> Result<String> { Ok(solve_fluid_lp(inst, &at(t))?.basis_tag) };
    let (mut a, mut b) = (start[coord], end);
    let tag_a = tag(a)?;
    while b - a > 1e-11 {
        let m = 0.5 * (a + b);
        if tag(m)? == tag_a {
            a = m;
        } else {
            b = m;
        }
    }
    let t = 0.5 * (a + b);
    let h = FD_STEP;
    if t - h < inst.lambda_lower[coord] || t + h > inst.lambda_upper[coord] {
        return Ok(None);
    }
    let g0 = g(t)?;
    let left = (g0 - g(t - h)?) / h;
    let right = (g(t + h)? - g0) / h;
    Ok(((left - right).abs() > KINK_MISMATCH).then_some(Kink {
        lambda: at(t),
        coord,
        left,
        right,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_example_is_rejected() {
        assert!(run_example(0).is_err());
        assert!(run_example(6).is_err());
    }

    #[test]
    fn small_grid_scan_shapes() {
        let inst = example_instance(5).unwrap();
        let s = scan_objective_grid(&inst, &example5_demand(), GRID_RANGE, 5).unwrap();
        assert_eq!(s.values.len(), 5);
        assert!(s.values.iter().all(|r| r.len() == 5));
        assert_eq!(s.axis[4], 1.0);
    }
}
