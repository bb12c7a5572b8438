//! Equality-form representation of the fluid LP.
//!
//! Variable layout (`N` types, `2N^2 + N` columns):
//!
//! | range                 | variable  |
//! |-----------------------|-----------|
//! | `i*N + j`             | `x[i][j]` |
//! | `N^2 + i`             | `y[i]`    |
//! | `N^2 + N + i*N + j`   | `d[i][j]` (patience slack) |
//!
//! Row layout (`N^2 + N` rows): rows `0..N` are flow balance
//! `sum_j x[j][i] + sum_j x[i][j] + y[i] = lambda[i]`; row `N + i*N + j` is
//! `theta[i] x[i][j] + d[i][j] - lambda[j] y[i] = 0`. Rows with `theta[i] = 0`
//! are kept so the shape does not depend on the data.

use crate::error::Result;
use crate::instance::MatchingInstance;

/// Column index helpers for the layout above.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
}

impl Layout {
    pub fn x(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }
    pub fn y(&self, i: usize) -> usize {
        self.n * self.n + i
    }
    pub fn slack(&self, i: usize, j: usize) -> usize {
        self.n * self.n + self.n + i * self.n + j
    }
    pub fn n_vars(&self) -> usize {
        2 * self.n * self.n + self.n
    }
    pub fn n_rows(&self) -> usize {
        self.n * self.n + self.n
    }
    pub fn flow_row(&self, i: usize) -> usize {
        i
    }
    pub fn patience_row(&self, i: usize, j: usize) -> usize {
        self.n + i * self.n + j
    }
}

/// `min cost . z  s.t.  A z = rhs, z >= 0`, with `A` stored by column.
#[derive(Debug, Clone)]
pub struct StandardFormLP {
    pub layout: Layout,
    pub cost: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Sparse columns as `(row, coefficient)` pairs, sorted by row.
    pub columns: Vec<Vec<(usize, f64)>>,
}

impl StandardFormLP {
    pub fn n_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }

    /// `A z - rhs`.
    pub fn residual(&self, z: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = self.rhs.iter().map(|b| -b).collect();
        for (col, &zj) in self.columns.iter().zip(z) {
            for &(row, a) in col {
                r[row] += a * zj;
            }
        }
        r
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        self.cost.iter().zip(z).map(|(c, v)| c * v).sum()
    }

    /// Lifts a point `(x, y)` of the inequality form into this layout, with
    /// `d[i][j] = lambda[j] y[i] - theta[i] x[i][j]`.
    pub fn lift(
        &self,
        inst: &MatchingInstance,
        lambda: &[f64],
        x: &[Vec<f64>],
        y: &[f64],
    ) -> Vec<f64> {
        let lay = self.layout;
        let n = lay.n;
        let mut z = vec![0.0; lay.n_vars()];
        for i in 0..n {
            z[lay.y(i)] = y[i];
            for j in 0..n {
                z[lay.x(i, j)] = x[i][j];
                z[lay.slack(i, j)] = lambda[j] * y[i] - inst.theta[i] * x[i][j];
            }
        }
        z
    }
}

pub fn build_standard_form(inst: &MatchingInstance, lambda: &[f64]) -> Result<StandardFormLP> {
    inst.validate()?;
    inst.check_rates(lambda)?;
    let n = inst.n_types();
    let lay = Layout { n };
    let mut cost = vec![0.0; lay.n_vars()];
    let mut columns = vec![Vec::new(); lay.n_vars()];
    for i in 0..n {
        for j in 0..n {
            let col = &mut columns[lay.x(i, j)];
            if i == j {
                col.push((lay.flow_row(i), 2.0));
            } else {
                let (a, b) = (i.min(j), i.max(j));
                col.push((lay.flow_row(a), 1.0));
                col.push((lay.flow_row(b), 1.0));
            }
            col.push((lay.patience_row(i, j), inst.theta[i]));
            cost[lay.x(i, j)] = inst.pair_cost[i][j];

            columns[lay.slack(i, j)].push((lay.patience_row(i, j), 1.0));
        }
        let ycol = &mut columns[lay.y(i)];
        ycol.push((lay.flow_row(i), 1.0));
        for j in 0..n {
            ycol.push((lay.patience_row(i, j), -lambda[j]));
        }
        cost[lay.y(i)] = inst.solo_cost[i];
    }
    let mut rhs = vec![0.0; lay.n_rows()];
    rhs[..n].copy_from_slice(lambda);
    Ok(StandardFormLP {
        layout: lay,
        cost,
        rhs,
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions_n1_n2() {
        let one =
            MatchingInstance::new(vec![1.0], vec![1.0], vec![vec![1.0]], vec![0.5], vec![2.0])
                .unwrap();
        let lp = build_standard_form(&one, &[1.0]).unwrap();
        assert_eq!((lp.n_vars(), lp.n_rows()), (3, 2));

        let two =
            MatchingInstance::two_type([1.0, 2.0], 1.0, 1.0, 1.2, [0.5, 0.5], [2.0, 2.0]).unwrap();
        let lp = build_standard_form(&two, &[1.0, 1.0]).unwrap();
        assert_eq!((lp.n_vars(), lp.n_rows()), (10, 6));
    }

    #[test]
    fn all_unmatched_point_is_feasible() {
        let inst =
            MatchingInstance::two_type([1.0, 2.0], 1.0, 1.0, 1.2, [0.5, 0.5], [2.0, 2.0]).unwrap();
        let lambda = [1.0, 1.0];
        let lp = build_standard_form(&inst, &lambda).unwrap();
        let x = vec![vec![0.0; 2]; 2];
        let z = lp.lift(&inst, &lambda, &x, &lambda);
        // d[i][j] = lambda_j * lambda_i
        assert_eq!(z[lp.layout.slack(0, 1)], 1.0);
        assert!(lp.residual(&z).iter().all(|r| *r == 0.0));
    }

    #[test]
    fn rejects_rates_outside_box() {
        let inst =
            MatchingInstance::two_type([1.0, 2.0], 1.0, 1.0, 1.2, [0.5, 0.5], [2.0, 2.0]).unwrap();
        assert!(build_standard_form(&inst, &[3.0, 1.0]).is_err());
        assert!(build_standard_form(&inst, &[1.0]).is_err());
    }
}
