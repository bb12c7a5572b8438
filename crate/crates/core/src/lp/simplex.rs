//! Revised primal simplex for the fluid LP.
//!
//! The solver keeps an explicit dense basis inverse and starts from the
//! all-unmatched vertex (`y = lambda`, every patience slack basic), which is
//! feasible for any positive rate vector. Patience rows are materialized
//! lazily: row `(i, j)` only joins the working system when `x[i][j]` is about
//! to enter the basis. Until then its slack is basic and its dual is zero, so
//! pricing over the full column set is exact and the pivot sequence is that of
//! a simplex on the complete equality form.
//!
//! Pricing is Dantzig (most negative reduced cost, lowest index on ties);
//! after a run of degenerate pivots the solver switches to Bland's rule until
//! it makes progress again.

use crate::error::SolverError;
use crate::instance::MatchingInstance;
use crate::lp::standard_form::Layout;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Smallest admissible pivot element.
    pub pivot_tol: f64,
    /// Reduced-cost tolerance, relative to the largest cost coefficient.
    pub opt_tol: f64,
    /// Primal feasibility tolerance, relative to the largest rate.
    pub feas_tol: f64,
    /// Consecutive degenerate pivots before falling back to Bland's rule.
    pub bland_after: usize,
    /// Pivots between recomputations of `x_B` and the duals from `B^-1`.
    pub refresh_every: usize,
    /// Hard pivot cap; `None` picks one from the problem size.
    pub max_pivots: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            pivot_tol: 1e-9,
            opt_tol: 1e-10,
            feas_tol: 1e-9,
            bland_after: 50,
            refresh_every: 64,
            max_pivots: None,
        }
    }
}

/// Optimal vertex in the full standard-form layout.
#[derive(Debug, Clone)]
pub struct Vertex {
    /// Primal values, length `2N^2 + N`.
    pub values: Vec<f64>,
    /// Row duals, length `N^2 + N` (zero on rows that never materialized).
    pub duals: Vec<f64>,
    /// Basic column indices, sorted, length `N^2 + N`.
    pub basis: Vec<usize>,
    pub pivots: usize,
}

struct Solver<'a> {
    inst: &'a MatchingInstance,
    lambda: &'a [f64],
    lay: Layout,
    opts: SimplexOptions,
    cost_scale: f64,
    rate_scale: f64,
    /// Working row `n + k` is the patience row of `row_pair[k]`.
    row_pair: Vec<(usize, usize)>,
    /// `pair_row[i*n + j]` is the working row of pair `(i, j)` or `NONE`.
    pair_row: Vec<usize>,
    /// Basic variable (full layout index) of each working row position.
    basis: Vec<usize>,
    /// Basis position of each variable, `NONE` if nonbasic or not materialized.
    var_pos: Vec<usize>,
    binv: Vec<Vec<f64>>,
    xb: Vec<f64>,
    pi: Vec<f64>,
    pivots: usize,
}

pub fn solve(
    inst: &MatchingInstance,
    lambda: &[f64],
    opts: SimplexOptions,
) -> Result<Vertex, SolverError> {
    let n = inst.n_types();
    let lay = Layout { n };
    let cost_scale = inst.max_cost().max(1.0);
    let rate_scale = lambda.iter().fold(1.0_f64, |m, &l| m.max(l));
    let mut var_pos = vec![NONE; lay.n_vars()];
    let mut basis = Vec::with_capacity(n);
    let mut binv = Vec::with_capacity(n);
    for i in 0..n {
        var_pos[lay.y(i)] = i;
        basis.push(lay.y(i));
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        binv.push(row);
    }
    let mut s = Solver {
        inst,
        lambda,
        lay,
        opts,
        cost_scale,
        rate_scale,
        row_pair: Vec::new(),
        pair_row: vec![NONE; n * n],
        basis,
        var_pos,
        binv,
        xb: lambda.to_vec(),
        pi: inst.solo_cost.clone(),
        pivots: 0,
    };
    s.run()?;
    Ok(s.vertex())
}

impl Solver<'_> {
    fn n(&self) -> usize {
        self.lay.n
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn cost_of(&self, v: usize) -> f64 {
        let n = self.n();
        if v < n * n {
            self.inst.pair_cost[v / n][v % n]
        } else if v < n * n + n {
            self.inst.solo_cost[v - n * n]
        } else {
            0.0
        }
    }

    /// Column of `v` restricted to the working rows.
    fn column(&self, v: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let n = self.n();
        if v < n * n {
            let (i, j) = (v / n, v % n);
            if i == j {
                out.push((i, 2.0));
            } else {
                out.push((i, 1.0));
                out.push((j, 1.0));
            }
            let r = self.pair_row[v];
            if r != NONE {
                out.push((r, self.inst.theta[i]));
            }
        } else if v < n * n + n {
            let i = v - n * n;
            out.push((i, 1.0));
            for j in 0..n {
                let r = self.pair_row[i * n + j];
                if r != NONE {
                    out.push((r, -self.lambda[j]));
                }
            }
        } else {
            let k = v - n * n - n;
            let r = self.pair_row[k];
            debug_assert!(r != NONE);
            out.push((r, 1.0));
        }
    }

    fn reduced_cost(&self, v: usize, col: &mut Vec<(usize, f64)>) -> f64 {
        self.column(v, col);
        self.cost_of(v) - col.iter().map(|&(r, a)| self.pi[r] * a).sum::<f64>()
    }

    /// Entering variable and its reduced cost, scanning columns in layout
    /// order. Slacks of unmaterialized rows are basic and skipped.
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let n = self.n();
        let tol = self.opts.opt_tol * self.cost_scale;
        let mut best: Option<(usize, f64)> = None;
        // Returns true when the scan can stop (first improving column under Bland).
        let mut consider = |v: usize, d: f64| -> bool {
            if d < -tol {
                match best {
                    None => best = Some((v, d)),
                    Some((_, bd)) if !bland && d < bd => best = Some((v, d)),
                    _ => {}
                }
                bland
            } else {
                false
            }
        };
        'scan: {
            for i in 0..n {
                for j in 0..n {
                    let v = self.lay.x(i, j);
                    if self.var_pos[v] != NONE {
                        continue;
                    }
                    let mut d = self.inst.pair_cost[i][j] - self.pi[i] - self.pi[j];
                    let r = self.pair_row[i * n + j];
                    if r != NONE {
                        d -= self.inst.theta[i] * self.pi[r];
                    }
                    if consider(v, d) {
                        break 'scan;
                    }
                }
            }
            for i in 0..n {
                let v = self.lay.y(i);
                if self.var_pos[v] != NONE {
                    continue;
                }
                let mut d = self.inst.solo_cost[i] - self.pi[i];
                for j in 0..n {
                    let r = self.pair_row[i * n + j];
                    if r != NONE {
                        d += self.lambda[j] * self.pi[r];
                    }
                }
                if consider(v, d) {
                    break 'scan;
                }
            }
            for k in 0..n * n {
                let r = self.pair_row[k];
                if r == NONE {
                    continue;
                }
                let v = self.lay.slack(k / n, k % n);
                if self.var_pos[v] != NONE {
                    continue;
                }
                if consider(v, -self.pi[r]) {
                    break 'scan;
                }
            }
        }
        best
    }

    /// Adds the patience row of pair `k = i*n + j` with its slack basic.
    fn materialize(&mut self, k: usize) {
        let n = self.n();
        let (i, j) = (k / n, k % n);
        let m = self.m();
        for row in &mut self.binv {
            row.push(0.0);
        }
        let ypos = self.var_pos[self.lay.y(i)];
        let mut new_row = if ypos != NONE {
            let lj = self.lambda[j];
            self.binv[ypos].iter().map(|v| lj * v).collect::<Vec<_>>()
        } else {
            vec![0.0; m + 1]
        };
        new_row[m] = 1.0;
        self.binv.push(new_row);
        let yval = if ypos != NONE {
            self.xb[ypos].max(0.0)
        } else {
            0.0
        };
        self.xb.push(self.lambda[j] * yval);
        self.pi.push(0.0);
        let slack = self.lay.slack(i, j);
        self.basis.push(slack);
        self.var_pos[slack] = m;
        self.pair_row[k] = m;
        self.row_pair.push((i, j));
    }

    fn run(&mut self) -> Result<(), SolverError> {
        let n = self.n();
        let max_pivots = self.opts.max_pivots.unwrap_or(50 * (n * n + n) + 1000);
        let mut col = Vec::new();
        let mut alpha = Vec::new();
        let mut degenerate_run = 0usize;
        let mut verify_rounds = 0usize;
        loop {
            let bland = degenerate_run >= self.opts.bland_after;
            let Some((q, _)) = self.price(bland) else {
                // Candidate optimum: recompute from B^-1 and confirm, with a
                // full reinversion if accumulated error broke optimality.
                self.refresh();
                if self.price(false).is_none() && self.primal_ok() {
                    return Ok(());
                }
                verify_rounds += 1;
                if verify_rounds > 3 {
                    return Err(SolverError::Numerical(
                        "optimality could not be confirmed after reinversion".into(),
                    ));
                }
                self.reinvert()?;
                continue;
            };
            if self.pivots >= max_pivots {
                return Err(SolverError::PivotLimit(max_pivots));
            }
            if q < n * n && self.pair_row[q] == NONE && self.inst.theta[q / n] > 0.0 {
                self.materialize(q);
            }
            let dq = self.reduced_cost(q, &mut col);

            // FTRAN: alpha = B^-1 a_q
            let m = self.m();
            alpha.clear();
            alpha.extend(
                self.binv
                    .iter()
                    .map(|row| col.iter().map(|&(r, a)| row[r] * a).sum::<f64>()),
            );

            let Some(p) = self.ratio_test(&alpha, bland) else {
                return Err(SolverError::Unbounded(q));
            };
            let step = self.xb[p].max(0.0) / alpha[p];
            if step <= 1e-12 * self.rate_scale {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            for (x, &a) in self.xb.iter_mut().zip(&alpha) {
                *x -= step * a;
            }
            self.xb[p] = step;
            let leaving = self.basis[p];
            self.var_pos[leaving] = NONE;
            self.basis[p] = q;
            self.var_pos[q] = p;

            let mut prow = std::mem::take(&mut self.binv[p]);
            let inv = 1.0 / alpha[p];
            prow.iter_mut().for_each(|v| *v *= inv);
            for (r, row) in self.binv.iter_mut().enumerate() {
                let a = alpha[r];
                if r == p || a == 0.0 {
                    continue;
                }
                for (dst, src) in row.iter_mut().zip(&prow) {
                    *dst -= a * src;
                }
            }
            for (pi, src) in self.pi.iter_mut().zip(&prow) {
                *pi += dq * src;
            }
            debug_assert_eq!(prow.len(), m);
            self.binv[p] = prow;
            self.pivots += 1;
            if self.pivots % self.opts.refresh_every == 0 {
                self.refresh();
            }
        }
    }

    fn ratio_test(&self, alpha: &[f64], bland: bool) -> Option<usize> {
        let tol = self.opts.pivot_tol;
        let mut best: Option<(usize, f64)> = None;
        for (p, &a) in alpha.iter().enumerate() {
            if a <= tol {
                continue;
            }
            let ratio = self.xb[p].max(0.0) / a;
            match best {
                None => best = Some((p, ratio)),
                Some((bp, br)) => {
                    let tie = 1e-12 * (1.0 + br.abs());
                    if ratio < br - tie {
                        best = Some((p, ratio));
                    } else if ratio <= br + tie {
                        let better = if bland {
                            self.basis[p] < self.basis[bp]
                        } else {
                            a > alpha[bp]
                        };
                        if better {
                            best = Some((p, ratio.min(br)));
                        }
                    }
                }
            }
        }
        best.map(|(p, _)| p)
    }

    /// Recomputes `x_B = B^-1 b` and `pi = c_B B^-1` from the stored inverse.
    fn refresh(&mut self) {
        let n = self.n();
        for (x, row) in self.xb.iter_mut().zip(&self.binv) {
            *x = row[..n].iter().zip(self.lambda).map(|(a, l)| a * l).sum();
        }
        let m = self.m();
        let mut pi = vec![0.0; m];
        for (p, row) in self.binv.iter().enumerate() {
            let cb = self.cost_of(self.basis[p]);
            if cb != 0.0 {
                for (d, s) in pi.iter_mut().zip(row) {
                    *d += cb * s;
                }
            }
        }
        self.pi = pi;
    }

    fn primal_ok(&self) -> bool {
        let tol = self.opts.feas_tol * self.rate_scale;
        if self.xb.iter().any(|&x| x < -tol) {
            return false;
        }
        // Residual of B x_B = b using the original columns.
        let mut r = vec![0.0; self.m()];
        r[..self.n()]
            .iter_mut()
            .zip(self.lambda)
            .for_each(|(ri, l)| *ri = -l);
        let mut col = Vec::new();
        for (p, &v) in self.basis.iter().enumerate() {
            self.column(v, &mut col);
            for &(row, a) in &col {
                r[row] += a * self.xb[p];
            }
        }
        r.iter().all(|v| v.abs() <= tol)
    }

    /// Rebuilds `B^-1` from scratch by Gauss-Jordan with partial pivoting.
    fn reinvert(&mut self) -> Result<(), SolverError> {
        let m = self.m();
        let mut a = vec![vec![0.0; m]; m];
        let mut col = Vec::new();
        for (p, &v) in self.basis.iter().enumerate() {
            self.column(v, &mut col);
            for &(r, val) in &col {
                a[r][p] = val;
            }
        }
        let mut inv: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut e = vec![0.0; m];
                e[i] = 1.0;
                e
            })
            .collect();
        for c in 0..m {
            let piv = (c..m)
                .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
                .unwrap_or(c);
            if a[piv][c].abs() < 1e-14 {
                return Err(SolverError::Numerical(format!(
                    "singular basis during reinversion (column {c})"
                )));
            }
            a.swap(c, piv);
            inv.swap(c, piv);
            let d = 1.0 / a[c][c];
            a[c].iter_mut().for_each(|v| *v *= d);
            inv[c].iter_mut().for_each(|v| *v *= d);
            let (arow, irow) = (a[c].clone(), inv[c].clone());
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r][c];
                if f == 0.0 {
                    continue;
                }
                a[r].iter_mut().zip(&arow).for_each(|(x, y)| *x -= f * y);
                inv[r].iter_mut().zip(&irow).for_each(|(x, y)| *x -= f * y);
            }
        }
        // B^-1 rows are indexed by basis position, i.e. by columns of B.
        self.binv = inv;
        self.refresh();
        Ok(())
    }

    fn vertex(&self) -> Vertex {
        let lay = self.lay;
        let n = lay.n;
        let mut values = vec![0.0; lay.n_vars()];
        let mut basis = Vec::with_capacity(lay.n_rows());
        for (p, &v) in self.basis.iter().enumerate() {
            values[v] = self.xb[p].max(0.0);
            basis.push(v);
        }
        for i in 0..n {
            let yi = values[lay.y(i)];
            for j in 0..n {
                let k = i * n + j;
                let r = self.pair_row[k];
                if r == NONE {
                    values[lay.slack(i, j)] = self.lambda[j] * yi - self.inst.theta[i] * values[k];
                    basis.push(lay.slack(i, j));
                }
            }
        }
        basis.sort_unstable();
        let mut duals = vec![0.0; lay.n_rows()];
        duals[..n].copy_from_slice(&self.pi[..n]);
        for (k, &(i, j)) in self.row_pair.iter().enumerate() {
            duals[lay.patience_row(i, j)] = self.pi[n + k];
        }
        Vertex {
            values,
            duals,
            basis,
            pivots: self.pivots,
        }
    }
}
